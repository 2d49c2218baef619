fn main() {
    std::process::exit(leja_bayes::cli::run(std::env::args_os()));
}
