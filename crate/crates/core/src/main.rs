fn main() {
    std::process::exit(feec::cli::run(std::env::args_os()));
}
