fn main() {
    std::process::exit(hivae::cli::run(std::env::args_os()));
}
