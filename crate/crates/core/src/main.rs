fn main() {
    std::process::exit(mlchain::cli::run(std::env::args_os()));
}
