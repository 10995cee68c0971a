fn main() {
    std::process::exit(dipiir_cli::run(std::env::args_os()));
}
