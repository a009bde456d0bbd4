fn main() {
    std::process::exit(opspace::cli::run_from(std::env::args_os()));
}
