fn main() {
    std::process::exit(unidec::cli::run_command(std::env::args_os()));
}
