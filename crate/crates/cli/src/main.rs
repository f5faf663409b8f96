fn main() {
    std::process::exit(signsieve_cli::run_from(std::env::args_os()));
}
