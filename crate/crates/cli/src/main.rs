fn main() {
    std::process::exit(softdice_cli::run_cli(std::env::args_os()));
}
