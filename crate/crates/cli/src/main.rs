fn main() {
    std::process::exit(multiobs_cli::run_cli(std::env::args_os()));
}
