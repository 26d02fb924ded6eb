fn main() {
    std::process::exit(coilopt_cli::run_cli(std::env::args_os()));
}
