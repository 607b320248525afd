fn main() {
    std::process::exit(factorforge::cli::cli_run(std::env::args_os()));
}
