fn main() {
    std::process::exit(ramc_cli::run(std::env::args_os()));
}
