fn main() {
    std::process::exit(fracmg_cli::run(std::env::args_os()));
}
