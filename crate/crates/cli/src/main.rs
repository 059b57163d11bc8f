fn main() {
    std::process::exit(electroad_cli::run(std::env::args_os()));
}
