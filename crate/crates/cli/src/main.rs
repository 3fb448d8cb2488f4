fn main() {
    std::process::exit(vne_cli::run(std::env::args_os()));
}
