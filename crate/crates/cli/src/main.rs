fn main() {
    std::process::exit(rivwidth_cli::run(std::env::args_os()));
}
