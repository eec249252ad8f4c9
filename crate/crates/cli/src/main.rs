fn main() {
    let code = qolrank_cli::run_cli(std::env::args_os());
    std::process::exit(code);
}
