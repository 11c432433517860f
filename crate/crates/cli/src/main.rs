fn main() {
    let code = obswin_cli::run(std::env::args_os());
    std::process::exit(code);
}
