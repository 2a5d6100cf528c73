fn main() {
    let code = gwgl::cli::run(std::env::args_os());
    std::process::exit(code);
}
