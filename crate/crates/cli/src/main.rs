fn main() {
    std::process::exit(qhj_cli::run(std::env::args_os()));
}
