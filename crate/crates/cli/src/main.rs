fn main() {
    std::process::exit(omnigan_cli::run(std::env::args_os()));
}
