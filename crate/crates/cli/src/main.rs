fn main() {
    std::process::exit(wenet_cli::main_with_args(std::env::args_os()));
}
