fn main() {
    std::process::exit(airnet::cli::main_with_args(std::env::args_os()));
}
