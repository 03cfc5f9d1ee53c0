fn main() {
    std::process::exit(kantorovich::cli::main_with_args(std::env::args_os()));
}
