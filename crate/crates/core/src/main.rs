fn main() {
    std::process::exit(lschain::cli::main_with_args(std::env::args_os()));
}
