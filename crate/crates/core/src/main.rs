fn main() {
    std::process::exit(scoreopt::cli::main_with_args(std::env::args_os()));
}
