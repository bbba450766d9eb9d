fn main() {
    std::process::exit(pathrec::cli::main_with_args(std::env::args_os()));
}
