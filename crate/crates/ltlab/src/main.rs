fn main() {
    std::process::exit(ltlab::cli::main_with_args(std::env::args_os()));
}
