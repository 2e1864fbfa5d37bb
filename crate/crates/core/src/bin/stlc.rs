fn main() {
    std::process::exit(stlc_core::cli::main_with_args(std::env::args_os()));
}
