fn main() {
    std::process::exit(state_lp::cli::main_with_args(std::env::args_os()));
}
