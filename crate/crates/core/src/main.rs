fn main() {
    std::process::exit(platoon_core::cli::main_with_args(std::env::args_os()));
}
