fn main() {
    std::process::exit(beamsim::cli::main_with_args(std::env::args_os()));
}
