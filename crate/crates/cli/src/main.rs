fn main() {
    std::process::exit(annihilator_cli::main_with_args(std::env::args_os()));
}
