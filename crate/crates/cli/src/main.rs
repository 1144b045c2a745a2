fn main() {
    std::process::exit(rendezvous_cli::main_with_args(std::env::args_os()));
}
