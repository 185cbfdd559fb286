fn main() {
    std::process::exit(ep_berry::cli::main_with_args(std::env::args_os()));
}
