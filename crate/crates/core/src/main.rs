fn main() {
    env_logger::init();
    std::process::exit(d3g::cli::main_with_args(std::env::args_os()));
}
