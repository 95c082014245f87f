fn main() {
    std::process::exit(cpkernel::cli::main_with_args(std::env::args_os()));
}
