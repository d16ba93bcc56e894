fn main() {
    std::process::exit(qrobot::cli::main_from(std::env::args_os()));
}
