fn main() {
    std::process::exit(finger_topo::cli::main_with(std::env::args_os()));
}
