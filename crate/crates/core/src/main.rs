fn main() {
    std::process::exit(prefix_scan::cli::main_with_args(std::env::args_os()));
}
