fn main() {
    std::process::exit(rlbench::cli::run(std::env::args_os()));
}
