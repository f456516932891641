fn main() {
    std::process::exit(robust_trees::cli::run(std::env::args_os()));
}
