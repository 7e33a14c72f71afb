fn main() {
    std::process::exit(guidegan::cli::run(std::env::args_os()));
}
