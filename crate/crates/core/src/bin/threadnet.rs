fn main() {
    std::process::exit(threadnet::cli::run(std::env::args_os()));
}
