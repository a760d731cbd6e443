fn main() {
    std::process::exit(b92sim::cli::run(std::env::args_os()));
}
