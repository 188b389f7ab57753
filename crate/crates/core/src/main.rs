fn main() {
    std::process::exit(quadgait::cli::run(std::env::args_os()));
}
