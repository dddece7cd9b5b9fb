fn main() {
    std::process::exit(edrlab::cli::run(std::env::args_os()));
}
