fn main() {
    std::process::exit(zgen::cli::run(std::env::args_os()));
}
