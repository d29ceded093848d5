fn main() {
    std::process::exit(casbah::cli::run(std::env::args_os()));
}
