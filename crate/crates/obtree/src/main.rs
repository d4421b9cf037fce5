fn main() {
    std::process::exit(obtree::cli::run_from(std::env::args_os()));
}
