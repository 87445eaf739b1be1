fn main() {
    std::process::exit(pdmr::cli::run(std::env::args_os()));
}
