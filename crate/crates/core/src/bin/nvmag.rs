fn main() {
    std::process::exit(nvmag::cli::run(std::env::args_os()));
}
