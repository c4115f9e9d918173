fn main() {
    std::process::exit(awls_rpca::cli::run(std::env::args_os()));
}
