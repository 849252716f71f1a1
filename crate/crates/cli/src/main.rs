fn main() {
    std::process::exit(nllr_cli::cli::run(std::env::args_os()));
}
