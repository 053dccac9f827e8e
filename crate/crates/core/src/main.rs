fn main() {
    std::process::exit(floquet_delta::cli::run(std::env::args_os()));
}
