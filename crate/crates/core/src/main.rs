fn main() {
    std::process::exit(hybriddetect::cli::dispatch(std::env::args_os()));
}
