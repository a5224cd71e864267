fn main() {
    std::process::exit(matproc::cli::dispatch(std::env::args_os()));
}
