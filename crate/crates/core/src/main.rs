fn main() {
    std::process::exit(wvn_spectral::cli::run(std::env::args_os()));
}
