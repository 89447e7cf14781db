fn main() {
    std::process::exit(spectral_recovery::cli::run(std::env::args_os()));
}
