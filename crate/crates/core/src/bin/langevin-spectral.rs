fn main() {
    std::process::exit(langevin_spectral::cli::run(std::env::args_os()));
}
