fn main() {
    std::process::exit(oscint::cli::run(std::env::args()));
}
