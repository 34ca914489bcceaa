fn main() {
    std::process::exit(omsqueeze_cli::run(std::env::args().collect()));
}
