fn main() {
    std::process::exit(isoext::cli::run());
}
