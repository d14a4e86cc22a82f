fn main() {
    std::process::exit(fekit::cli::run());
}
