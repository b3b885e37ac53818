fn main() {
    std::process::exit(milplan::cli::run());
}
