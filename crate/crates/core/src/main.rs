fn main() {
    std::process::exit(spinekit::cli::run());
}
