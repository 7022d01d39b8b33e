fn main() {
    std::process::exit(kpz_selfsim::cli::run());
}
