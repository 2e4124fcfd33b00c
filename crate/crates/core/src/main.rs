fn main() {
    std::process::exit(trajbench::cli::run());
}
