fn main() {
    std::process::exit(reachgrid::cli::run());
}
