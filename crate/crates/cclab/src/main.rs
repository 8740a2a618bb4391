fn main() {
    std::process::exit(cclab::cli::run(std::env::args()));
}
