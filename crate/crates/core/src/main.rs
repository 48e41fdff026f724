fn main() {
    std::process::exit(evpred::cli::run(std::env::args_os()));
}
