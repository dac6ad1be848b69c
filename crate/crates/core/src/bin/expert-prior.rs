fn main() {
    std::process::exit(expert_prior::harness::cli::run(std::env::args_os()));
}
