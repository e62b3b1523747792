fn main() {
    std::process::exit(forumsim::cli::run_cli(std::env::args_os()));
}
