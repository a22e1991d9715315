fn main() {
    std::process::exit(ris_rpm::harness::cli::run_cli(std::env::args_os()));
}
