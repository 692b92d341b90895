fn main() {
    std::process::exit(liftrnn_harness::cli::run(std::env::args_os()));
}
