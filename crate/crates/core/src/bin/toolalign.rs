fn main() {
    std::process::exit(toolalign::cli::run_from(std::env::args_os()));
}
