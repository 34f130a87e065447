fn main() {
    std::process::exit(otto_fcs::cli::run(std::env::args_os()));
}
