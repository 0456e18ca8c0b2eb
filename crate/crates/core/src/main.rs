fn main() {
    std::process::exit(broyden_lab::cli::run(std::env::args_os()));
}
