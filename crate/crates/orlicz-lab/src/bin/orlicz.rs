fn main() {
    std::process::exit(orlicz_lab::cli::run(std::env::args_os()));
}
