fn main() {
    std::process::exit(qdd::cli::run(std::env::args_os()));
}
