fn main() {
    std::process::exit(freetci::cli::run(std::env::args_os()));
}
