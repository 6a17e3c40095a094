fn main() {
    std::process::exit(yarnsim::cli::run(std::env::args_os()));
}
