fn main() {
    std::process::exit(chromaweak::cli::run(std::env::args_os()));
}
