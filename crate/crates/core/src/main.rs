fn main() {
    std::process::exit(finbox::cli::run(std::env::args_os()));
}
