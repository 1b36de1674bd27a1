fn main() {
    std::process::exit(lrgan::cli::run(std::env::args_os()));
}
