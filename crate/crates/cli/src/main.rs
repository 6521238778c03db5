fn main() {
    std::process::exit(behavio::run(std::env::args_os()));
}
