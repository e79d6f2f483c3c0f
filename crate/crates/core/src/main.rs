fn main() {
    std::process::exit(limtomo::cli::run(std::env::args_os()));
}
