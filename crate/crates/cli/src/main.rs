fn main() {
    std::process::exit(pixbis_cli::run(std::env::args_os()));
}
