fn main() {
    std::process::exit(lineguide_cli::run(std::env::args_os()));
}
