fn main() {
    std::process::exit(dips_cli::run(std::env::args_os()));
}
