fn main() {
    std::process::exit(tslt_cli::run(std::env::args_os()));
}
