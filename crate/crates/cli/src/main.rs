fn main() {
    std::process::exit(weakinfo_cli::run_from_args(std::env::args_os()));
}
