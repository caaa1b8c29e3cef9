fn main() {
    std::process::exit(lgnb::cli::run_command(std::env::args_os()));
}
