fn main() {
    std::process::exit(nutrec::cli::run_command(std::env::args_os()));
}
