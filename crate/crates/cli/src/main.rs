fn main() {
    std::process::exit(unlearn_cli::run(std::env::args_os()));
}
