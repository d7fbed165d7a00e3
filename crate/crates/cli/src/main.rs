fn main() {
    std::process::exit(hitlab_cli::run(std::env::args_os()));
}
