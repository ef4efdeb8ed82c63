fn main() {
    std::process::exit(twistlab_cli::execute(std::env::args_os()));
}
