fn main() {
    std::process::exit(storyline::cli::run(std::env::args_os()));
}
