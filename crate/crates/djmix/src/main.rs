fn main() {
    std::process::exit(djmix::cli::run(std::env::args_os()));
}
