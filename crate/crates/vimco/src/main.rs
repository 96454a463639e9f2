fn main() {
    std::process::exit(vimco::cli::run(std::env::args_os()));
}
