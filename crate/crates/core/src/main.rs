fn main() {
    std::process::exit(pkgsentry::cli::run(std::env::args_os()));
}
