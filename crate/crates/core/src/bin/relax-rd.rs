fn main() {
    std::process::exit(relaxrd::cli::main(std::env::args_os()));
}
