fn main() {
    std::process::exit(slcode::cli::main(std::env::args_os()));
}
