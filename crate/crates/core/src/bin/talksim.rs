fn main() {
    std::process::exit(talksim::cli::main_with(std::env::args_os()));
}
