fn main() {
    std::process::exit(hedger::main_with_args(std::env::args_os()));
}
