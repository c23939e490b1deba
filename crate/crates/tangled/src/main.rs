fn main() {
    std::process::exit(tangled::main_with_args(std::env::args_os()));
}
