fn main() {
    std::process::exit(scenesmith::main_with_args(std::env::args_os()));
}
