fn main() {
    std::process::exit(lipo::cli::main_from_args(std::env::args_os()));
}
