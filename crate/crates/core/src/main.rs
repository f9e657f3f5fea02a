fn main() -> std::process::ExitCode {
    extremity::cli::main_with_args(std::env::args_os())
}
