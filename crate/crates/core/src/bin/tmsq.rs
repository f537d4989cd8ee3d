fn main() -> std::process::ExitCode {
    tmsq::cli::main_with_args(std::env::args_os())
}
