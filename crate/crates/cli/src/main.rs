use std::process::ExitCode;

fn main() -> ExitCode {
    mvactive::cli::main_with_args(std::env::args_os())
}
