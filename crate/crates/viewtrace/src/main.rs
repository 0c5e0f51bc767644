use std::process::ExitCode;

fn main() -> ExitCode {
    viewtrace::cli::main_with_args(std::env::args_os())
}
