use std::process::ExitCode;

fn main() -> ExitCode {
    polymfd::cli::main_with_args(std::env::args_os())
}
