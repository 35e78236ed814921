use std::process::ExitCode;

fn main() -> ExitCode {
    linermoo::cli::main_with(std::env::args_os())
}
