use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(lexspec::cli::run(std::env::args_os()))
}
