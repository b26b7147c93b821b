use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(uitask::cli::run(std::env::args_os()))
}
