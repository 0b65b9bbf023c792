use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(voscascade::cli::run(std::env::args_os()))
}
