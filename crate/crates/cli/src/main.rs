use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(polydisc_cli::run(std::env::args_os()))
}
