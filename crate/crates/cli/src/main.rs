use std::process::ExitCode;

fn main() -> ExitCode {
    curvesfm_cli::run::main_from(std::env::args_os())
}
