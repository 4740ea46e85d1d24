use std::io::Write;
use std::process::ExitCode;

use gsgdm_cli::{parse_args, run_experiment, CliError};

fn fail(e: CliError) -> ExitCode {
    match &e {
        CliError::Clap(c) => {
            let _ = c.print();
        }
        other => eprintln!("error: {other}"),
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let plan = match parse_args(std::env::args_os()) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run_experiment(&plan, &mut out) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(e),
    };
    let _ = out.flush();
    code
}
