use std::io::{self, Write};
use std::process::ExitCode;

fn main() -> ExitCode {
    let env = match gcc_core::cli::Env::from_process() {
        Ok(env) => env,
        Err(e) => {
            eprintln!("error: IoError: {e}");
            return ExitCode::from(1);
        }
    };
    let (stdin, stdout, stderr) = (io::stdin(), io::stdout(), io::stderr());
    let code = gcc_core::cli::run(std::env::args_os(), &env, &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock());
    let _ = io::stdout().flush();
    ExitCode::from(code as u8)
}
