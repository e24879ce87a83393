use std::process::ExitCode;

use smallball::cli;

fn main() -> ExitCode {
    if let Err(e) = cli::configure_threads() {
        eprintln!("{}", cli::error_line(e.kind(), &e.to_string()));
        return ExitCode::from(2);
    }
    let code = cli::run(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr(),
    );
    ExitCode::from(code as u8)
}
