mod commands;
mod opts;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter("ROWTRACK_LOG")
            .write_style("ROWTRACK_LOG_STYLE"),
    )
    .init();

    let cli = opts::Cli::parse();
    let result = match cli.command {
        opts::Command::Run(args) => commands::run(args),
        opts::Command::Sweep(args) => commands::sweep(args),
        opts::Command::Gen(args) => commands::gen(args),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        // A consumer closing stdout (e.g. piping into `head`) is a normal
        // way to stop reading, not a failure.
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}
