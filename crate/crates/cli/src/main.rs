mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::CliError;

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|err| CliError::Io {
            path: path.clone(),
            err,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|err| CliError::Io {
                    path: "<stdout>".into(),
                    err,
                })
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 on --help
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
        {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli).and_then(|text| emit(&cli, &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cwglauber: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
