use std::process::ExitCode;
use std::time::Instant;

use apot_cli::{run, Cli};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let timing = cli.timing;
    let start = Instant::now();
    let mut report = run(&cli);
    let elapsed = start.elapsed().as_secs_f64();
    if timing {
        report.wall_time = Some(elapsed);
    } else {
        eprintln!("wall time: {elapsed:.3} s");
    }
    print!("{report}");
    ExitCode::from(report.exit_code() as u8)
}
