use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use secretary::harness::run_experiment;
use secretary::report::{
    csv_string, emit_all_tables, oracle_audit, parse_config, Command, ConfigError, OutputFormat,
    RunOptions,
};

const EXIT_USAGE: u8 = 2;
const EXIT_REPORT: u8 = 3;
const EXIT_AUDIT_FAILED: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_RUN: u8 = 6;

fn write_output(opts: &RunOptions, text: &str) -> io::Result<()> {
    match &opts.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn run(opts: RunOptions) -> ExitCode {
    let summaries = match run_experiment(&opts.config) {
        Ok(s) => s,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_RUN);
        }
    };
    let rendered = match opts.format {
        OutputFormat::Csv => csv_string(&summaries),
        OutputFormat::Table => emit_all_tables(&summaries),
    };
    let text = match rendered {
        Ok(text) => text,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_REPORT);
        }
    };
    if let Err(err) = write_output(&opts, &text) {
        eprintln!("error: {err}");
        return ExitCode::from(EXIT_IO);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let command = match parse_config(std::env::args_os()) {
        Ok(cmd) => cmd,
        Err(ConfigError::Help(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(err @ ConfigError::Io { .. }) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_IO);
        }
        Err(err) => {
            eprintln!("{err}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match command {
        Command::Run(opts) => run(opts),
        Command::Audit(opts) => {
            match oracle_audit(opts.n_max, &opts.rules, &opts.params, opts.reps, opts.seed) {
                Ok(report) => {
                    print!("{}", report.text());
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_AUDIT_FAILED)
                    }
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(EXIT_RUN)
                }
            }
        }
    }
}
