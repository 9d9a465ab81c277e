//! `rpr3`: file-based pipelines for 3-RPR singularity analysis.
//!
//! Exit codes: 0 success, 1 invalid input or domain error, 2 I/O error.

mod args;
mod commands;
mod manifest;

use std::fs;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use manifest::{sha256_hex, RunManifest};

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|cause| {
        cause.is::<std::io::Error>()
            || cause
                .downcast_ref::<rpr_core::Error>()
                .is_some_and(rpr_core::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    let ctx = Ctx {
        args,
        degrees: cli.degrees,
    };
    match &cli.command {
        Command::Slice(a) => commands::slice(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Maxbox(a) => commands::maxbox(&ctx, a),
        Command::Image(a) => commands::image(&ctx, a),
        Command::Check(a) => commands::check(&ctx, a),
        Command::Replay(a) => replay(&a.manifest),
    }
}

fn replay(path: &std::path::Path) -> Result<()> {
    let recorded = RunManifest::load(path)?;
    let cli = Cli::try_parse_from(
        std::iter::once("rpr3".to_string()).chain(recorded.args.iter().cloned()),
    )
    .context("arguments recorded in manifest")?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("manifest records a replay");
    }
    run(cli, recorded.args.clone())?;
    let mut mismatched = Vec::new();
    for (output, digest) in &recorded.outputs {
        let bytes = fs::read(output).with_context(|| format!("reading {output}"))?;
        if &sha256_hex(&bytes) == digest {
            println!("ok {output}");
        } else {
            println!("changed {output}");
            mismatched.push(output.as_str());
        }
    }
    if !mismatched.is_empty() {
        bail!("{} output(s) differ from the manifest", mismatched.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
