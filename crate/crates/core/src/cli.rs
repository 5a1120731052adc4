//! Command-line front end used by the `psscf` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::engine::{EvalReport, Psscf};
use crate::error::{Error, Result};
use crate::functions::{evaluate_function, FunctionSpec};
use crate::harness::{gen_banded, run_benchmark_with, summarize};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "psscf", version, about = "Filtered Paterson-Stockmeyer evaluation of sparse matrix functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Matrix exponential of a Matrix Market file.
    Exp(EvalArgs),
    /// Matrix cosine of a Matrix Market file.
    Cos(EvalArgs),
    /// Polynomial with coefficients read from a file, lowest degree first.
    Poly(PolyArgs),
    /// Benchmark sweep described by a key=value config file.
    Bench(BenchArgs),
    /// Random banded test matrix.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Absolute 1-norm tolerance.
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    /// Write the key,value summary here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolyArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long)]
    pub coeffs: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub bandwidth: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stream>", e)
}

/// Summary of an evaluation as `key,value` lines.
pub fn write_summary(function: &str, input_nnz: usize, report: &EvalReport, out: &mut impl Write) -> std::io::Result<()> {
    let b = &report.budget;
    let lines: Vec<(&str, String)> = vec![
        ("function", function.to_string()),
        ("n", report.result.dim().to_string()),
        ("input_nnz", input_nnz.to_string()),
        ("tolerance", format!("{:e}", b.eps_tol)),
        ("N", report.plan.terms.to_string()),
        ("q", report.plan.block_size.to_string()),
        ("b", report.plan.blocks.to_string()),
        ("tail_bound", format!("{:e}", b.tail)),
        ("filter_budget", format!("{:e}", b.filter_budget)),
        ("certified_bound", format!("{:e}", report.certified_bound)),
        ("products", report.products().to_string()),
        ("result_nnz", report.result.nnz().to_string()),
        ("sparsity", format!("{:e}", report.result.sparsity())),
        ("elapsed_seconds", format!("{:e}", report.elapsed.as_secs_f64())),
    ];
    writeln!(out, "key,value")?;
    for (k, v) in lines {
        writeln!(out, "{k},{v}")?;
    }
    for s in &report.steps {
        writeln!(
            out,
            "step_{:?}_{},dropped={:e};fnt={:e};nnz_before={};nnz_after={}",
            s.kind, s.step, s.dropped_norm, s.applied_fnt, s.nnz_before, s.nnz_after
        )?;
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("--tol must be positive, got {tol}")))
    }
}

fn finish_eval(function: &str, args: &EvalArgs, input_nnz: usize, report: &EvalReport, out: &mut impl Write) -> Result<()> {
    io::write_matrix_market(&report.result, &args.output)?;
    match &args.report {
        Some(path) => {
            let mut buf = Vec::new();
            write_summary(function, input_nnz, report, &mut buf).map_err(io_err)?;
            std::fs::write(path, buf).map_err(|e| Error::io(path, e))
        }
        None => write_summary(function, input_nnz, report, out).map_err(io_err),
    }
}

/// Runs a parsed command line. Tables and summaries go to `out`.
pub fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    let evaluator = Psscf::default();
    match &cli.command {
        Command::Exp(args) | Command::Cos(args) => {
            check_tol(args.tol)?;
            let (name, spec) = match cli.command {
                Command::Exp(_) => ("exp", FunctionSpec::exp()),
                _ => ("cos", FunctionSpec::cos()),
            };
            let a = io::read_matrix_market(&args.input)?;
            let report = evaluate_function(&evaluator, &spec, &a, args.tol)?;
            finish_eval(name, args, a.nnz(), &report, out)
        }
        Command::Poly(args) => {
            check_tol(args.eval.tol)?;
            let a = io::read_matrix_market(&args.eval.input)?;
            let coeffs = io::read_coefficients(&args.coeffs)?;
            let report = evaluator.evaluate_polynomial(&a, &coeffs, args.eval.tol)?;
            finish_eval("poly", &args.eval, a.nnz(), &report, out)
        }
        Command::Bench(args) => {
            let cfg = io::read_bench_config(&args.config)?;
            let rows = run_benchmark_with(&evaluator, &cfg)?;
            match &args.output {
                Some(path) => {
                    io::write_csv(&rows, path)?;
                    writeln!(out, "method,bandwidth,median_time_seconds,mean_sparsity,max_rel_error").map_err(io_err)?;
                    for s in summarize(&rows) {
                        writeln!(
                            out,
                            "{},{},{:e},{:e},{:e}",
                            s.method, s.bandwidth, s.median_time, s.mean_sparsity, s.max_rel_error
                        )
                        .map_err(io_err)?;
                    }
                }
                None => io::format_csv(&rows, out).map_err(io_err)?,
            }
            for r in rows.iter().filter(|r| r.note.is_some()) {
                eprintln!(
                    "warning: {} n={} bandwidth={} trial={}: {}",
                    r.method,
                    r.n,
                    r.bandwidth,
                    r.trial,
                    r.note.as_deref().unwrap_or_default()
                );
            }
            Ok(())
        }
        Command::Gen(args) => {
            let m = gen_banded(args.n, args.bandwidth, args.seed)?;
            io::write_matrix_market(&m, &args.output)
        }
    }
}
