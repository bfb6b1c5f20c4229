use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use mpcorr::config::{ConfigBuilder, Kind};
use mpcorr::{record, report, Pool};

/// Numerical experiments on m-point correlations of alpha * n^theta mod 1.
///
/// Exit status: 0 when every certificate passes, 1 when one fails, 2 on error.
#[derive(Parser)]
#[command(name = "mpcorr", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// m-point correlation trend over an N list, with an iid control.
    Correlate(RunArgs),
    /// Moments of the counting function.
    Moments(RunArgs),
    /// Exact identities: partition, completed, dual, zero-pattern, bell.
    IdentityCheck(RunArgs),
    /// Window partition-of-unity and derivative certificates.
    Expsum(RunArgs),
    /// Transform residuals or derived constants.
    BprocessCheck(RunArgs),
    /// Off-diagonal exponent, Vandermonde inverse, van der Corput family.
    Offdiag(RunArgs),
    /// Correlation deviations over a theta x N grid.
    Sweep(RunArgs),
    /// Summarize stored records.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set eps=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for records.jsonl and CSV grids.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated list (several values only for `sweep`).
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated N values, at most 1e7.
    #[arg(long)]
    n: Option<String>,
    /// monomial, uniform or lattice (comma-separated).
    #[arg(long)]
    sequence: Option<String>,
    /// bspline or bump.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    control: Option<bool>,
    #[arg(long)]
    control_n: Option<String>,
    /// Seconds; a slower run fails its `time_limit` certificate.
    #[arg(long)]
    time_limit: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Record files; defaults to `<out>/records.jsonl`.
    records: Vec<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn build(kind: Kind, a: &RunArgs) -> anyhow::Result<mpcorr::ExperimentConfig> {
    let mut b = ConfigBuilder::new();
    if let Some(p) = &a.config {
        b = b.file(p)?;
        if let Some(k) = b.get("kind") {
            anyhow::ensure!(k == kind.as_str(), "config {} is for `{k}`, not `{kind}`", p.display());
        }
    }
    b = b.set("kind", kind.as_str())?;
    let fields = [
        ("name", a.name.clone()),
        ("check", a.check.clone()),
        ("alpha", a.alpha.clone()),
        ("theta", a.theta.clone()),
        ("m", a.m.clone()),
        ("n", a.n.clone()),
        ("sequence", a.sequence.clone()),
        ("family", a.family.clone()),
        ("radius", a.radius.clone()),
        ("samples", a.samples.clone()),
        ("control", a.control.map(|c| c.to_string())),
        ("control_n", a.control_n.clone()),
        ("time_limit", a.time_limit.clone()),
        ("seed", a.seed.map(|s| s.to_string())),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in fields {
        if let Some(v) = v {
            b = b.set(k, &v)?;
        }
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        b = b.set(k.trim(), v)?;
    }
    Ok(b.build()?)
}

fn run(kind: Kind, a: &RunArgs) -> anyhow::Result<bool> {
    let cfg = build(kind, a)?;
    let pool = Pool::new(a.threads)?;
    let rec = mpcorr::run(&cfg, &pool)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let sidecars = record::append(&dir, &rec)?;
    println!("{} [{}] config {} on {} worker(s), {:.2} s", rec.name, rec.kind, rec.hash12(), rec.workers, rec.runtime_ms / 1e3);
    for (k, ok) in &rec.certificates {
        println!("  {} {k}", if *ok { "ok  " } else { "FAIL" });
    }
    for d in &rec.diagnostics {
        println!("  note: {d}");
    }
    println!("record appended to {}", dir.join(record::RECORDS_FILE).display());
    for p in sidecars {
        println!("grid {}", p.display());
    }
    Ok(rec.pass)
}

fn report_cmd(a: &ReportArgs) -> anyhow::Result<bool> {
    let files = if a.records.is_empty() { vec![a.out.join(record::RECORDS_FILE)] } else { a.records.clone() };
    let mut recs = Vec::new();
    for f in &files {
        recs.extend(record::read(f)?);
    }
    let rep = report::report(&recs)?;
    for p in report::write(&a.out, &rep)? {
        println!("wrote {}", p.display());
    }
    print!("{}", rep.markdown);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Correlate(a) => run(Kind::Correlate, a),
        Cmd::Moments(a) => run(Kind::Moments, a),
        Cmd::IdentityCheck(a) => run(Kind::IdentityCheck, a),
        Cmd::Expsum(a) => run(Kind::Expsum, a),
        Cmd::BprocessCheck(a) => run(Kind::BprocessCheck, a),
        Cmd::Offdiag(a) => run(Kind::Offdiag, a),
        Cmd::Sweep(a) => run(Kind::Sweep, a),
        Cmd::Report(a) => report_cmd(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
