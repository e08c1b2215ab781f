//! `bidisc`: inspect inner functions, trace level sets, decide composition
//! operator boundedness and reproduce the worked examples.

mod job;
mod reproduce;
mod symbol;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bidisc::carleson::{CarlesonError, ScalingFit, MIN_SAMPLES};
use bidisc::levelset::{detect_lines, trace_coordinate, LevelSetError, LINE_SCAN};
use bidisc::poly::C64;
use bidisc::rif::{
    Coordinate, SINGULARITY_GRID, STABILITY_ANGULAR, STABILITY_RADIAL, STABILITY_TOL,
};
use bidisc::verdict::{decide, DecideOptions, SymbolPair, VerdictError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use job::JobConfig;

#[derive(Parser)]
#[command(
    name = "bidisc",
    version,
    about = "Composition operators on the bidisc induced by rational inner functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print bidegree, stability, singularities and exceptional values as JSON.
    Inspect {
        #[arg(allow_hyphen_values = true)]
        symbol: String,
        #[command(flatten)]
        common: Common,
    },
    /// Trace a unimodular level set and write `levelset.csv` and `levelset.json`.
    Levelset {
        #[arg(allow_hyphen_values = true)]
        symbol: String,
        /// Level value: `re,im`, a real, `i`, `-i` or `exp:<angle>`.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full analysis of a pair and write `verdict.json` plus ladder CSVs.
    Verdict {
        #[arg(allow_hyphen_values = true)]
        first: String,
        #[arg(allow_hyphen_values = true)]
        second: String,
        /// Weight exponents in (-1, 1); repeatable.
        #[arg(long, allow_hyphen_values = true, default_values_t = vec![0.0])]
        beta: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Rerun the worked examples and print a pass/fail table.
    ReproduceExamples {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(reproduce::CASES))]
        only: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 4096)]
    resolution: usize,
    /// Monte Carlo samples per box; accepts `1e6`.
    #[arg(long, default_value = "1e6", value_parser = parse_samples)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    /// Importance windows around the feature under test.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    window: Switch,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

fn parse_samples(s: &str) -> Result<usize, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(x.is_finite() && x >= MIN_SAMPLES as f64 && x.fract() == 0.0) {
        return Err(format!("expected a whole number of at least {MIN_SAMPLES}"));
    }
    Ok(x as usize)
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
    Acceptance,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Acceptance => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numerical = e.chain().any(|c| {
            if let Some(v) = c.downcast_ref::<VerdictError>() {
                return matches!(
                    v,
                    VerdictError::IncompleteAnalysis { .. } | VerdictError::Carleson(_)
                ) && !matches!(
                    v,
                    VerdictError::Carleson(
                        CarlesonError::BetaOutOfRange(_) | CarlesonError::TooFewSamples(_)
                    )
                );
            }
            if let Some(c) = c.downcast_ref::<CarlesonError>() {
                return matches!(
                    c,
                    CarlesonError::InsufficientLadder { .. }
                        | CarlesonError::InclusionViolated { .. }
                );
            }
            matches!(
                c.downcast_ref::<LevelSetError>(),
                Some(LevelSetError::RefineResolution { .. })
            )
        });
        if numerical {
            Failure::Numerical(e)
        } else {
            Failure::Input(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) => eprintln!("error: {e:#}"),
                Failure::Numerical(e) => eprintln!("numerical failure: {e:#}"),
                Failure::Acceptance => eprintln!("one or more checks failed"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Inspect { symbol, common } => inspect(&symbol, &common).map_err(Failure::from),
        Command::Levelset {
            symbol,
            alpha,
            common,
        } => levelset(&symbol, &alpha, &common).map_err(Failure::from),
        Command::Verdict {
            first,
            second,
            beta,
            common,
        } => verdict(&first, &second, beta, &common).map_err(Failure::from),
        Command::ReproduceExamples { only, common } => reproduce_examples(only, &common),
    }
}

fn job(
    command: &str,
    specs: &[&str],
    symbols: &[&symbol::Symbol],
    beta: Vec<f64>,
    c: &Common,
) -> JobConfig {
    JobConfig {
        command: command.into(),
        specs: specs.iter().map(|s| s.to_string()).collect(),
        symbols: symbols.iter().map(|s| s.resolved.clone()).collect(),
        beta,
        resolution: c.resolution,
        samples: c.samples,
        seed: c.seed,
        alpha: None,
        window: c.window == Switch::On,
        only: None,
        out: c.out.clone(),
    }
}

fn inspect(spec: &str, c: &Common) -> Result<()> {
    let sym = symbol::parse(spec)?;
    let job = job("inspect", &[spec], &[&sym], vec![], c);
    let lambda = sym.coordinate.lambda();
    let result = match &sym.coordinate {
        Coordinate::Rif { f, .. } => {
            let search = f.find_singularities(SINGULARITY_GRID);
            let singularities: Vec<_> = search
                .singularities
                .iter()
                .map(|s| {
                    let nt = f.nontangential_value(s.location);
                    json!({
                        "location": s.location,
                        "nontangential_value": s.nontangential_value * lambda,
                        "error_estimate": nt.error_estimate,
                        "converged": nt.converged,
                        "residual": s.residual,
                    })
                })
                .collect();
            let exceptional: Vec<_> = detect_lines(f, LINE_SCAN)
                .into_iter()
                .map(|l| json!({"tau": l.tau, "orientation": l.orientation, "alpha": l.alpha * lambda}))
                .collect();
            json!({
                "kind": "rif",
                "bidegree": f.bidegree(),
                "lambda": lambda,
                "denominator": f.denominator(),
                "numerator": f.numerator(),
                "stability": f.denominator().is_stable(STABILITY_ANGULAR, STABILITY_RADIAL, STABILITY_TOL),
                "singularities": singularities,
                "dropped_candidates": search.dropped,
                "exceptional_values": exceptional,
            })
        }
        Coordinate::Smooth { f, .. } => {
            let p = f.polynomial();
            json!({
                "kind": "smooth",
                "bidegree": p.bidegree(),
                "lambda": lambda,
                "polynomial": p,
                "boundary_contact": f.boundary_contact(),
                "singularities": [],
                "exceptional_values": [],
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&job.envelope(&result))?);
    Ok(())
}

fn levelset(spec: &str, alpha: &str, c: &Common) -> Result<()> {
    let sym = symbol::parse(spec)?;
    let alpha = symbol::parse_complex(alpha).context("--alpha")?;
    let mut job = job("levelset", &[spec], &[&sym], vec![], c);
    job.alpha = Some([alpha.re, alpha.im]);
    let ls = trace_coordinate(&sym.coordinate, alpha, c.resolution)?;

    let mut wtr = csv::Writer::from_writer(vec![]);
    wtr.write_record(["branch_id", "theta", "re_g", "im_g"])?;
    for (i, b) in ls.branches.iter().enumerate() {
        for s in &b.samples {
            wtr.write_record([i.to_string(), num(s.theta), num(s.g.re), num(s.g.im)])?;
        }
    }
    // A vertical line fixes theta and frees g; a horizontal one the reverse.
    for tau in &ls.vertical_lines {
        let theta = tau.arg().rem_euclid(std::f64::consts::TAU);
        wtr.write_record([
            format!("VLINE:{}", fmt_c(*tau)),
            num(theta),
            String::new(),
            String::new(),
        ])?;
    }
    for tau in &ls.horizontal_lines {
        wtr.write_record([
            format!("HLINE:{}", fmt_c(*tau)),
            String::new(),
            num(tau.re),
            num(tau.im),
        ])?;
    }
    let csv_path = job.write_csv("levelset.csv", wtr)?;
    let json_path = job.write_json("levelset.json", &ls)?;

    println!(
        "level set at alpha = {}: {} branches, {} vertical and {} horizontal lines, {} skipped angles",
        fmt_c(alpha),
        ls.branches.len(),
        ls.vertical_lines.len(),
        ls.horizontal_lines.len(),
        ls.skipped.len()
    );
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

/// Shortest round-trip decimal, with negative zero printed as `0`.
fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn fmt_c(z: C64) -> String {
    format!("{}{:+}i", z.re + 0.0, z.im + 0.0)
}

fn verdict(first: &str, second: &str, beta: Vec<f64>, c: &Common) -> Result<()> {
    for b in &beta {
        if !(*b > -1.0 && *b < 1.0) {
            bail!("--beta {b} outside (-1, 1)");
        }
    }
    let (s1, s2) = (symbol::parse(first)?, symbol::parse(second)?);
    let job = job("verdict", &[first, second], &[&s1, &s2], beta.clone(), c);
    let pair = SymbolPair::new(s1.coordinate.clone(), s2.coordinate.clone(), beta);
    let opts = DecideOptions {
        resolution: c.resolution,
        samples: c.samples,
        seed: c.seed,
        windowing: c.window == Switch::On,
        ..DecideOptions::default()
    };
    let v = decide(&pair, &opts)?;

    let mut written = vec![job.write_json("verdict.json", &v)?];
    for fit in &v.crosscheck {
        written.push(job.write_csv(&format!("ladder_beta_{}.csv", fit.beta), ladder_csv(fit)?)?);
    }
    if let Some(p) = &v.certificate.probe {
        for fit in &p.fits {
            written.push(job.write_csv(&format!("probe_beta_{}.csv", fit.beta), ladder_csv(fit)?)?);
        }
    }

    println!(
        "triggered rule: {}",
        serde_json::to_value(v.triggered_rule)?
            .as_str()
            .unwrap_or_default()
    );
    for b in &v.conclusion_per_beta {
        println!(
            "beta = {:>5}: {}{}",
            b.beta,
            serde_json::to_value(b.conclusion)?
                .as_str()
                .unwrap_or_default(),
            if b.experimental {
                " (experimental)"
            } else {
                ""
            }
        );
    }
    for fit in &v.crosscheck {
        println!(
            "crosscheck beta = {}: slope {:.4} +- {:.4} vs threshold {}",
            fit.beta, fit.slope, fit.slope_stderr, fit.threshold
        );
    }
    for w in written {
        println!("wrote {}", w.display());
    }
    Ok(())
}

fn ladder_csv(fit: &ScalingFit) -> Result<csv::Writer<Vec<u8>>> {
    let mut wtr = csv::Writer::from_writer(vec![]);
    wtr.write_record([
        "delta",
        "radius1",
        "radius2",
        "value",
        "stderr",
        "samples",
        "zero_hits",
    ])?;
    for r in &fit.rungs {
        wtr.write_record([
            num(r.delta),
            num(r.radii[0]),
            num(r.radii[1]),
            num(r.estimate.value),
            num(r.estimate.stderr),
            r.estimate.samples.to_string(),
            r.estimate.zero_hits.to_string(),
        ])?;
    }
    Ok(wtr)
}

fn reproduce_examples(only: Option<String>, c: &Common) -> Result<(), Failure> {
    let mut job = job("reproduce-examples", &[], &[], vec![0.0, -0.5], c);
    job.only = only.clone();
    let settings = reproduce::Settings {
        samples: c.samples,
        seed: c.seed,
        resolution: c.resolution,
        window: c.window == Switch::On,
    };
    let cases: Vec<&str> = match &only {
        Some(o) => vec![o.as_str()],
        None => reproduce::CASES.to_vec(),
    };
    let mut rows = Vec::new();
    for case in cases {
        rows.extend(reproduce::run(case, &settings)?);
    }

    let w = rows.iter().map(|r| r.check.len()).max().unwrap_or(0);
    println!(
        "{:<9} {:<w$}  {:<40} {:<20} result",
        "case", "check", "measured", "expected"
    );
    for r in &rows {
        println!(
            "{:<9} {:<w$}  {:<40} {:<20} {}",
            r.case,
            r.check,
            r.measured,
            r.expected,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let path = job.write_json("reproduce.json", &rows)?;
    println!("wrote {}", path.display());
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}
