//! `logconcave` command-line tool.
//!
//! Exit codes: 0 on success, 1 on invalid input (with a JSON error object on
//! the last line of stderr), 2 when fits fail to converge.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use logconcave::divergence::{self, DivergenceKind};
use logconcave::experiments::{self, RiskTable};
use logconcave::marshall::{marshall_runs, FStarDensity, MarshallSummary};
use logconcave::rng::rep_rng;
use logconcave::{fit_mle, Error, ExpSegmentSpec, FitOptions, NamedDensity, WeightedSample};
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, load_density, read_sample, Output};

#[derive(Parser)]
#[command(name = "logconcave", version, about = "Log-concave density estimation and rate experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format (default: json for fit and divergence, csv otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the log-concave MLE to a sample; writes the density JSON.
    Fit {
        /// Newline-separated sample (default: stdin).
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Where to write the diagnostics JSON (default: stderr).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Draw a sample from a density.
    Sample {
        /// Named density (e.g. `laplace:0,1`) or density JSON file.
        #[arg(long)]
        density: String,
        #[arg(long)]
        n: usize,
    },
    /// Distance between two densities.
    Divergence {
        #[arg(long)]
        kind: String,
        /// First density: named spec or JSON file. For dx_sq, the estimate.
        #[arg(long)]
        a: String,
        /// Second density. For dx_sq, the reference.
        #[arg(long)]
        b: String,
        /// Sample size for dks_n.
        #[arg(long)]
        n: Option<usize>,
        /// Sample file for dx_sq.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Compare the fit's CDF error with the empirical one over seeded samples.
    Marshall {
        /// One of the tilted-concave truths, e.g. `truncexp:1,0,2`.
        #[arg(long)]
        truth: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
    },
    /// Monte-Carlo risk table.
    Risk {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Append the explicit TV bound for this single-segment spec `alpha,s1,s2`.
        #[arg(long)]
        bound_spec: Option<String>,
    },
    /// Risk table plus the least-squares slope of log risk on log n.
    Rates {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Subtract (5/4) log log n from log risk before fitting.
        #[arg(long)]
        log_correction: bool,
        /// Fit an existing risk table (JSON from `risk --format json`) instead of simulating.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Explicit expected-TV bound for a single-segment exponential approximation.
    Bound {
        /// `alpha,s1,s2`; `inf`/`-inf` allowed for the ends.
        #[arg(long)]
        spec: String,
        /// Truth (default: the spec's own density).
        #[arg(long)]
        truth: Option<String>,
        /// Comma-separated sample sizes, each at least 5.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = FitOptions::default().characterization_tol)]
    tol: f64,
    #[arg(long, default_value_t = FitOptions::default().max_iterations)]
    max_iterations: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Named truth density.
    #[arg(long)]
    truth: Option<String>,
    /// Loss: tv, hellinger_sq, kl_sq, dx_sq, ks or dks_n.
    #[arg(long)]
    loss: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// JSON sweep definition; see README.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A sweep over truths and losses, read from `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    truths: Vec<String>,
    losses: Vec<String>,
    n: Vec<usize>,
    reps: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    log_correction: bool,
}

impl SweepArgs {
    fn resolve(&self, seed: u64) -> Result<(SweepConfig, u64), Error> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let cfg: SweepConfig = serde_json::from_str(&text)?;
            let seed = cfg.seed.unwrap_or(seed);
            return Ok((cfg, seed));
        }
        let missing = |what: &str| Error::InvalidParameter(format!("--{what} is required without --config"));
        let cfg = SweepConfig {
            truths: vec![self.truth.clone().ok_or_else(|| missing("truth"))?],
            losses: vec![self.loss.clone().ok_or_else(|| missing("loss"))?],
            n: if self.n.is_empty() { return Err(missing("n")) } else { self.n.clone() },
            reps: self.reps.ok_or_else(|| missing("reps"))?,
            seed: None,
            log_correction: false,
        };
        Ok((cfg, seed))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("{}", serde_json::json!({"error": "usage", "message": e.kind().to_string()}));
            return ExitCode::from(1);
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return fail(&Error::InvalidParameter(format!("thread pool: {e}")));
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let kind = match e {
        Error::InvalidDensity(_) => "invalid_density",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::InvalidSample(_) => "invalid_sample",
        Error::InvalidProbability(_) => "invalid_probability",
        Error::Domain(_) => "domain",
        Error::NotFStar(_) => "not_fstar",
        Error::NonConvergence { .. } => "non_convergence",
        Error::TooManyExclusions { .. } => "too_many_exclusions",
        Error::Parse(_) => "parse",
        Error::Json(_) => "json",
    };
    eprintln!("{}", serde_json::json!({"error": kind, "message": e.to_string()}));
    match e {
        Error::NonConvergence { .. } | Error::TooManyExclusions { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let g = cli.global;
    let out = Output::new(g.out.clone());
    let seed = g.seed;
    match cli.command {
        Command::Fit { input, diagnostics, solver } => {
            if g.format == Some(Format::Csv) {
                return Err(Error::InvalidParameter("fit writes JSON only".into()));
            }
            let opts = FitOptions { characterization_tol: solver.tol, max_iterations: solver.max_iterations, ..FitOptions::default() };
            let sample = WeightedSample::from_observations(&read_sample(input.as_deref())?)?;
            let (fit, code) = match fit_mle(&sample, &opts) {
                Ok(fit) => (fit, ExitCode::SUCCESS),
                Err(Error::NonConvergence { fit, .. }) => (*fit, ExitCode::from(2)),
                Err(e) => return Err(e),
            };
            out.write(&(serde_json::to_string_pretty(&fit.density)? + "\n"))?;
            let diag = serde_json::to_string_pretty(&fit.diagnostics())? + "\n";
            match diagnostics {
                Some(path) => Output::new(Some(path)).write(&diag)?,
                None => eprint!("{diag}"),
            }
            if code != ExitCode::SUCCESS {
                eprintln!("{}", serde_json::json!({"error": "non_convergence", "message": "fit did not certify; wrote the last iterate"}));
            }
            Ok(code)
        }
        Command::Sample { density, n } => {
            let d = load_density(&density)?;
            let x = d.sample(&mut rep_rng(seed, n, 0), n);
            let text: String = match g.format {
                Some(Format::Json) => serde_json::to_string(&x)? + "\n",
                _ => x.iter().map(|v| fmt_f64(*v) + "\n").collect(),
            };
            out.write(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Divergence { kind, a, b, n, input } => {
            let kind: DivergenceKind = kind.parse()?;
            let (fa, fb) = (load_density(&a)?, load_density(&b)?);
            let value = if kind == DivergenceKind::DxSq {
                let path = input.ok_or_else(|| Error::InvalidParameter("dx_sq needs --in".into()))?;
                let sample = WeightedSample::from_observations(&read_sample(Some(&path))?)?;
                divergence::dx_sq(fa.as_ref(), &sample, fb.as_ref())?
            } else {
                divergence::between(kind, fa.as_ref(), fb.as_ref(), n)?
            };
            let text = match g.format {
                Some(Format::Csv) => {
                    let method = serde_json::to_value(value.method)?;
                    format!("kind,value,method\n{},{},{}\n", serde_json::to_value(kind)?.as_str().unwrap_or(""), fmt_f64(value.value), method.as_str().unwrap_or(""))
                }
                _ => serde_json::to_string(&value)? + "\n",
            };
            out.write(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Marshall { truth, n, reps } => {
            let f0 = FStarDensity::new(truth.parse()?)?;
            let runs = marshall_runs(&f0, n, reps, seed, &FitOptions::default())?;
            let summary = runs.iter().fold(MarshallSummary::default(), |s, r| s.record(&r.report));
            let text = match g.format {
                Some(Format::Json) => serde_json::to_string_pretty(&serde_json::json!({"runs": runs, "summary": summary}))? + "\n",
                _ => {
                    let mut s = String::from("seed,kappa,rho,lhs,rhs,ratio,holds,h_touches_zero\n");
                    for r in &runs {
                        let p = &r.report;
                        s += &format!(
                            "{},{},{},{},{},{},{},{}\n",
                            r.seed,
                            fmt_f64(p.kappa),
                            fmt_f64(p.rho_kappa),
                            fmt_f64(p.lhs),
                            fmt_f64(p.rhs_base),
                            fmt_f64(p.ratio),
                            p.holds,
                            p.h_touches_zero
                        );
                    }
                    s
                }
            };
            out.write(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Risk { sweep, bound_spec } => {
            let (cfg, seed) = sweep.resolve(seed)?;
            let tables = risk_tables(&cfg, seed)?;
            let bound = match &bound_spec {
                Some(spec) => {
                    let spec: ExpSegmentSpec = parse_spec(spec)?;
                    let mut per_truth = Vec::new();
                    for t in &cfg.truths {
                        let truth: NamedDensity = t.parse()?;
                        let curve = experiments::tv_bound_curve(&spec, &truth, truth.fstar_gamma().is_some(), &sorted(&cfg.n))?;
                        per_truth.push(curve.points.iter().map(|p| p.bound).collect::<Vec<_>>());
                    }
                    Some(per_truth)
                }
                None => None,
            };
            let text = match g.format {
                Some(Format::Json) => serde_json::to_string_pretty(&tables)? + "\n",
                _ => {
                    let sweep = cfg.truths.len() * cfg.losses.len() > 1 || sweep.config.is_some();
                    let mut s = String::new();
                    if sweep {
                        s += "truth,loss,";
                    }
                    s += "n,reps,mean,stderr";
                    if bound.is_some() {
                        s += ",bound";
                    }
                    s += "\n";
                    for (ti, t) in tables.iter().enumerate() {
                        for (ri, r) in t.rows.iter().enumerate() {
                            if sweep {
                                s += &format!("{},{},", t.truth, loss_name(t.loss));
                            }
                            s += &format!("{},{},{},{}", r.n, r.reps, fmt_f64(r.mean), fmt_f64(r.stderr));
                            if let Some(b) = &bound {
                                s += &format!(",{}", fmt_f64(b[ti / cfg.losses.len()][ri]));
                            }
                            s += "\n";
                        }
                    }
                    s
                }
            };
            out.write(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Rates { sweep, log_correction, table } => {
            let (tables, corrected) = match table {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    let tables: Vec<RiskTable> = match serde_json::from_str::<Vec<RiskTable>>(&text) {
                        Ok(v) => v,
                        Err(_) => vec![serde_json::from_str::<RiskTable>(&text)?],
                    };
                    (tables, log_correction)
                }
                None => {
                    let (cfg, seed) = sweep.resolve(seed)?;
                    let corrected = log_correction || cfg.log_correction;
                    (risk_tables(&cfg, seed)?, corrected)
                }
            };
            let fits = tables.iter().map(|t| experiments::fit_rate(t, corrected)).collect::<Result<Vec<_>, _>>()?;
            let text = match g.format {
                Some(Format::Json) => {
                    let items: Vec<_> = tables.iter().zip(&fits).map(|(t, f)| serde_json::json!({"table": t, "fit": f})).collect();
                    serde_json::to_string_pretty(&items)? + "\n"
                }
                _ => {
                    let mut s = String::from("truth,loss,n,reps,mean,stderr\n");
                    for t in &tables {
                        for r in &t.rows {
                            s += &format!("{},{},{},{},{},{}\n", t.truth, loss_name(t.loss), r.n, r.reps, fmt_f64(r.mean), fmt_f64(r.stderr));
                        }
                    }
                    for (t, f) in tables.iter().zip(&fits) {
                        s += &format!(
                            "# {} {}: slope={} intercept={} slope_se={} mc_slope_se={} log_corrected={}\n",
                            t.truth,
                            loss_name(t.loss),
                            fmt_f64(f.slope),
                            fmt_f64(f.intercept),
                            fmt_f64(f.slope_se),
                            fmt_f64(f.mc_slope_se),
                            f.log_corrected
                        );
                    }
                    s
                }
            };
            out.write(&text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound { spec, truth, n } => {
            let spec = parse_spec(&spec)?;
            let truth: NamedDensity = match truth {
                Some(t) => t.parse()?,
                None => NamedDensity::new(logconcave::Family::F1(spec))?,
            };
            if n.is_empty() {
                return Err(Error::InvalidParameter("--n is required".into()));
            }
            let curve = experiments::tv_bound_curve(&spec, &truth, truth.fstar_gamma().is_some(), &n)?;
            let text = match g.format {
                Some(Format::Json) => serde_json::to_string_pretty(&curve)? + "\n",
                _ => {
                    let mut s = String::from("n,c_n,tv,dks_n,bound,fstar_bound\n");
                    for p in &curve.points {
                        s += &format!(
                            "{},{},{},{},{},{}\n",
                            p.n,
                            fmt_f64(p.c_n),
                            fmt_f64(p.tv),
                            fmt_f64(p.dks_n),
                            fmt_f64(p.bound),
                            p.fstar_bound.map(fmt_f64).unwrap_or_default()
                        );
                    }
                    s
                }
            };
            out.write(&text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn sorted(n: &[usize]) -> Vec<usize> {
    let mut v = n.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn loss_name(kind: DivergenceKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn parse_spec(s: &str) -> Result<ExpSegmentSpec, Error> {
    match format!("f1:{s}").parse::<NamedDensity>()?.family() {
        logconcave::Family::F1(spec) => Ok(spec),
        _ => unreachable!("f1 prefix always yields a single-segment spec"),
    }
}

fn risk_tables(cfg: &SweepConfig, seed: u64) -> Result<Vec<RiskTable>, Error> {
    let opts = FitOptions::default();
    let mut tables = Vec::new();
    for t in &cfg.truths {
        let truth: NamedDensity = t.parse()?;
        for l in &cfg.losses {
            let loss: DivergenceKind = l.parse()?;
            tables.push(experiments::mc_risk(&truth, t, loss, &cfg.n, cfg.reps, seed, &opts)?);
        }
    }
    Ok(tables)
}
