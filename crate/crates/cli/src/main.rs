use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use homsum::classical::{classical_fourth_moment_formula, classical_moment_oracle};
use homsum::diagnostics::{analyze, CSV_HEADER};
use homsum::free::{free_fourth_moment, free_fourth_moment_oracle, free_moment_oracle};
use homsum::montecarlo::{estimate_moment, SamplerSpec};
use homsum::partition::GROUND_CAP;
use homsum::verify::{self, Scope, VerifyConfig};
use homsum::{FamilyId, Kernel, KernelFamily, Law, Mode, MomentReport, Regime};

#[derive(Parser)]
#[command(name = "homsum", version, about = "Exact fourth moments and cumulants of homogeneous sums")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Defaults to csv for `analyze` and json otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Classical,
    Free,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Classical => Regime::Classical,
            RegimeArg::Free => Regime::Free,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Randomized formula-vs-oracle suites; exit status 1 on any failure.
    Verify {
        #[arg(long, default_value = "all")]
        scope: String,
        /// Kernel degrees, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3])]
        d: Vec<usize>,
        /// Index ranges, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 4, 5])]
        n: Vec<usize>,
        /// Random kernels per (d, n).
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
    /// Fourth-cumulant sweep over a kernel family.
    Analyze {
        /// off-diagonal-pair, product, star or free-clt.
        family: String,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Range of n, e.g. `4..64` (inclusive) or a single value.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        law: Option<String>,
        #[arg(long, value_enum, default_value_t = RegimeArg::Classical)]
        regime: RegimeArg,
    },
    /// Moments of a kernel read from a JSON file.
    Moments {
        kernel: PathBuf,
        #[arg(long)]
        law: Option<String>,
        #[arg(long, value_enum, default_value_t = RegimeArg::Classical)]
        regime: RegimeArg,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4])]
        orders: Vec<usize>,
    },
    /// Monte Carlo estimate of a moment (classical regime only).
    Sample {
        kernel: PathBuf,
        /// A named sampler: gaussian, rademacher, two-point(a), mixture-t(q,a), product-tx(base,q,a).
        #[arg(long, default_value = "gaussian")]
        law: String,
        #[arg(long, value_enum, default_value_t = RegimeArg::Classical)]
        regime: RegimeArg,
        #[arg(long, default_value_t = 4)]
        order: u32,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
}

fn default_law(regime: Regime) -> &'static str {
    match regime {
        Regime::Classical => "gaussian",
        Regime::Free => "semicircle",
    }
}

fn parse_law(spec: Option<&str>, regime: Regime) -> Result<Law> {
    let spec = spec.unwrap_or(default_law(regime));
    Law::parse(spec, regime).with_context(|| format!("invalid law {spec:?}"))
}

fn parse_range(spec: &str) -> Result<Vec<usize>> {
    let parse = |s: &str| s.trim().parse::<usize>().with_context(|| format!("bad n value {s:?}"));
    let (lo, hi) = match spec.split_once("..") {
        Some((lo, hi)) => (parse(lo)?, parse(hi.trim_start_matches('='))?),
        None => {
            let v = parse(spec)?;
            (v, v)
        }
    };
    if lo > hi {
        bail!("empty n range {spec:?}");
    }
    Ok((lo..=hi).collect())
}

fn read_kernel(path: &Path, mode: Mode) -> Result<Kernel> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let f = Kernel::from_json(&text).with_context(|| format!("malformed kernel file {}", path.display()))?;
    Ok(if mode == Mode::Float { f.to_float() } else { f })
}

/// Writes through a temporary file in the target directory, then renames.
fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(body.as_bytes())?;
            tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    Ok(())
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json_text(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cmd_verify(g: &Global, mode: Mode, scope: &str, d: Vec<usize>, n: Vec<usize>, cases: usize) -> Result<ExitCode> {
    let scope: Scope = scope.parse()?;
    let config = VerifyConfig { scope, degrees: d, sizes: n, cases, seed: g.seed, mode };
    let report = verify::run(&config)?;
    let body = match g.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&report)?,
        Format::Csv => csv_text(
            &["check", "cases", "failures", "max_deviation"],
            report.checks.iter().map(|c| {
                vec![c.name.clone(), c.cases.to_string(), c.failures.to_string(), c.max_deviation.to_string()]
            }),
        )?,
    };
    emit(g.out.as_deref(), &body)?;
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verify: {} failing cases", report.failures());
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_analyze(g: &Global, mode: Mode, family: &str, d: usize, n: Option<&str>, law: Option<&str>, regime: Regime) -> Result<()> {
    let id: FamilyId = family.parse()?;
    let fam = KernelFamily::new(id, d)?;
    let ns = match n {
        Some(spec) => parse_range(spec)?,
        None => (fam.min_n().max(2)..=fam.min_n().max(2) + 14).collect(),
    };
    let law = parse_law(law, regime)?;
    let diag = analyze(&fam, &ns, &law, mode)?;
    let body = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_text(&CSV_HEADER, diag.rows.iter().map(|r| r.csv_record().to_vec()))?,
        Format::Json => json_text(&diag)?,
    };
    emit(g.out.as_deref(), &body)
}

fn moment_entry(order: usize, engine: &str, report: &MomentReport) -> Value {
    json!({ "order": order, "engine": engine, "report": report })
}

fn cmd_moments(g: &Global, mode: Mode, kernel: &Path, law: Option<&str>, regime: Regime, orders: &[usize]) -> Result<()> {
    let f = read_kernel(kernel, mode)?;
    let law = parse_law(law, regime)?;
    let fits = |order: usize| order * f.degree() <= GROUND_CAP;
    let mut entries = Vec::new();
    for &order in orders {
        if order == 0 {
            bail!("moment order must be positive");
        }
        match &law {
            Law::Classical(l) => {
                if order == 4 {
                    entries.push(moment_entry(order, "closed-form", &classical_fourth_moment_formula(&f, l)?));
                }
                if fits(order) {
                    entries.push(moment_entry(order, "oracle", &classical_moment_oracle(&f, l, order)?));
                }
            }
            Law::Free(l) => {
                if order == 4 {
                    entries.push(moment_entry(order, "closed-form", &free_fourth_moment(&f, l)?));
                }
                if fits(order) && order <= 4 {
                    let r = if order == 4 { free_fourth_moment_oracle(&f, l)? } else { free_moment_oracle(&f, l, order)? };
                    entries.push(moment_entry(order, "oracle", &r));
                }
            }
        }
    }
    if entries.is_empty() {
        bail!("no engine covers the requested orders {orders:?} for a degree {} kernel", f.degree());
    }
    let body = match g.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&json!({ "regime": regime_name(regime), "law": law.name(), "moments": entries }))?,
        Format::Csv => csv_text(
            &["order", "engine", "method", "value", "scaled_value", "exact"],
            entries.iter().map(|e| {
                let r = &e["report"];
                vec![
                    e["order"].to_string(),
                    e["engine"].as_str().unwrap_or_default().to_string(),
                    r["method"].as_str().unwrap_or_default().to_string(),
                    r["value"]["value"].to_string(),
                    r.get("scaled_value").map(|s| s["value"].to_string()).unwrap_or_default(),
                    r["value"]["exact"].as_str().unwrap_or_default().to_string(),
                ]
            }),
        )?,
    };
    emit(g.out.as_deref(), &body)
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::Classical => "classical",
        Regime::Free => "free",
    }
}

fn cmd_sample(g: &Global, kernel: &Path, law: &str, regime: Regime, order: u32, samples: u64) -> Result<()> {
    if regime == Regime::Free {
        bail!("sampling is supported for the classical regime only; free laws have no sampler");
    }
    let f = read_kernel(kernel, Mode::Float)?;
    let Law::Classical(law) = parse_law(Some(law), regime)? else { unreachable!("classical regime") };
    let spec = SamplerSpec::for_law(&law, g.seed, samples)?;
    let est = estimate_moment(&f, &spec, order)?;
    let body = match g.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&est)?,
        Format::Csv => csv_text(
            &["mean", "stderr", "n", "seed"],
            [vec![est.mean.to_string(), est.stderr.to_string(), est.n.to_string(), est.seed.to_string()]],
        )?,
    };
    emit(g.out.as_deref(), &body)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let mode = match g.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Float => Mode::Float,
    };
    match cli.command {
        Command::Verify { scope, d, n, cases } => return cmd_verify(g, mode, &scope, d, n, cases),
        Command::Analyze { family, d, n, law, regime } => {
            cmd_analyze(g, mode, &family, d, n.as_deref(), law.as_deref(), regime.into())?
        }
        Command::Moments { kernel, law, regime, orders } => {
            cmd_moments(g, mode, &kernel, law.as_deref(), regime.into(), &orders)?
        }
        Command::Sample { kernel, law, regime, order, samples } => {
            cmd_sample(g, &kernel, &law, regime.into(), order, samples)?
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
