//! Command-line front end for `blowup-core`.
//!
//! Every subcommand writes one JSON report (or a CSV table where the data is
//! tabular) to stdout or `--out`. Exit codes: 0 success, 1 validation failure
//! or unreadable input, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use blowup_core::blowup::{clean_check, QuotientCharts, Stratum};
use blowup_core::charts::{stereographic, stereographic_inv, theta, theta_inv, CompactPoint, PointOrRay};
use blowup_core::distance::{equivalence_scan, SamplerSpec, SmoothedDistanceSystem};
use blowup_core::lattice::{LatticeConfig, Semilattice};
use blowup_core::order::{check_admissible, generate_admissible_order, size_order, OrderedTuple};
use blowup_core::potential::{
    builtin_pair, rho2v_bound_scan, ClosedForm, Eigenpair, Gaussian, InverseSquarePotential, PotentialSpec,
    RadialExp,
};
use blowup_core::sampling::{log_uniform, random_unit_in, rng_from_seed};
use blowup_core::subspace::{AmbientSpace, Subspace, Vector};
use blowup_core::verify::{regularity_report, Quadrature, Verdict, Weight};
use blowup_core::GeomError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LADDER: &str = "1e-3,1e-4,1e-5,1e-6";

#[derive(Debug, Parser)]
#[command(name = "blowup", version, about = "Blow-up geometry of subspace semilattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Output {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChartAction {
    Roundtrip,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbedMode {
    Point,
    Ray,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build (and close) a semilattice, or check a family with `--check`.
    Lattice {
        #[arg(long)]
        config: PathBuf,
        /// Validate the listed family as is instead of closing it.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Generate or validate blow-up orders.
    Order {
        #[arg(long)]
        config: PathBuf,
        /// Order file to check for admissibility.
        #[arg(long)]
        validate: Option<PathBuf>,
        /// Exhaust the members inside this one first.
        #[arg(long)]
        prefer: Option<String>,
        /// Emit the size order instead of the generated one.
        #[arg(long)]
        size: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Chart checks.
    Chart {
        #[arg(value_enum)]
        action: ChartAction,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Image of a point, or the limit along a ray, in the quotient charts.
    Embed {
        #[arg(value_enum, default_value_t = EmbedMode::Point)]
        mode: EmbedMode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        dir: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Distances, factors t_Y, rho_F and delta_F at a point.
    Distance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        point: String,
        #[command(flatten)]
        output: Output,
    },
    /// rho_F / delta_F statistics over strata-concentrated samples.
    Equivalence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Clean-intersection check for every pair of strata of every member pair.
    CleanCheck {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Evaluate a potential and scan rho_F^2 V.
    Potential {
        #[arg(long)]
        config: PathBuf,
        /// Built-in potential; defaults to the config's `potential` entry.
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        point: Option<String>,
        /// Number of samples for the rho_F^2 V scan.
        #[arg(long)]
        scan: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Weighted Sobolev regularity report for an eigenpair.
    Verify {
        /// Lattice for an eigenpair file; built-ins carry their own.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `hydrogen`, `invsq:<gamma>` or a JSON eigenpair file.
        #[arg(long)]
        eigenpair: String,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        #[arg(long, default_value = "delta")]
        weight: String,
        /// Decreasing exclusion radii.
        #[arg(long, default_value = DEFAULT_LADDER)]
        eps: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A finished report: the JSON body, an optional CSV table, and whether the
/// checks it carries passed.
struct Report {
    body: Value,
    table: Option<(Vec<String>, Vec<Vec<String>>)>,
    ok: bool,
    message: Option<String>,
}

impl Report {
    fn new(body: Value) -> Self {
        Self {
            body,
            table: None,
            ok: true,
            message: None,
        }
    }
}

/// Runs the CLI with process stdio and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the CLI writing to the given streams; `argv[0]` is the program name.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let (output, result) = dispatch(cli.command);
    let report = match result {
        Ok(r) => r,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return 2;
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return 1;
        }
    };
    if let Err(e) = emit(&report, output, out) {
        let _ = writeln!(err, "error: {e}");
        return match e {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        };
    }
    if let Some(msg) = &report.message {
        let _ = writeln!(err, "{msg}");
    }
    if report.ok {
        0
    } else {
        1
    }
}

fn dispatch(command: Command) -> (Output, CliResult<Report>) {
    match command {
        Command::Lattice { config, check, output } => (output, cmd_lattice(&config, check)),
        Command::Order {
            config,
            validate,
            prefer,
            size,
            output,
        } => (output, cmd_order(&config, validate.as_deref(), prefer.as_deref(), size)),
        Command::Chart {
            action: ChartAction::Roundtrip,
            dim,
            samples,
            seed,
            output,
        } => (output, cmd_chart_roundtrip(dim, samples, seed)),
        Command::Embed {
            mode,
            config,
            point,
            base,
            dir,
            output,
        } => (output, cmd_embed(mode, &config, point, base, dir)),
        Command::Distance { config, point, output } => (output, cmd_distance(&config, &point)),
        Command::Equivalence {
            config,
            samples,
            seed,
            output,
        } => (output, cmd_equivalence(&config, samples, seed)),
        Command::CleanCheck { config, output } => (output, cmd_clean_check(&config)),
        Command::Potential {
            config,
            potential,
            point,
            scan,
            seed,
            output,
        } => (output, cmd_potential(&config, potential, point, scan, seed)),
        Command::Verify {
            config,
            eigenpair,
            max_order,
            weight,
            eps,
            seed,
            output,
        } => (
            output,
            cmd_verify(config.as_deref(), &eigenpair, max_order, &weight, &eps, seed),
        ),
    }
}

fn emit(report: &Report, output: Output, out: &mut dyn Write) -> CliResult<()> {
    let text = match output.format {
        Format::Json => {
            let mut body = report.body.clone();
            if let Value::Object(map) = &mut body {
                map.insert("schema_version".into(), json!(SCHEMA_VERSION));
            }
            let mut s = serde_json::to_string_pretty(&body).map_err(|e| CliError::Failure(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let (headers, rows) = report
                .table
                .as_ref()
                .ok_or_else(|| CliError::Usage("this subcommand has no CSV form".into()))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Failure(e.to_string());
            w.write_record(headers).map_err(io)?;
            for r in rows {
                w.write_record(r).map_err(io)?;
            }
            w.into_inner().map_err(|e| CliError::Failure(e.to_string()))?
        }
    };
    match output.out {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display()))),
        None => out
            .write_all(&text)
            .map_err(|e| CliError::Failure(e.to_string())),
    }
}

fn read_config(path: &Path) -> CliResult<LatticeConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Failure(format!("invalid config {}: {e}", path.display())))
}

fn load_lattice(path: &Path) -> CliResult<(LatticeConfig, Semilattice)> {
    let config = read_config(path)?;
    let f = config.build()?;
    Ok((config, f))
}

fn parse_point(text: &str, dim: usize) -> CliResult<Vector> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad coordinate `{s}`")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if values.len() != dim {
        return Err(CliError::Usage(format!(
            "expected {dim} coordinates, got {}",
            values.len()
        )));
    }
    Ok(Vector::from_vec(values))
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn cmd_lattice(path: &Path, check: bool) -> CliResult<Report> {
    let config = read_config(path)?;
    if check {
        let diagnostics = blowup_core::lattice::validate_family(&config.inputs()?)?;
        let ok = diagnostics.is_empty();
        let message = diagnostics.first().map(|d| format!("invalid semilattice: {d}"));
        let rows = diagnostics
            .iter()
            .map(|d| vec![d.to_string()])
            .collect();
        return Ok(Report {
            body: json!({ "command": "lattice", "check": true, "valid": ok, "diagnostics": diagnostics }),
            table: Some((vec!["diagnostic".into()], rows)),
            ok,
            message,
        });
    }
    let f = config.build()?;
    let members: Vec<Value> = f
        .members()
        .iter()
        .map(|m| {
            json!({
                "name": m.name,
                "dim": m.subspace.dim(),
                "basis": m.subspace.rows(),
            })
        })
        .collect();
    let rows = f
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| vec![i.to_string(), m.name.clone(), m.subspace.dim().to_string()])
        .collect();
    let mut r = Report::new(json!({
        "command": "lattice",
        "ambient_dim": f.ambient().dim(),
        "members": members,
        "hasse_edges": f.hasse_edges(),
        "diagnostics": f.validate()?,
    }));
    r.table = Some((vec!["index".into(), "name".into(), "dim".into()], rows));
    Ok(r)
}

fn cmd_order(path: &Path, validate: Option<&Path>, prefer: Option<&str>, size: bool) -> CliResult<Report> {
    let (_, f) = load_lattice(path)?;
    let (tuple, mode) = match validate {
        Some(file) => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", file.display())))?;
            (OrderedTuple::parse_order_file(&f, &text)?, "validate")
        }
        None if size => (size_order(&f), "size"),
        None => (generate_admissible_order(&f, prefer)?, "generate"),
    };
    let labels = tuple.labels(&f);
    let verdict = check_admissible(&f, &tuple);
    let rows = labels
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), l.clone()])
        .collect();
    let mut r = Report::new(json!({
        "command": "order",
        "mode": mode,
        "order": labels,
        "admissible": verdict.is_ok(),
        "violation": verdict.err(),
        "first_violation_index": verdict.err().map(|v| v.offending),
    }));
    if let Err(v) = verdict {
        r.ok = false;
        r.message = Some(format!("not admissible: first violation at index {} ({v})", v.offending));
    }
    r.table = Some((vec!["position".into(), "entry".into()], rows));
    Ok(r)
}

fn cmd_chart_roundtrip(dim: usize, samples: usize, seed: u64) -> CliResult<Report> {
    let ambient = AmbientSpace::new(dim)?;
    let full = Subspace::full(ambient);
    let sphere = Subspace::full(AmbientSpace::new(dim + 1)?);
    let mut rng = rng_from_seed(seed);
    let mut theta_err: f64 = 0.0;
    let mut stereo_err: f64 = 0.0;
    let mut stereo_skipped = 0usize;
    for _ in 0..samples {
        let r = log_uniform(&mut rng, 1e-6, 1e6);
        let x = random_unit_in(&mut rng, &full) * r;
        let back = match theta_inv(&theta(&x)?) {
            PointOrRay::Interior(v) => Vector::from_vec(v),
            PointOrRay::Ray(_) => return Err(CliError::Failure("finite point mapped to a ray".into())),
        };
        theta_err = theta_err.max((back - &x).norm() / x.norm().max(1.0));
        let p = random_unit_in(&mut rng, &sphere);
        if p[0] <= -0.999 {
            stereo_skipped += 1;
            continue;
        }
        let q = stereographic_inv(&stereographic(&p)?);
        stereo_err = stereo_err.max((q - &p).norm());
    }
    let ok = theta_err <= 1e-12 && stereo_err <= 1e-12;
    let mut r = Report::new(json!({
        "command": "chart roundtrip",
        "dim": dim,
        "samples": samples,
        "seed": seed,
        "max_theta_error": theta_err,
        "max_stereographic_error": stereo_err,
        "stereographic_skipped": stereo_skipped,
        "tolerance": 1e-12,
        "pass": ok,
    }));
    r.ok = ok;
    r.table = Some((
        vec!["dim".into(), "max_theta_error".into(), "max_stereographic_error".into()],
        vec![vec![dim.to_string(), fmt_f64(theta_err), fmt_f64(stereo_err)]],
    ));
    Ok(r)
}

#[derive(Serialize)]
struct Component {
    member: String,
    sphere: Vec<f64>,
    #[serde(flatten)]
    value: PointOrRay,
}

fn cmd_embed(
    mode: EmbedMode,
    path: &Path,
    point: Option<String>,
    base: Option<String>,
    dir: Option<String>,
) -> CliResult<Report> {
    let (_, f) = load_lattice(path)?;
    let n = f.ambient().dim();
    let charts = QuotientCharts::new(&f);
    let gv = match mode {
        EmbedMode::Point => {
            let p = point.ok_or_else(|| CliError::Usage("embed needs --point".into()))?;
            charts.embed(&parse_point(&p, n)?)?
        }
        EmbedMode::Ray => {
            let b = base.ok_or_else(|| CliError::Usage("embed ray needs --base".into()))?;
            let d = dir.ok_or_else(|| CliError::Usage("embed ray needs --dir".into()))?;
            charts.ray_limit(&parse_point(&b, n)?, &parse_point(&d, n)?)?
        }
    };
    let components: Vec<Component> = f
        .members()
        .iter()
        .zip(&gv.components)
        .map(|(m, c): (_, &CompactPoint)| Component {
            member: m.name.clone(),
            sphere: c.to_vec(),
            value: theta_inv(c),
        })
        .collect();
    let rows = components
        .iter()
        .map(|c| {
            let (kind, coords) = match &c.value {
                PointOrRay::Interior(v) => ("interior", v),
                PointOrRay::Ray(v) => ("ray", v),
            };
            vec![
                c.member.clone(),
                kind.to_string(),
                coords.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "),
            ]
        })
        .collect();
    let mut r = Report::new(json!({
        "command": "embed",
        "mode": match mode { EmbedMode::Point => "point", EmbedMode::Ray => "ray" },
        "components": components,
    }));
    r.table = Some((vec!["member".into(), "kind".into(), "coords".into()], rows));
    Ok(r)
}

fn cmd_distance(path: &Path, point: &str) -> CliResult<Report> {
    let (_, f) = load_lattice(path)?;
    let x = parse_point(point, f.ambient().dim())?;
    let e = SmoothedDistanceSystem::new(&f).evaluate(&x)?;
    let members: Vec<Value> = f
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| json!({ "member": m.name, "d": e.distances[i], "t": e.factors[i] }))
        .collect();
    let rows = f
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| vec![m.name.clone(), fmt_f64(e.distances[i]), fmt_f64(e.factors[i])])
        .collect();
    let mut r = Report::new(json!({
        "command": "distance",
        "point": x.as_slice(),
        "members": members,
        "delta_F": e.delta,
        "rho_F": e.rho,
    }));
    r.table = Some((vec!["member".into(), "d".into(), "t".into()], rows));
    Ok(r)
}

fn cmd_equivalence(path: &Path, samples: usize, seed: u64) -> CliResult<Report> {
    let (_, f) = load_lattice(path)?;
    let stats = equivalence_scan(&f, SamplerSpec { samples, seed })?;
    let h = &stats.histogram;
    let w = (h.log10_hi - h.log10_lo) / h.counts.len() as f64;
    let rows = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                fmt_f64(h.log10_lo + i as f64 * w),
                fmt_f64(h.log10_lo + (i + 1) as f64 * w),
                c.to_string(),
            ]
        })
        .collect();
    let mut body = serde_json::to_value(&stats).map_err(|e| CliError::Failure(e.to_string()))?;
    body["command"] = json!("equivalence");
    let mut r = Report::new(body);
    r.table = Some((vec!["log10_lo".into(), "log10_hi".into(), "count".into()], rows));
    Ok(r)
}

fn cmd_clean_check(path: &Path) -> CliResult<Report> {
    let (_, f) = load_lattice(path)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut all_clean = true;
    let nonzero: Vec<usize> = (0..f.len()).filter(|&i| !f.member(i).subspace.is_zero()).collect();
    for (a, &i) in nonzero.iter().enumerate() {
        for &j in &nonzero[a + 1..] {
            let y = &f.member(i);
            let z = &f.member(j);
            let strata = [
                (format!("closure({})", y.name), Stratum::closure(y.subspace.clone())),
                (format!("closure({})", z.name), Stratum::closure(z.subspace.clone())),
                (format!("sphere({})", y.name), Stratum::sphere(y.subspace.clone())),
                (format!("sphere({})", z.name), Stratum::sphere(z.subspace.clone())),
            ];
            for p in 0..4 {
                for q in p + 1..4 {
                    let (pn, ps) = &strata[p];
                    let (qn, qs) = &strata[q];
                    let (status, detail) = match clean_check(ps, qs, None) {
                        Ok(rep) => {
                            all_clean &= rep.clean;
                            let s = if rep.clean { "clean" } else { "not_clean" };
                            (s, serde_json::to_value(&rep).map_err(|e| CliError::Failure(e.to_string()))?)
                        }
                        Err(GeomError::EmptyIntersection) => ("disjoint", Value::Null),
                        Err(e) => return Err(e.into()),
                    };
                    rows.push(vec![pn.clone(), qn.clone(), status.to_string()]);
                    results.push(json!({ "p": pn, "q": qn, "status": status, "report": detail }));
                }
            }
        }
    }
    let mut r = Report::new(json!({
        "command": "clean-check",
        "pairs": results,
        "all_clean": all_clean,
    }));
    r.ok = all_clean;
    if !all_clean {
        r.message = Some("some strata do not intersect cleanly".into());
    }
    r.table = Some((vec!["p".into(), "q".into(), "status".into()], rows));
    Ok(r)
}

fn cmd_potential(
    path: &Path,
    potential: Option<String>,
    point: Option<String>,
    scan: Option<usize>,
    seed: u64,
) -> CliResult<Report> {
    let (config, f) = load_lattice(path)?;
    let spec = match (potential, &config.potential) {
        (Some(name), _) => PotentialSpec::Builtin(name),
        (None, Some(v)) => serde_json::from_value(v.clone())
            .map_err(|e| CliError::Failure(format!("invalid potential entry: {e}")))?,
        (None, None) => return Err(CliError::Usage("no potential given (use --potential or the config)".into())),
    };
    let n = f.ambient().dim();
    let v = spec.build(Arc::new(f))?;
    let value = point
        .map(|p| -> CliResult<Value> {
            let x = parse_point(&p, n)?;
            Ok(json!({ "point": x.as_slice(), "value": v.eval(&x)? }))
        })
        .transpose()?;
    let scan = scan.map(|s| rho2v_bound_scan(&v, s, seed)).transpose()?;
    let mut r = Report::new(json!({
        "command": "potential",
        "terms": v.to_specs(),
        "evaluation": value,
        "rho2v_scan": scan,
    }));
    if let Some(s) = &scan {
        r.ok = s.bounded;
        r.table = Some((
            vec!["samples".into(), "sup_half".into(), "sup".into(), "relative_change".into(), "bounded".into()],
            vec![vec![
                s.samples.to_string(),
                fmt_f64(s.sup_half),
                fmt_f64(s.sup),
                fmt_f64(s.relative_change),
                s.bounded.to_string(),
            ]],
        ));
    }
    Ok(r)
}

/// JSON eigenpair file: `{u: {radial: {gamma, kappa}} | {gaussian: {scale}}, lambda, potential}`.
fn load_pair_file(path: &Path, config: Option<&Path>) -> CliResult<Eigenpair> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Failure(format!("invalid eigenpair {}: {e}", path.display())))?;
    let f = match config {
        Some(c) => load_lattice(c)?.1,
        None => {
            let dim = v["dim"].as_u64().unwrap_or(3) as usize;
            Semilattice::closure(AmbientSpace::new(dim)?, Vec::new())?
        }
    };
    let n = f.ambient().dim();
    let bad = |what: &str| CliError::Failure(format!("eigenpair file: {what}"));
    let u: Arc<dyn ClosedForm> = if let Some(r) = v["u"].get("radial") {
        Arc::new(RadialExp {
            dim: n,
            gamma: r["gamma"].as_f64().unwrap_or(0.0),
            kappa: r["kappa"].as_f64().ok_or_else(|| bad("radial needs kappa"))?,
        })
    } else if let Some(g) = v["u"].get("gaussian") {
        Arc::new(Gaussian {
            dim: n,
            scale: g["scale"].as_f64().ok_or_else(|| bad("gaussian needs scale"))?,
        })
    } else {
        return Err(bad("`u` must be radial or gaussian"));
    };
    let lambda = v["lambda"].as_f64().ok_or_else(|| bad("missing lambda"))?;
    let f = Arc::new(f);
    let potential = match v.get("potential") {
        Some(p) => serde_json::from_value::<PotentialSpec>(p.clone())
            .map_err(|e| bad(&e.to_string()))?
            .build(f)?,
        None => InverseSquarePotential::zero(f),
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "eigenpair".into());
    Ok(Eigenpair::new(name, u, potential, lambda)?)
}

fn parse_ladder(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad ε `{s}`")))
        })
        .collect()
}

#[derive(Serialize)]
struct VerifyRecord<'a> {
    case: &'a str,
    alpha: &'a [u8],
    weight: Weight,
    eps: &'a [f64],
    estimates: &'a [f64],
    errors: &'a [f64],
    exponent: f64,
    relative_change: f64,
    verdict: Verdict,
    seed: u64,
}

fn cmd_verify(
    config: Option<&Path>,
    eigenpair: &str,
    max_order: usize,
    weight: &str,
    eps: &str,
    seed: u64,
) -> CliResult<Report> {
    let weight: Weight = weight.parse().map_err(|e: GeomError| CliError::Usage(e.to_string()))?;
    let ladder = parse_ladder(eps)?;
    if ladder.len() < 4 {
        return Err(CliError::Usage("--eps needs at least 4 rungs".into()));
    }
    let pair = if eigenpair.ends_with(".json") {
        load_pair_file(Path::new(eigenpair), config)?
    } else {
        builtin_pair(eigenpair)?
    };
    let quad = Quadrature::default_for(pair.lattice(), seed);
    let report = regularity_report(&pair, max_order, weight, &ladder, &quad)?;
    let records: Vec<VerifyRecord> = report
        .entries
        .iter()
        .map(|e| VerifyRecord {
            case: &report.case,
            alpha: &e.alpha,
            weight: e.weight,
            eps: &e.eps,
            estimates: &e.estimates,
            errors: &e.errors,
            exponent: e.exponent,
            relative_change: e.relative_change,
            verdict: e.verdict,
            seed,
        })
        .collect();
    let rows = report
        .entries
        .iter()
        .map(|e| {
            vec![
                report.case.clone(),
                e.alpha.iter().map(u8::to_string).collect::<Vec<_>>().join(" "),
                e.weight.name().to_string(),
                e.estimates.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "),
                fmt_f64(e.exponent),
                serde_json::to_value(e.verdict)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                seed.to_string(),
            ]
        })
        .collect();
    let mut r = Report::new(json!({
        "command": "verify",
        "case": report.case,
        "seed": seed,
        "max_order": max_order,
        "weight": weight,
        "eps": ladder,
        "radius": report.radius,
        "quadrature": report.quadrature,
        "nodes": report.nodes,
        "budget_exhausted": report.budget_exhausted,
        "weighted_all_finite": report.weighted_all_finite,
        "entries": records,
    }));
    r.ok = report.weighted_all_finite;
    if !r.ok {
        r.message = Some(format!("not every {}-weighted norm came out finite", weight.name()));
    }
    r.table = Some((
        ["case", "alpha", "weight", "estimates", "exponent", "verdict", "seed"]
            .map(String::from)
            .to_vec(),
        rows,
    ));
    Ok(r)
}
