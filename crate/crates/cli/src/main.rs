use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kirchhoff_core::asymptotics::{fit_power_law, verify_limits, FitContext, FitMode, SweepResult};
use kirchhoff_core::io::{
    fmt_f64, read_q_csv, read_sweep_csv, to_json, write_field_csv, write_q_csv, write_sweep_csv,
};
use kirchhoff_core::limit_oracle::oracle_report;
use kirchhoff_core::minimizer::{minimize, sweep_b, GridPolicy, SweepConfig};
use kirchhoff_core::potential::analyze_wells;
use kirchhoff_core::{
    Error, GridSpec, GroundState, Init, MinimizeConfig, PotentialSpec, Problem, WellAnalysis,
};

#[derive(Parser, Debug)]
#[command(
    name = "kirchhoff",
    about = "Normalized Kirchhoff minimizers and their small-b asymptotics",
    disable_version_flag = true
)]
struct Cli {
    /// Print the crate version and the hash of the ground-state constants in use.
    #[arg(long, global = true)]
    version: bool,
    /// Ground-state profile written by `q solve`; computed in-process when absent.
    #[arg(long, global = true, value_name = "Q_CSV")]
    q: Option<PathBuf>,
    /// Worker threads for parallel runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground state of -ΔQ + Q = Q³.
    #[command(subcommand)]
    Q(QCommand),
    /// Single minimization of the Kirchhoff energy.
    Minimize(MinimizeArgs),
    /// Minimizers along a decreasing list of b, written as sweep.csv.
    Sweep(SweepArgs),
    /// Power-law fit of a sweep.
    Fit(FitArgs),
    /// Limit diagnostics of a sweep.
    Report(ReportArgs),
    /// Closed-form limit values.
    Oracle(OracleArgs),
    /// Zeros of a potential, their degrees and the flattest well.
    Wells(WellsArgs),
}

#[derive(Subcommand, Debug)]
enum QCommand {
    Solve {
        #[arg(long, default_value_t = GroundState::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = GroundState::DEFAULT_R_MAX)]
        rmax: f64,
        #[arg(long, default_value_t = GroundState::DEFAULT_DR)]
        dr: f64,
        #[arg(long)]
        out: PathBuf,
        /// Constants JSON; defaults to the profile path with a `.json` extension.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run summary JSON.
    #[arg(long)]
    out: PathBuf,
    /// Final field as CSV, with a `.json` sidecar beside it.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Iteration log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Number, or a multiple of a* such as `astar` or `2astar`.
    #[arg(long)]
    a: String,
    #[arg(long)]
    potential: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    b: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Sweep configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid points per blow-up length.
    #[arg(long)]
    ppe: Option<f64>,
    /// Grid half-width in blow-up lengths.
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    max_n: Option<usize>,
    /// Per-row trial energies and decay constants, consumed by `report --diag`.
    #[arg(long)]
    diag: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    mode: FitMode,
    /// Enables theory targets.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    analysis: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    analysis: Option<PathBuf>,
    #[arg(long)]
    diag: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: f64,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    /// Takes p and λ₀ from the well analysis of this potential.
    #[arg(long)]
    potential: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WellsArgs {
    #[arg(long)]
    potential: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `minimize --config` file. Solver fields left out take the library defaults.
#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct MinimizeFile {
    a: AValue,
    b: f64,
    #[serde(default)]
    potential: Option<PotentialSpec>,
    grid: GridSpec,
    dt: Option<f64>,
    dt_max: Option<f64>,
    tol_energy: Option<f64>,
    tol_residual: Option<f64>,
    max_iter: Option<usize>,
    theta_max: Option<f64>,
    init: Option<Init>,
    accelerate: Option<bool>,
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
enum AValue {
    Number(f64),
    Text(String),
}

#[derive(Serialize)]
struct MinimizeSummary {
    a: f64,
    b: f64,
    energy: f64,
    kinetic: f64,
    potential: f64,
    kirchhoff: f64,
    interaction: f64,
    theta: f64,
    mu: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
    peak: [f64; 2],
    peak_value: f64,
    min_value: f64,
}

#[derive(Serialize, Deserialize)]
struct SweepDiag {
    b: Vec<f64>,
    trial_energies: Vec<Option<f64>>,
    decay_constants: Vec<Option<f64>>,
    warnings: Vec<Vec<String>>,
}

enum Failure {
    Usage(String),
    Core(Error),
    /// Outputs were written but the computation did not meet its criterion.
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if cli.version {
        let (hash, source) = constants_hash(cli.q.as_deref())?;
        println!("kirchhoff {}", env!("CARGO_PKG_VERSION"));
        println!("constants sha256 {hash} ({source})");
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Usage("no subcommand given; see --help".into()));
    };
    let q = cli.q.as_deref();
    match command {
        Command::Q(QCommand::Solve {
            tol,
            rmax,
            dr,
            out,
            constants,
        }) => {
            let gs = GroundState::compute(tol, rmax, dr)?;
            let json = to_json(&gs.constants)?;
            write_atomic(&out, &write_q_csv(&gs.profile))?;
            write_atomic(
                &constants.unwrap_or_else(|| out.with_extension("json")),
                &json,
            )?;
            print!("{json}");
        }
        Command::Wells(args) => {
            let gs = ground_state(q)?;
            let spec = read_potential(&args.potential)?;
            emit(
                args.out.as_deref(),
                &to_json(&analyze_wells(&spec, &gs.profile)?)?,
            )?;
        }
        Command::Oracle(args) => {
            let gs = ground_state(q)?;
            let a = parse_a(&args.a, gs.a_star())?;
            let (mut p, mut lambda0) = (args.p, args.lambda0);
            if let Some(path) = &args.potential {
                let an = analyze_wells(&read_potential(path)?, &gs.profile)?;
                p = p.or(Some(an.p));
                lambda0 = lambda0.or(Some(an.lambda0));
            }
            emit(
                args.out.as_deref(),
                &to_json(&oracle_report(a, args.b, p, lambda0, gs.a_star()))?,
            )?;
        }
        Command::Minimize(args) => minimize_cmd(q, args)?,
        Command::Sweep(args) => sweep_cmd(q, args)?,
        Command::Fit(args) => {
            let sweep = read_sweep_csv(&read_text(&args.input)?)?;
            let ctx = match &args.a {
                Some(a) => {
                    let gs = ground_state(q)?;
                    let analysis = args.analysis.as_deref().map(read_analysis).transpose()?;
                    Some(FitContext {
                        a: parse_a(a, gs.a_star())?,
                        a_star: gs.a_star(),
                        p: analysis.as_ref().map(|x| x.p),
                        lambda0: analysis.as_ref().map(|x| x.lambda0),
                    })
                }
                None => None,
            };
            emit(
                args.out.as_deref(),
                &to_json(&fit_power_law(&sweep, args.mode, ctx.as_ref())?)?,
            )?;
        }
        Command::Report(args) => {
            let gs = ground_state(q)?;
            let mut sweep = read_sweep_csv(&read_text(&args.input)?)?;
            if let Some(path) = &args.diag {
                attach_diag(
                    &mut sweep,
                    serde_json::from_str(&read_text(path)?)
                        .map_err(|e| Error::Parse(e.to_string()))?,
                )?;
            }
            let analysis = args.analysis.as_deref().map(read_analysis).transpose()?;
            let report = verify_limits(
                &sweep,
                parse_a(&args.a, gs.a_star())?,
                gs.a_star(),
                analysis.as_ref(),
            )?;
            for c in &report.checks {
                eprintln!("{:<32} {:?}", c.name, c.verdict);
            }
            emit(args.out.as_deref(), &to_json(&report)?)?;
        }
    }
    Ok(())
}

fn minimize_cmd(q: Option<&Path>, args: MinimizeArgs) -> CliResult<()> {
    let gs = ground_state(q)?;
    let file: MinimizeFile = serde_json::from_str(&read_text(&args.config)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", args.config.display())))?;
    let a = match &file.a {
        AValue::Number(x) => *x,
        AValue::Text(s) => parse_a(s, gs.a_star())?,
    };
    let mut config = MinimizeConfig::new(file.grid);
    config.dt = file.dt.unwrap_or(config.dt);
    config.dt_max = file.dt_max.unwrap_or(config.dt_max);
    config.tol_energy = file.tol_energy.unwrap_or(config.tol_energy);
    config.tol_residual = file.tol_residual.unwrap_or(config.tol_residual);
    config.max_iter = file.max_iter.unwrap_or(config.max_iter);
    config.theta_max = file.theta_max.unwrap_or(config.theta_max);
    config.accelerate = file.accelerate.unwrap_or(config.accelerate);
    if let Some(init) = file.init {
        config.init = init;
    }
    let problem = Problem::new(a, file.b, file.potential);
    let r = minimize(&problem, &config)?;
    let e = &r.breakdown;
    let summary = MinimizeSummary {
        a,
        b: file.b,
        energy: e.total,
        kinetic: e.kinetic,
        potential: e.potential,
        kirchhoff: e.kirchhoff,
        interaction: e.interaction,
        theta: r.theta(),
        mu: r.mu,
        iterations: r.iterations,
        converged: r.converged,
        residual: r.residual,
        peak: r.peak,
        peak_value: r.peak_value,
        min_value: r.min_value,
    };
    write_atomic(&args.out, &to_json(&summary)?)?;
    if let Some(path) = &args.field {
        let (values, sidecar) = write_field_csv(&r.field);
        write_atomic(path, &values)?;
        write_atomic(&path.with_extension("json"), &sidecar)?;
    }
    if let Some(path) = &args.log {
        let mut text = String::from("iter,energy,residual,dt,theta\n");
        for rec in &r.log {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.iter,
                fmt_f64(rec.energy),
                fmt_f64(rec.residual),
                fmt_f64(rec.dt),
                fmt_f64(rec.theta)
            ));
        }
        write_atomic(path, &text)?;
    }
    if !r.converged {
        return Err(Failure::Numerical(format!(
            "minimizer stopped after {} iterations ({:?}, residual {:.3e})",
            r.iterations, r.status, r.residual
        )));
    }
    Ok(())
}

fn sweep_cmd(q: Option<&Path>, args: SweepArgs) -> CliResult<()> {
    let gs = ground_state(q)?;
    let a = parse_a(&args.a, gs.a_star())?;
    let potential = args.potential.as_deref().map(read_potential).transpose()?;
    let mut config = match &args.config {
        Some(path) => serde_json::from_str::<SweepConfig>(&read_text(path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
        None => {
            let mut base = MinimizeConfig::new(GridSpec::new(4.0, 129)?);
            base.dt_max = 1e4;
            SweepConfig {
                base,
                grid_policy: GridPolicy::default(),
                dt_per_eps2: Some(0.1),
            }
        }
    };
    if args.ppe.is_some() || args.width.is_some() || args.max_n.is_some() {
        let (w0, p0, m0) = match config.grid_policy {
            GridPolicy::Adaptive {
                width_factor,
                points_per_eps,
                max_n,
            } => (width_factor, points_per_eps, max_n),
            GridPolicy::Fixed => (8.0, 12.0, 513),
        };
        config.grid_policy = GridPolicy::Adaptive {
            width_factor: args.width.unwrap_or(w0),
            points_per_eps: args.ppe.unwrap_or(p0),
            max_n: args.max_n.unwrap_or(m0),
        };
    }
    let problem = Problem::new(a, args.b[0], potential);
    let run = sweep_b(gs, &problem, &args.b, &config)?;
    let result = SweepResult::from_run(gs, &run)?;
    write_atomic(&args.out, &write_sweep_csv(&result))?;
    if let Some(path) = &args.diag {
        let diag = SweepDiag {
            b: result.rows.iter().map(|r| r.b).collect(),
            trial_energies: result.trial_energies.clone(),
            decay_constants: result.decay_constants.clone(),
            warnings: run.points.iter().map(|p| p.warnings.clone()).collect(),
        };
        write_atomic(path, &to_json(&diag)?)?;
    }
    for p in &run.points {
        for w in &p.warnings {
            eprintln!("b = {}: {w}", p.b);
        }
    }
    if let Some(e) = run.aborted {
        return Err(Failure::Core(e));
    }
    let stalled: Vec<f64> = result
        .rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.b)
        .collect();
    if !stalled.is_empty() {
        return Err(Failure::Numerical(format!(
            "not converged at b = {stalled:?}"
        )));
    }
    Ok(())
}

fn attach_diag(sweep: &mut SweepResult, diag: SweepDiag) -> CliResult<()> {
    if diag.b.len() != diag.trial_energies.len() || diag.b.len() != diag.decay_constants.len() {
        return Err(Failure::Usage(
            "diagnostics file has columns of different lengths".into(),
        ));
    }
    for (k, row) in sweep.rows.iter().enumerate() {
        if let Some(j) = diag.b.iter().position(|b| *b == row.b) {
            sweep.trial_energies[k] = diag.trial_energies[j];
            sweep.decay_constants[k] = diag.decay_constants[j];
        }
    }
    Ok(())
}

/// `12.3`, `astar`, `2astar`, `1.5astar`, `2*astar`.
fn parse_a(text: &str, a_star: f64) -> CliResult<f64> {
    let t = text.trim().to_ascii_lowercase();
    let a = match t.strip_suffix("astar") {
        Some(m) => {
            let m = m.trim_end_matches('*').trim();
            let k = if m.is_empty() {
                1.0
            } else {
                m.parse::<f64>()
                    .map_err(|_| Failure::Usage(format!("cannot read a = {text:?}")))?
            };
            k * a_star
        }
        None => t
            .parse::<f64>()
            .map_err(|_| Failure::Usage(format!("cannot read a = {text:?}")))?,
    };
    if !(a > 0.0) || !a.is_finite() {
        return Err(Failure::Usage(format!("a must be positive, got {text:?}")));
    }
    Ok(a)
}

fn ground_state(q: Option<&Path>) -> CliResult<&'static GroundState> {
    match q {
        None => Ok(GroundState::reference()),
        Some(path) => {
            let profile = read_q_csv(&read_text(path)?)?;
            Ok(Box::leak(Box::new(GroundState::from_profile(profile)?)))
        }
    }
}

fn constants_hash(q: Option<&Path>) -> CliResult<(String, String)> {
    let (bytes, source) = match q {
        Some(path) => (
            std::fs::read(path).map_err(|e| io_err(path, e))?,
            path.display().to_string(),
        ),
        None => (
            to_json(&GroundState::reference().constants)?.into_bytes(),
            "built-in".to_string(),
        ),
    };
    let digest = Sha256::digest(&bytes);
    Ok((digest.iter().map(|b| format!("{b:02x}")).collect(), source))
}

fn read_potential(path: &Path) -> CliResult<PotentialSpec> {
    Ok(PotentialSpec::from_json(&read_text(path)?)?)
}

fn read_analysis(path: &Path) -> CliResult<WellAnalysis> {
    Ok(WellAnalysis::from_json(&read_text(path)?)?)
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Core(Error::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes to a temporary file in the target directory, then renames it.
fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(text.as_bytes())
        .map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_literals() {
        let s = 11.7;
        assert!(matches!(parse_a("astar", s), Ok(x) if x == s));
        assert!(matches!(parse_a("2astar", s), Ok(x) if x == 2.0 * s));
        assert!(matches!(parse_a("1.5*astar", s), Ok(x) if x == 1.5 * s));
        assert!(matches!(parse_a("3.25", s), Ok(x) if x == 3.25));
        assert!(parse_a("-1", s).is_err());
        assert!(parse_a("twoastar", s).is_err());
    }
}
