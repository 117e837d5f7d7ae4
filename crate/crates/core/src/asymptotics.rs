//! Turns sweeps over `b` into measured blow-up scales, concentration points,
//! rescaled profiles and power-law fits, and checks them against the limit
//! laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field2D, GridSpec};
use crate::ground_state::GroundState;
use crate::limit_oracle::{e_bar_closed, energy_astar_coefficient, gap_limit, r_b, Regime};
use crate::minimizer::{multi_start, MinimizeConfig, MinimizerResult, Problem, SweepRun};
use crate::potential::{analyze_wells, WellAnalysis};

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b: f64,
    pub energy: f64,
    pub theta: f64,
    pub l4: f64,
    pub v_integral: f64,
    pub mu: f64,
    pub z_x: f64,
    pub z_y: f64,
    pub eps_meas: f64,
    pub eps_theory: f64,
    pub l2_dist: f64,
    pub h1_dist: f64,
    pub iters: usize,
    pub converged: bool,
    pub resolution_ok: bool,
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "b",
    "energy",
    "theta",
    "l4",
    "v_integral",
    "mu",
    "z_x",
    "z_y",
    "eps_meas",
    "eps_theory",
    "l2_dist",
    "h1_dist",
    "iters",
    "converged",
    "resolution_ok",
];

/// Rows ordered by decreasing `b`, plus per-row data that does not fit the
/// CSV (trial energies and decay constants) when it is available.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub trial_energies: Vec<Option<f64>>,
    pub decay_constants: Vec<Option<f64>>,
}

impl SweepResult {
    pub fn from_rows(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|x, y| y.b.total_cmp(&x.b));
        let n = rows.len();
        Self {
            rows,
            trial_energies: vec![None; n],
            decay_constants: vec![None; n],
        }
    }

    /// Measures every sweep point: `ε = θ^{-1/2}`, refined peak, distance of
    /// the rescaled profile to `Q/√a*`, and the decay constant.
    pub fn from_run(gs: &GroundState, run: &SweepRun) -> Result<Self> {
        let reference = reference_grid();
        let mut out = SweepResult::default();
        for pt in &run.points {
            let r = &pt.result;
            let m = measure_field(&r.field)?;
            let (l2, h1, decay) = match rescale_field(&r.field, m.eps_meas, m.z, &reference) {
                Ok(w) => {
                    let d = profile_distance(&w, gs);
                    (d.l2, d.h1, Some(decay_constant(&w.w)))
                }
                Err(_) => (f64::NAN, f64::NAN, None),
            };
            out.rows.push(SweepRow {
                b: pt.b,
                energy: r.energy(),
                theta: r.theta(),
                l4: r.field.l4(),
                v_integral: 2.0 * r.breakdown.potential,
                mu: r.mu,
                z_x: m.z[0],
                z_y: m.z[1],
                eps_meas: m.eps_meas,
                eps_theory: pt.eps_theory.unwrap_or(f64::NAN),
                l2_dist: l2,
                h1_dist: h1,
                iters: r.iterations,
                converged: r.converged,
                resolution_ok: pt.resolution_ok,
            });
            out.trial_energies.push(pt.trial_energy);
            out.decay_constants.push(decay);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupMeasurement {
    pub eps_meas: f64,
    /// Peak location refined below the grid spacing.
    pub z: [f64; 2],
    pub peak_value: f64,
}

/// `ε = θ^{-1/2}` and the peak refined by a quadratic fit on the 3×3
/// neighbourhood of the discrete maximum.
pub fn measure_field(u: &Field2D) -> Result<BlowupMeasurement> {
    let theta = u.theta();
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(
            "blow-up scale undefined for a field with zero gradient".into(),
        ));
    }
    let g = u.grid();
    let k = u.argmax();
    let (i, j) = (k % g.n, k / g.n);
    let mut z = g.point(k);
    let mut peak = u.values()[k];
    if i > 0 && j > 0 && i + 1 < g.n && j + 1 < g.n {
        let f = |di: isize, dj: isize| u.at((i as isize + di) as usize, (j as isize + dj) as usize);
        let gx = 0.5 * (f(1, 0) - f(-1, 0));
        let gy = 0.5 * (f(0, 1) - f(0, -1));
        let hxx = f(1, 0) - 2.0 * f(0, 0) + f(-1, 0);
        let hyy = f(0, 1) - 2.0 * f(0, 0) + f(0, -1);
        let hxy = 0.25 * (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1));
        let det = hxx * hyy - hxy * hxy;
        if hxx < 0.0 && det > 0.0 {
            let dx = (-(hyy * gx) + hxy * gy) / det;
            let dy = (hxy * gx - hxx * gy) / det;
            if dx.abs() <= 1.0 && dy.abs() <= 1.0 {
                let h = g.spacing();
                z = [z[0] + dx * h, z[1] + dy * h];
                peak += 0.5 * (gx * dx + gy * dy);
            }
        }
    }
    Ok(BlowupMeasurement {
        eps_meas: theta.powf(-0.5),
        z,
        peak_value: peak,
    })
}

/// [`measure_field`] for a solver result, which must have converged.
pub fn measure_blowup(result: &MinimizerResult) -> Result<BlowupMeasurement> {
    if !result.converged {
        return Err(Error::Contract(
            "blow-up measurement needs a converged minimizer".into(),
        ));
    }
    measure_field(&result.field)
}

/// `w(x) = ε·u(εx + z)` on a reference grid.
#[derive(Debug, Clone)]
pub struct RescaledProfile {
    pub w: Field2D,
    pub eps: f64,
    pub z: [f64; 2],
}

/// Half-width 10, spacing 0.1.
pub fn reference_grid() -> GridSpec {
    GridSpec::new(10.0, 201).expect("valid reference grid")
}

/// Resamples `ε·u(εx + z)` bilinearly onto `reference`.
pub fn rescale_field(
    u: &Field2D,
    eps: f64,
    z: [f64; 2],
    reference: &GridSpec,
) -> Result<RescaledProfile> {
    let h = u.grid().spacing();
    if !(eps > 0.0) || h > 0.5 * eps {
        return Err(Error::Accuracy(format!(
            "grid spacing {h:.4e} is too coarse for the scale {eps:.4e}"
        )));
    }
    let w = Field2D::from_fn(reference.clone(), |x, y| {
        eps * u.interpolate(eps * x + z[0], eps * y + z[1])
    });
    Ok(RescaledProfile { w, eps, z })
}

pub fn rescale_profile(result: &MinimizerResult, reference: &GridSpec) -> Result<RescaledProfile> {
    let m = measure_blowup(result)?;
    rescale_field(&result.field, m.eps_meas, m.z, reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistance {
    pub l2: f64,
    pub h1: f64,
}

/// `L²` and `H¹` distances from `w` to `Q/√a*` on the reference grid.
pub fn profile_distance(w: &RescaledProfile, gs: &GroundState) -> ProfileDistance {
    let grid = w.w.grid();
    let amp = 1.0 / gs.a_star().sqrt();
    let diff: Vec<f64> = {
        let q = Field2D::from_fn(grid.clone(), |x, y| {
            amp * gs.profile.value((x * x + y * y).sqrt())
        });
        w.w.values()
            .iter()
            .zip(q.values())
            .map(|(a, b)| a - b)
            .collect()
    };
    let d = Field2D::from_values_clamped(grid.clone(), diff).expect("finite difference field");
    let l2 = d.norm();
    ProfileDistance {
        l2,
        h1: (l2 * l2 + d.theta()).sqrt(),
    }
}

/// `max w(x)·e^{|x|/2}` over the annulus `4 ≤ |x| ≤ 8`.
pub fn decay_constant(w: &Field2D) -> f64 {
    let g = w.grid();
    let mut c: f64 = 0.0;
    for k in 0..g.len() {
        let p = g.point(k);
        let r = (p[0] - g.center[0]).hypot(p[1] - g.center[1]);
        if (4.0..=8.0).contains(&r) {
            c = c.max(w.values()[k] * (0.5 * r).exp());
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    SupercriticalEnergy,
    CriticalEnergy,
    Epsilon,
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "supercritical_energy" => Ok(FitMode::SupercriticalEnergy),
            "critical_energy" => Ok(FitMode::CriticalEnergy),
            "epsilon" => Ok(FitMode::Epsilon),
            other => Err(Error::InvalidInput(format!("unknown fit mode {other:?}"))),
        }
    }
}

/// Parameters that turn a fit into a comparison with theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitContext {
    pub a: f64,
    pub a_star: f64,
    pub p: Option<f64>,
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: FitMode,
    pub slope: f64,
    pub prefactor: f64,
    pub residual_rms: f64,
    pub n_points: usize,
    pub target_slope: Option<f64>,
    pub target_prefactor: Option<f64>,
}

pub const MIN_FIT_POINTS: usize = 3;

/// Least squares of `log|q|` against `log b` over converged, resolved rows:
/// `|q| ≈ prefactor·b^slope`.
pub fn fit_power_law(
    sweep: &SweepResult,
    mode: FitMode,
    ctx: Option<&FitContext>,
) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = sweep
        .rows
        .iter()
        .filter(|r| r.converged && r.resolution_ok)
        .map(|r| {
            let q = match mode {
                FitMode::SupercriticalEnergy | FitMode::CriticalEnergy => r.energy,
                FitMode::Epsilon => r.eps_meas,
            };
            (r.b, q)
        })
        .filter(|(b, q)| *b > 0.0 && q.is_finite() && *q != 0.0)
        .map(|(b, q)| (b.ln(), q.abs().ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: 1,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let (target_slope, target_prefactor) = match (mode, ctx) {
        (_, None) => (None, None),
        (FitMode::SupercriticalEnergy, Some(c)) => {
            let t = (c.a - c.a_star) / c.a_star;
            (Some(-1.0), Some(0.25 * t * t))
        }
        (FitMode::CriticalEnergy, Some(c)) => match (c.p, c.lambda0) {
            (Some(p), Some(l)) => (
                Some(p / (p + 4.0)),
                Some(energy_astar_coefficient(p, l, c.a_star)),
            ),
            _ => (None, None),
        },
        (FitMode::Epsilon, Some(c)) => match Regime::of(c.a, c.a_star) {
            Regime::Supercritical => (Some(0.5), Some((c.a_star / (c.a - c.a_star)).sqrt())),
            Regime::Critical => match (c.p, c.lambda0) {
                (Some(p), Some(l)) => (
                    Some(1.0 / (p + 4.0)),
                    Some((2.0 * c.a_star / (p * l)).powf(1.0 / (p + 4.0))),
                ),
                _ => (Some(f64::NAN), None),
            },
            Regime::Subcritical => (None, None),
        },
    };
    let target_slope = target_slope.filter(|s| s.is_finite());
    Ok(FitResult {
        mode,
        slope,
        prefactor: intercept.exp(),
        residual_rms,
        n_points: pts.len(),
        target_slope,
        target_prefactor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub measured: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    fn relative(name: &str, measured: f64, target: f64, tol: f64, resolved: bool) -> Self {
        let ok = ((measured - target) / target).abs() <= tol;
        let verdict = if !resolved || !measured.is_finite() {
            Verdict::Inconclusive
        } else if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Check {
            name: name.into(),
            verdict,
            measured: Some(measured),
            target: Some(target),
            tolerance: Some(tol),
            detail: format!(
                "relative deviation {:.3e}",
                ((measured - target) / target).abs()
            ),
        }
    }

    fn flag(name: &str, ok: bool, resolved: bool, detail: String) -> Self {
        let verdict = match (resolved, ok) {
            (false, _) => Verdict::Inconclusive,
            (true, true) => Verdict::Pass,
            (true, false) => Verdict::Fail,
        };
        Check {
            name: name.into(),
            verdict,
            measured: None,
            target: None,
            tolerance: None,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub a: f64,
    pub a_star: f64,
    pub regime: Regime,
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerances of the trend checks.
pub const SCALE_TOL: f64 = 0.05;
pub const MULTIPLIER_TOL: f64 = 0.05;
pub const DRIFT_TOL: f64 = 0.1;
pub const GAP_TOL: f64 = 0.2;
pub const SANDWICH_SLACK: f64 = 5e-3;
pub const DECAY_SPREAD: f64 = 2.0;

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// Per-row and trend checks of a sweep against the limit laws.
pub fn verify_limits(
    sweep: &SweepResult,
    a: f64,
    a_star: f64,
    analysis: Option<&WellAnalysis>,
) -> Result<DiagnosticsReport> {
    if sweep.rows.is_empty() {
        return Err(Error::InvalidInput("empty sweep".into()));
    }
    let regime = Regime::of(a, a_star);
    let mut checks = Vec::new();
    let rows = &sweep.rows;
    let resolved: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.converged && r.resolution_ok)
        .collect();
    let last = resolved.last().copied();
    let last_ok = last.is_some();
    let fallback = rows.last().expect("nonempty");
    let tail = last.unwrap_or(fallback);

    match regime {
        Regime::Supercritical => {
            let rb = r_b(a, tail.b, a_star).expect("supercritical");
            checks.push(Check::relative(
                "theta_over_rb",
                tail.theta / rb,
                1.0,
                SCALE_TOL,
                last_ok,
            ));
            checks.push(Check::relative(
                "l4_over_rb",
                tail.l4 / rb,
                2.0 / a_star,
                SCALE_TOL,
                last_ok,
            ));
            let gaps: Vec<f64> = resolved
                .iter()
                .map(|r| r.energy - e_bar_closed(a, r.b, a_star).expect("supercritical"))
                .collect();
            checks.push(Check::flag(
                "energy_gap_positive_decreasing",
                gaps.iter().all(|g| *g > 0.0) && non_increasing(&gaps),
                resolved.len() >= 2,
                format!("gaps {gaps:?}"),
            ));
            if let Some(an) = analysis {
                let gap = tail.energy - e_bar_closed(a, tail.b, a_star).expect("supercritical");
                let normalized = gap / tail.eps_theory.powf(an.p);
                checks.push(Check::relative(
                    "gap_law",
                    normalized,
                    gap_limit(an.lambda0, a_star),
                    GAP_TOL,
                    last_ok,
                ));
            }
        }
        Regime::Critical => {
            let energies: Vec<f64> = resolved.iter().map(|r| r.energy).collect();
            let thetas: Vec<f64> = resolved.iter().map(|r| -r.theta).collect();
            let kirchhoff: Vec<f64> = resolved.iter().map(|r| r.b * r.theta * r.theta).collect();
            let vint: Vec<f64> = resolved.iter().map(|r| r.v_integral).collect();
            let enough = resolved.len() >= 2;
            checks.push(Check::flag(
                "energy_to_zero",
                energies.iter().all(|e| *e > 0.0) && non_increasing(&energies),
                enough,
                format!("energies {energies:?}"),
            ));
            checks.push(Check::flag(
                "theta_growing",
                non_increasing(&thetas),
                enough,
                String::new(),
            ));
            checks.push(Check::flag(
                "kirchhoff_to_zero",
                non_increasing(&kirchhoff),
                enough,
                format!("b·θ² {kirchhoff:?}"),
            ));
            checks.push(Check::flag(
                "potential_to_zero",
                non_increasing(&vint),
                enough,
                format!("∫Vu² {vint:?}"),
            ));
            if let Some(an) = analysis {
                let coef = energy_astar_coefficient(an.p, an.lambda0, a_star);
                let measured = tail.energy / tail.b.powf(an.p / (an.p + 4.0));
                checks.push(Check::relative(
                    "critical_energy_prefactor",
                    measured,
                    coef,
                    0.15,
                    last_ok,
                ));
            }
        }
        Regime::Subcritical => {}
    }

    let eps: Vec<f64> = resolved.iter().map(|r| r.eps_meas).collect();
    checks.push(Check::flag(
        "eps_decreasing",
        eps.windows(2).all(|w| w[1] < w[0]),
        eps.len() >= 2,
        format!("eps_meas {eps:?}"),
    ));

    if regime != Regime::Subcritical {
        let target = -a / a_star;
        let measured = tail.mu * tail.eps_meas * tail.eps_meas;
        checks.push(Check::relative(
            "mu_eps2",
            measured,
            target,
            MULTIPLIER_TOL,
            last_ok,
        ));
        checks.push(Check::relative(
            "eps_ratio",
            tail.eps_meas / tail.eps_theory,
            1.0,
            0.1,
            last_ok,
        ));
    }

    if let Some(an) = analysis {
        let z = [tail.z_x, tail.z_y];
        let nearest = an
            .wells
            .iter()
            .min_by(|x, y| {
                let dx = (x.location[0] - z[0]).hypot(x.location[1] - z[1]);
                let dy = (y.location[0] - z[0]).hypot(y.location[1] - z[1]);
                dx.total_cmp(&dy)
            })
            .map(|w| w.index)
            .expect("analysis has wells");
        checks.push(Check::flag(
            "peak_at_flattest_well",
            an.z0.contains(&nearest),
            last_ok,
            format!("nearest well {nearest}, flattest {:?}", an.z0),
        ));
        let w = &an.wells[nearest];
        let drift = [
            (z[0] - w.location[0]) / tail.eps_theory - w.y_star[0],
            (z[1] - w.location[1]) / tail.eps_theory - w.y_star[1],
        ];
        let dn = drift[0].hypot(drift[1]);
        checks.push(Check {
            name: "peak_drift".into(),
            verdict: if !last_ok {
                Verdict::Inconclusive
            } else if dn <= DRIFT_TOL * w.y_star[0].hypot(w.y_star[1]).max(1.0) {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            measured: Some(dn),
            target: Some(0.0),
            tolerance: Some(DRIFT_TOL),
            detail: format!("|(z - x_i)/eps - y0| at b = {}", tail.b),
        });
    }

    let sandwich: Vec<(f64, f64, Option<f64>)> = rows
        .iter()
        .zip(&sweep.trial_energies)
        .filter(|(r, _)| r.converged)
        .filter_map(|(r, t)| e_bar_closed(a, r.b, a_star).map(|e| (r.energy, e, *t)))
        .collect();
    if !sandwich.is_empty() && regime != Regime::Subcritical {
        let ok = sandwich.iter().all(|&(e, lo, hi)| {
            e >= lo - SANDWICH_SLACK * lo.abs() && hi.is_none_or(|hi| e <= hi + 1e-9)
        });
        checks.push(Check::flag(
            "energy_sandwich",
            ok,
            true,
            format!("(e, e_bar, trial) {sandwich:?}"),
        ));
    }

    let decays: Vec<f64> = sweep.decay_constants.iter().flatten().copied().collect();
    if decays.len() >= 2 && decays.iter().all(|c| c.is_finite() && *c > 0.0) {
        let hi = decays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = decays.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: "rescaled_decay".into(),
            verdict: if hi / lo <= DECAY_SPREAD {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            measured: Some(hi / lo),
            target: Some(1.0),
            tolerance: Some(DECAY_SPREAD),
            detail: format!("C per row {decays:?}"),
        });
    } else {
        checks.push(Check::flag(
            "rescaled_decay",
            false,
            false,
            "no rescaled profiles available".into(),
        ));
    }

    let l2: Vec<f64> = resolved.iter().map(|r| r.l2_dist).collect();
    if l2.len() >= 2 && l2.iter().all(|d| d.is_finite()) {
        let trend = l2.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        checks.push(Check::flag(
            "profile_convergence",
            trend && *l2.last().expect("nonempty") <= 0.05,
            true,
            format!("l2 {l2:?}"),
        ));
    }

    Ok(DiagnosticsReport {
        a,
        a_star,
        regime,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UniquenessVerdict {
    Unique,
    Split,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub verdict: UniquenessVerdict,
    pub energy_spread: f64,
    pub peak_spread: f64,
    pub n_converged: usize,
    pub grid_spacing: f64,
}

pub const UNIQUE_ENERGY_TOL: f64 = 1e-6;

/// Multi-start probe of uniqueness. Needs a potential with a single
/// flattest well; otherwise the verdict is `NotApplicable`.
pub fn uniqueness_probe(
    gs: &GroundState,
    problem: &Problem,
    config: &MinimizeConfig,
    n_starts: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    if n_starts < 2 {
        return Err(Error::InvalidInput(format!(
            "a uniqueness probe needs at least 2 starts, got {n_starts}"
        )));
    }
    if !(problem.b > 0.0) {
        return Err(Error::InvalidInput("a uniqueness probe needs b > 0".into()));
    }
    let h = config.grid.spacing();
    let singleton = match &problem.potential {
        Some(v) => analyze_wells(v, &gs.profile)?.z0.len() == 1,
        None => false,
    };
    if !singleton {
        return Ok(UniquenessReport {
            verdict: UniquenessVerdict::NotApplicable,
            energy_spread: f64::NAN,
            peak_spread: f64::NAN,
            n_converged: 0,
            grid_spacing: h,
        });
    }
    let ms = multi_start(problem, config, n_starts, seed)?;
    let unique =
        ms.n_converged == n_starts && ms.energy_spread <= UNIQUE_ENERGY_TOL && ms.peak_spread <= h;
    Ok(UniquenessReport {
        verdict: if unique {
            UniquenessVerdict::Unique
        } else {
            UniquenessVerdict::Split
        },
        energy_spread: ms.energy_spread,
        peak_spread: ms.peak_spread,
        n_converged: ms.n_converged,
        grid_spacing: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_oracle::u_bar_field;
    use crate::minimizer::Init;
    use crate::potential::{PotentialSpec, WellSpec};
    use approx::assert_relative_eq;

    fn row(b: f64, energy: f64) -> SweepRow {
        SweepRow {
            b,
            energy,
            theta: 1.0,
            l4: 1.0,
            v_integral: 0.0,
            mu: -1.0,
            z_x: 0.0,
            z_y: 0.0,
            eps_meas: b.sqrt(),
            eps_theory: b.sqrt(),
            l2_dist: 0.0,
            h1_dist: 0.0,
            iters: 1,
            converged: true,
            resolution_ok: true,
        }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let s = SweepResult::from_rows(
            [0.2, 0.1, 0.05, 0.02]
                .iter()
                .map(|&b| row(b, 2.0 * b.powf(1.0 / 3.0)))
                .collect(),
        );
        let f = fit_power_law(&s, FitMode::CriticalEnergy, None).unwrap();
        assert!((f.slope - 1.0 / 3.0).abs() < 1e-12);
        assert!((f.prefactor - 2.0).abs() < 1e-12);
        assert!(f.residual_rms < 1e-12);
    }

    #[test]
    fn supercritical_law_targets() {
        let a_star = 11.7;
        let s = SweepResult::from_rows(
            [0.2, 0.1, 0.05]
                .iter()
                .map(|&b| row(b, -0.25 / b))
                .collect(),
        );
        let ctx = FitContext {
            a: 2.0 * a_star,
            a_star,
            p: None,
            lambda0: None,
        };
        let f = fit_power_law(&s, FitMode::SupercriticalEnergy, Some(&ctx)).unwrap();
        assert_relative_eq!(f.slope, -1.0, max_relative = 1e-12);
        assert_relative_eq!(f.prefactor, 0.25, max_relative = 1e-12);
        assert_eq!(f.target_prefactor, Some(0.25));
    }

    #[test]
    fn two_rows_are_insufficient() {
        let s = SweepResult::from_rows(vec![row(0.2, 1.0), row(0.1, 0.5)]);
        assert!(matches!(
            fit_power_law(&s, FitMode::Epsilon, None),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn unit_scale_reference_measurement() {
        let gs = GroundState::reference();
        let c = [0.37, -0.21];
        let grid = GridSpec::centered(10.0, 241, c).unwrap();
        let u = gs.sample_field(&grid, c, 1.0).unwrap().field;
        let m = measure_field(&u).unwrap();
        assert!((m.eps_meas - 1.0).abs() < 1e-3);
        let h = grid.spacing();
        assert!((m.z[0] - c[0]).hypot(m.z[1] - c[1]) < h / 10.0);
        let u2 = gs.sample_field(&grid, c, 2.0).unwrap().field;
        assert_relative_eq!(
            measure_field(&u2).unwrap().eps_meas,
            0.5,
            max_relative = 2e-3
        );
    }

    #[test]
    fn rescaled_u_bar_is_the_ground_state() {
        let gs = GroundState::reference();
        let (a, b) = (2.0 * gs.a_star(), 0.1);
        let eps = 0.1f64.sqrt();
        let grid = GridSpec::new(12.0 * eps, 256).unwrap();
        let u = u_bar_field(gs, a, b, &grid).unwrap().field;
        let m = measure_field(&u).unwrap();
        assert_relative_eq!(m.eps_meas, eps, max_relative = 1e-2);
        let w = rescale_field(&u, m.eps_meas, m.z, &reference_grid()).unwrap();
        assert_relative_eq!(w.w.mass(), 1.0, max_relative = 2e-2);
        assert!(profile_distance(&w, gs).l2 <= 2e-2);
    }

    #[test]
    fn rescaling_a_unit_field_is_nearly_identity() {
        let gs = GroundState::reference();
        let reference = reference_grid();
        let u = gs.sample_field(&reference, [0.0, 0.0], 1.0).unwrap().field;
        let w = rescale_field(&u, 1.0, [0.0, 0.0], &reference).unwrap();
        let d: f64 =
            w.w.values()
                .iter()
                .zip(u.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        assert!(d <= 1e-3);
        let dist = profile_distance(&w, gs);
        assert!(dist.l2 <= 1e-3 && dist.h1 <= 1e-3);
    }

    #[test]
    fn gaussian_is_far_from_the_ground_state() {
        let gs = GroundState::reference();
        let reference = reference_grid();
        let g = Init::Gaussian {
            center: [0.0, 0.0],
            sigma: 1.0,
        }
        .build(&reference)
        .unwrap();
        let w = RescaledProfile {
            w: g,
            eps: 1.0,
            z: [0.0, 0.0],
        };
        assert!(profile_distance(&w, gs).l2 > 0.1);
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let gs = GroundState::reference();
        let grid = GridSpec::new(4.0, 33).unwrap();
        let u = gs.sample_field(&grid, [0.0, 0.0], 1.0).unwrap().field;
        assert!(matches!(
            rescale_field(&u, 0.3, [0.0, 0.0], &reference_grid()),
            Err(Error::Accuracy(_))
        ));
    }

    #[test]
    fn probe_preconditions() {
        let gs = GroundState::reference();
        let config = MinimizeConfig::new(GridSpec::new(3.0, 64).unwrap());
        let twin = PotentialSpec::product(vec![
            WellSpec::isotropic([-1.0, 0.0], 2.0),
            WellSpec::isotropic([1.0, 0.0], 2.0),
        ]);
        let p = Problem::new(gs.a_star(), 1e-2, Some(twin));
        assert!(uniqueness_probe(gs, &p, &config, 1, 0).is_err());
        assert_eq!(
            uniqueness_probe(gs, &p, &config, 3, 0).unwrap().verdict,
            UniquenessVerdict::NotApplicable
        );
    }
}
