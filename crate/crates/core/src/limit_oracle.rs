//! Closed-form limit energies, blow-up scales and cut-off trial states used
//! as analytic references for the solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{energy, EnergyBreakdown, Field2D, GridSpec};
use crate::ground_state::GroundState;
use crate::potential::{PotentialSpec, WellAnalysis};

/// Relative tolerance under which `a` is treated as equal to `a*`.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn of(a: f64, a_star: f64) -> Self {
        if (a - a_star).abs() <= CRITICAL_TOL * a_star {
            Regime::Critical
        } else if a < a_star {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }
}

/// `r_b = (a - a*)/(b·a*)`, the optimal `θ` of the potential-free problem.
pub fn r_b(a: f64, b: f64, a_star: f64) -> Option<f64> {
    (Regime::of(a, a_star) == Regime::Supercritical && b > 0.0).then(|| (a - a_star) / (b * a_star))
}

/// `h(r) = (b/4)r² - ((a - a*)/(2a*))·r`: the potential-free energy of a
/// Q-shaped field with `θ = r`.
pub fn h_quadratic(r: f64, a: f64, b: f64, a_star: f64) -> f64 {
    0.25 * b * r * r - 0.5 * (a - a_star) / a_star * r
}

/// Infimum of the potential-free functional: `-(1/4b)((a - a*)/a*)²` for
/// `a > a*`, zero at `a = a*`, and `None` below `a*`.
pub fn e_bar_closed(a: f64, b: f64, a_star: f64) -> Option<f64> {
    match Regime::of(a, a_star) {
        Regime::Subcritical => None,
        Regime::Critical => Some(0.0),
        Regime::Supercritical => {
            let t = (a - a_star) / a_star;
            Some(-t * t / (4.0 * b))
        }
    }
}

/// Blow-up scale: `(b·a*/(a - a*))^{1/2}` above `a*`,
/// `(2b·a*/(p·λ₀))^{1/(p+4)}` at `a*`, `None` below.
pub fn theory_epsilon(a: f64, b: f64, p: f64, lambda0: f64, a_star: f64) -> Option<f64> {
    if !(b > 0.0) {
        return None;
    }
    match Regime::of(a, a_star) {
        Regime::Subcritical => None,
        Regime::Supercritical => Some((b * a_star / (a - a_star)).sqrt()),
        Regime::Critical => (p > 0.0 && lambda0 > 0.0)
            .then(|| (2.0 * b * a_star / (p * lambda0)).powf(1.0 / (p + 4.0))),
    }
}

/// `((4+p)/(4p))·(pλ₀/(2a*))^{4/(p+4)}`.
pub fn energy_astar_coefficient(p: f64, lambda0: f64, a_star: f64) -> f64 {
    (4.0 + p) / (4.0 * p) * (p * lambda0 / (2.0 * a_star)).powf(4.0 / (p + 4.0))
}

/// Leading-order `e_{a*}(b)`: coefficient times `b^{p/(p+4)}`.
pub fn theory_energy_astar(b: f64, p: f64, lambda0: f64, a_star: f64) -> f64 {
    energy_astar_coefficient(p, lambda0, a_star) * b.powf(p / (p + 4.0))
}

/// Limit of `(e_a(b) - ē_a(b))/ε^p` for `a > a*`.
pub fn gap_limit(lambda0: f64, a_star: f64) -> f64 {
    lambda0 / (2.0 * a_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryScales {
    pub r_b: Option<f64>,
    pub epsilon: Option<f64>,
    pub e_closed: Option<f64>,
}

pub fn theory_scales(a: f64, b: f64, p: f64, lambda0: f64, a_star: f64) -> TheoryScales {
    let e_closed = match Regime::of(a, a_star) {
        Regime::Critical if p > 0.0 && lambda0 > 0.0 => {
            Some(theory_energy_astar(b, p, lambda0, a_star))
        }
        _ => e_bar_closed(a, b, a_star),
    };
    TheoryScales {
        r_b: r_b(a, b, a_star),
        epsilon: theory_epsilon(a, b, p, lambda0, a_star),
        e_closed,
    }
}

/// A field with its resolution diagnostics.
#[derive(Debug, Clone)]
pub struct OracleField {
    pub field: Field2D,
    /// `h ≤ ε/4` for the relevant length scale `ε`.
    pub resolution_ok: bool,
    pub coverage_ok: bool,
}

/// The potential-free minimizer `(r_b^{1/2}/√a*)·Q(r_b^{1/2}(x - c))`,
/// centered on the grid center.
pub fn u_bar_field(gs: &GroundState, a: f64, b: f64, grid: &GridSpec) -> Result<OracleField> {
    let rb = r_b(a, b, gs.a_star()).ok_or_else(|| {
        Error::InvalidInput(format!("u_bar needs a > a* and b > 0 (a = {a}, b = {b})"))
    })?;
    let s = rb.sqrt();
    let sampled = gs.sample_field(grid, grid.center, s)?;
    Ok(OracleField {
        field: sampled.field,
        resolution_ok: grid.spacing() <= 0.25 / s,
        coverage_ok: sampled.coverage_ok,
    })
}

/// `ξ(x)`: 1 for `|x| ≤ 1`, 0 for `|x| ≥ 2`, quintic smoothstep between.
pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

#[derive(Debug, Clone)]
pub struct TrialState {
    pub field: Field2D,
    pub energy: EnergyBreakdown,
    pub center: [f64; 2],
    /// Length scale of the trial profile (`1/τ` or `r_b^{-1/2}`).
    pub epsilon: f64,
    /// Normalization constant applied to the cut-off profile.
    pub amplitude: f64,
    pub resolution_ok: bool,
}

/// Cut-off, rescaled ground state placed at the selected well; its energy
/// bounds `e_a(b)` from above.
///
/// For `a = a*` the scale is `τ = (pλ₀/(2b·a*))^{1/(p+4)}` and the center
/// `x_{i₀} + y₀/τ`; for `a > a*` the scale is `r_b^{1/2}` and the center
/// `x_{i₀} + r_b^{-1/2}·y₀`. Without a potential the well is the grid center.
pub fn trial_upper_bound(
    gs: &GroundState,
    a: f64,
    b: f64,
    potential: Option<(&PotentialSpec, &WellAnalysis)>,
    grid: &GridSpec,
) -> Result<TrialState> {
    let a_star = gs.a_star();
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!(
            "trial state needs b > 0, got {b}"
        )));
    }
    let (well, y0, p, lambda0) = match potential {
        Some((_, an)) => {
            let (x, y) = an.selected();
            (x, y, an.p, an.lambda0)
        }
        None => (grid.center, [0.0, 0.0], 0.0, 0.0),
    };
    let tau = match Regime::of(a, a_star) {
        Regime::Supercritical => r_b(a, b, a_star).expect("supercritical").sqrt(),
        Regime::Critical => {
            if potential.is_none() {
                return Err(Error::InvalidInput(
                    "the critical trial state needs a potential".into(),
                ));
            }
            1.0 / theory_epsilon(a, b, p, lambda0, a_star).expect("critical with analysis")
        }
        Regime::Subcritical => {
            return Err(Error::InvalidInput(format!(
                "no trial state below a* (a = {a})"
            )));
        }
    };
    let center = [well[0] + y0[0] / tau, well[1] + y0[1] / tau];
    let amp = tau / a_star.sqrt();
    let raw = Field2D::from_fn(grid.clone(), |x, y| {
        let r = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
        amp * cutoff(r) * gs.profile.value(tau * r)
    });
    let mass = raw.mass();
    if !(mass > 0.0) {
        return Err(Error::InvalidInput(
            "trial state vanishes on the grid".into(),
        ));
    }
    let amplitude = 1.0 / mass.sqrt();
    let field = raw.scaled(amplitude);
    let sampled = potential.map(|(spec, _)| spec.sample(grid));
    let energy = energy(&field, a, b, sampled.as_ref());
    Ok(TrialState {
        field,
        energy,
        center,
        epsilon: 1.0 / tau,
        amplitude,
        resolution_ok: grid.spacing() <= 0.25 / tau,
    })
}

/// Every closed-form value for one `(a, b, p, λ₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub a: f64,
    pub b: f64,
    pub a_star: f64,
    pub regime: Regime,
    pub r_b: Option<f64>,
    pub e_bar: Option<f64>,
    pub epsilon: Option<f64>,
    pub energy_astar: Option<f64>,
    pub energy_astar_coefficient: Option<f64>,
    pub gap_limit: Option<f64>,
    pub p: Option<f64>,
    pub lambda0: Option<f64>,
}

pub fn oracle_report(
    a: f64,
    b: f64,
    p: Option<f64>,
    lambda0: Option<f64>,
    a_star: f64,
) -> OracleReport {
    let well = p.zip(lambda0);
    OracleReport {
        a,
        b,
        a_star,
        regime: Regime::of(a, a_star),
        r_b: r_b(a, b, a_star),
        e_bar: e_bar_closed(a, b, a_star),
        epsilon: match Regime::of(a, a_star) {
            Regime::Critical => well.and_then(|(p, l)| theory_epsilon(a, b, p, l, a_star)),
            _ => theory_epsilon(a, b, 0.0, 0.0, a_star),
        },
        energy_astar: well.map(|(p, l)| theory_energy_astar(b, p, l, a_star)),
        energy_astar_coefficient: well.map(|(p, l)| energy_astar_coefficient(p, l, a_star)),
        gap_limit: lambda0.map(|l| gap_limit(l, a_star)),
        p,
        lambda0,
    }
}
