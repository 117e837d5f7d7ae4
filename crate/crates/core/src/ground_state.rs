//! Radial ground state of `-ΔQ + Q = Q³` in the plane.
//!
//! The profile is found by shooting on `Q(0)`: too large an initial value
//! makes the trajectory cross zero, too small makes it turn back towards the
//! constant solution `Q ≡ 1`. Bisection between the two behaviours converges
//! onto the separatrix, which is the positive decaying solution.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field2D, GridSpec};

/// Largest accepted radial step.
pub const MAX_STEP: f64 = 0.05;
/// Initial bisection bracket on `Q(0)`.
pub const BRACKET: (f64, f64) = (1.0, 5.0);
/// A trace whose value falls below this floor while still decreasing is
/// classified as decayed.
pub const DECAY_FLOOR: f64 = 1e-5;
/// Relative tolerance for the `∫|∇Q|² = ∫Q² = ½∫Q⁴` identity checks.
pub const IDENTITY_TOL: f64 = 1e-3;

/// Radius window on which the exponential tail is fitted.
const TAIL_FIT_WINDOW: (f64, f64) = (8.0, 14.0);
/// Relative disagreement between the two bracket traces beyond which the
/// midpoint trace is no longer trusted.
const BRACKET_AGREEMENT: f64 = 1e-3;

/// How a single shooting trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShootingOutcome {
    /// `Q` reached zero at radius `r`: the initial value was too large.
    CrossedZero { r: f64 },
    /// `Q'` became positive at radius `r` while `Q > 0`: the initial value
    /// was too small.
    TurnedBack { r: f64 },
    /// Non-finite values appeared at radius `r`.
    Diverged { r: f64 },
    /// `Q` fell below [`DECAY_FLOOR`] while monotonically decreasing.
    Decayed,
    /// Reached `r_max` without decaying, crossing or turning (the constant
    /// solution `Q ≡ 1` is the only way to get here).
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Under,
    Over,
}

/// Samples of one shooting trajectory on a uniform radial grid.
#[derive(Debug, Clone)]
pub struct ShootingTrace {
    pub q0: f64,
    pub dr: f64,
    pub r_grid: Vec<f64>,
    pub q_values: Vec<f64>,
    pub dq_values: Vec<f64>,
    pub outcome: ShootingOutcome,
}

impl ShootingTrace {
    pub fn last_value(&self) -> f64 {
        *self
            .q_values
            .last()
            .expect("trace has at least the origin sample")
    }

    fn side(&self) -> Side {
        match self.outcome {
            ShootingOutcome::CrossedZero { .. } | ShootingOutcome::Diverged { .. } => Side::Over,
            ShootingOutcome::TurnedBack { .. } | ShootingOutcome::Stalled => Side::Under,
            ShootingOutcome::Decayed => {
                // The growing mode e^{r} has Q + Q' > 0, the decaying one Q + Q' ≈ 0⁻.
                let n = self.q_values.len() - 1;
                if self.q_values[n] + self.dq_values[n] > 0.0 {
                    Side::Under
                } else {
                    Side::Over
                }
            }
        }
    }
}

#[inline]
fn radial_rhs(r: f64, q: f64, dq: f64) -> (f64, f64) {
    let source = q - q * q * q;
    if r == 0.0 {
        // Q'/r -> Q''(0) at the origin, so Q''(0) = (Q(0) - Q(0)³)/2.
        (dq, 0.5 * source)
    } else {
        (dq, source - dq / r)
    }
}

#[inline]
fn rk4_step(r: f64, q: f64, dq: f64, h: f64) -> (f64, f64) {
    let (k1q, k1p) = radial_rhs(r, q, dq);
    let (k2q, k2p) = radial_rhs(r + 0.5 * h, q + 0.5 * h * k1q, dq + 0.5 * h * k1p);
    let (k3q, k3p) = radial_rhs(r + 0.5 * h, q + 0.5 * h * k2q, dq + 0.5 * h * k2p);
    let (k4q, k4p) = radial_rhs(r + h, q + h * k3q, dq + h * k3p);
    (
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        dq + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

fn validate_shooting(q0: f64, r_max: f64, dr: f64) -> Result<()> {
    if !(q0 > 0.0) || !q0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "q0 must be positive, got {q0}"
        )));
    }
    if !(dr > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dr must be positive, got {dr}"
        )));
    }
    if dr > MAX_STEP {
        return Err(Error::InvalidInput(format!(
            "dr = {dr} exceeds the maximum step {MAX_STEP}"
        )));
    }
    if !(r_max >= 10.0) || !r_max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "r_max must be at least 10, got {r_max}"
        )));
    }
    Ok(())
}

fn integrate(q0: f64, r_max: f64, dr: f64, stop_on_decay: bool) -> ShootingTrace {
    let steps = (r_max / dr).round() as usize;
    let mut r_grid = Vec::with_capacity(steps + 1);
    let mut q_values = Vec::with_capacity(steps + 1);
    let mut dq_values = Vec::with_capacity(steps + 1);
    r_grid.push(0.0);
    q_values.push(q0);
    dq_values.push(0.0);

    let (mut q, mut dq) = (q0, 0.0);
    let mut outcome = ShootingOutcome::Stalled;
    for i in 0..steps {
        let r = i as f64 * dr;
        let (nq, ndq) = rk4_step(r, q, dq, dr);
        let r_next = (i + 1) as f64 * dr;
        if !nq.is_finite() || !ndq.is_finite() {
            outcome = ShootingOutcome::Diverged { r: r_next };
            break;
        }
        q = nq;
        dq = ndq;
        r_grid.push(r_next);
        q_values.push(q);
        dq_values.push(dq);
        if q <= 0.0 {
            outcome = ShootingOutcome::CrossedZero { r: r_next };
            break;
        }
        if dq > 0.0 {
            outcome = ShootingOutcome::TurnedBack { r: r_next };
            break;
        }
        if stop_on_decay && q < DECAY_FLOOR {
            outcome = ShootingOutcome::Decayed;
            break;
        }
    }
    if outcome == ShootingOutcome::Stalled && q < DECAY_FLOOR {
        outcome = ShootingOutcome::Decayed;
    }
    ShootingTrace {
        q0,
        dr,
        r_grid,
        q_values,
        dq_values,
        outcome,
    }
}

/// Integrates the radial ODE `Q'' + Q'/r = Q - Q³` from `Q(0) = q0`,
/// `Q'(0) = 0` with classical RK4 and classifies the trajectory.
pub fn integrate_radial(q0: f64, r_max: f64, dr: f64) -> Result<ShootingTrace> {
    validate_shooting(q0, r_max, dr)?;
    Ok(integrate(q0, r_max, dr, true))
}

/// Sampled ground state with monotone cubic interpolation and a fitted
/// `c·r^{-1/2}·e^{-r}` tail beyond the last trusted sample.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    dr: f64,
    q_values: Vec<f64>,
    dq_values: Vec<f64>,
    /// Hermite slopes after monotonicity limiting.
    slopes: Vec<f64>,
    q0_star: f64,
    tail_prefactor: f64,
    decay_rate: f64,
}

impl RadialProfile {
    /// Builds a profile from uniformly spaced samples starting at `r = 0`.
    pub fn from_samples(r: &[f64], q: &[f64], dq: &[f64]) -> Result<Self> {
        if r.len() != q.len() || r.len() != dq.len() {
            return Err(Error::InvalidInput(
                "sample columns differ in length".into(),
            ));
        }
        if r.len() < 16 {
            return Err(Error::InvalidInput("too few profile samples".into()));
        }
        if r[0].abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "profile samples must start at r = 0".into(),
            ));
        }
        let dr = r[1] - r[0];
        if !(dr > 0.0) || dr > MAX_STEP {
            return Err(Error::InvalidInput(format!("invalid profile spacing {dr}")));
        }
        for (i, &ri) in r.iter().enumerate() {
            if (ri - i as f64 * dr).abs() > 1e-6 * dr.max(1e-3) * (i as f64 + 1.0) {
                return Err(Error::InvalidInput(
                    "profile samples are not uniformly spaced".into(),
                ));
            }
        }
        for w in q.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Accuracy("profile is not strictly decreasing".into()));
            }
        }
        if q.iter().chain(dq.iter()).any(|v| !v.is_finite()) || *q.last().unwrap() <= 0.0 {
            return Err(Error::Accuracy(
                "profile has non-positive or non-finite samples".into(),
            ));
        }

        let r_end = (q.len() - 1) as f64 * dr;
        let (lo, hi) = (TAIL_FIT_WINDOW.0, TAIL_FIT_WINDOW.1.min(r_end));
        if hi - lo < 0.5 {
            return Err(Error::Accuracy(format!(
                "trusted profile ends at r = {r_end:.3}, too short to fit the tail on [{lo}, {}]",
                TAIL_FIT_WINDOW.1
            )));
        }
        // Least squares of ln(Q·√r) against r on the fit window.
        let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &qi) in q.iter().enumerate() {
            let ri = i as f64 * dr;
            if ri >= lo && ri <= hi {
                let y = (qi * ri.sqrt()).ln();
                sx += ri;
                sy += y;
                sxx += ri * ri;
                sxy += ri * y;
                m += 1.0;
            }
        }
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let decay_rate = -slope;
        // Continuous hand-off to the asymptotic tail at the last sample.
        let q_end = *q.last().unwrap();
        let tail_prefactor = q_end * r_end.sqrt() * r_end.exp();

        let slopes = monotone_slopes(q, dq, dr);
        Ok(Self {
            dr,
            q_values: q.to_vec(),
            dq_values: dq.to_vec(),
            slopes,
            q0_star: q[0],
            tail_prefactor,
            decay_rate,
        })
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn q0_star(&self) -> f64 {
        self.q0_star
    }

    /// Last radius backed by integrated samples.
    pub fn r_end(&self) -> f64 {
        (self.q_values.len() - 1) as f64 * self.dr
    }

    pub fn len(&self) -> usize {
        self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_values.is_empty()
    }

    pub fn r_grid(&self) -> Vec<f64> {
        (0..self.q_values.len())
            .map(|i| i as f64 * self.dr)
            .collect()
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn dq_values(&self) -> &[f64] {
        &self.dq_values
    }

    pub fn tail_prefactor(&self) -> f64 {
        self.tail_prefactor
    }

    /// Exponential rate fitted to the tail; close to 1.
    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    /// `Q(r)` for any `r ≥ 0`.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_end() {
            return self.tail_value(r);
        }
        let t = r / self.dr;
        let i = (t as usize).min(self.q_values.len() - 2);
        let s = t - i as f64;
        let (y0, y1) = (self.q_values[i], self.q_values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.dr, self.slopes[i + 1] * self.dr);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }

    /// `Q'(r)` for any `r ≥ 0`.
    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_end() {
            return -self.tail_value(r) * (1.0 + 0.5 / r);
        }
        let t = r / self.dr;
        let i = (t as usize).min(self.q_values.len() - 2);
        let s = t - i as f64;
        let (y0, y1) = (self.q_values[i], self.q_values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.dr, self.slopes[i + 1] * self.dr);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / self.dr
    }

    fn tail_value(&self, r: f64) -> f64 {
        self.tail_prefactor * (-r).exp() / r.sqrt()
    }

    /// `2π∫ f(Q, Q', r) r dr` over the sampled range (Simpson) plus the
    /// analytic tail.
    pub fn radial_integral(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let n = self.q_values.len() - 1;
        let g = |i: usize| {
            let r = i as f64 * self.dr;
            f(self.q_values[i], self.dq_values[i], r) * r
        };
        let even = n - n % 2;
        let mut body = g(0) + g(even);
        for i in 1..even {
            body += if i % 2 == 1 { 4.0 * g(i) } else { 2.0 * g(i) };
        }
        body *= self.dr / 3.0;
        if even < n {
            body += 0.5 * self.dr * (g(even) + g(n));
        }

        // Tail on [r_end, r_end + 30] by Simpson on the asymptotic form.
        let r0 = self.r_end();
        let m = 3000;
        let h = 30.0 / m as f64;
        let tail_f = |r: f64| {
            let q = self.tail_value(r);
            let dq = -q * (1.0 + 0.5 / r);
            f(q, dq, r) * r
        };
        let mut tail = tail_f(r0) + tail_f(r0 + 30.0);
        for i in 1..m {
            let r = r0 + i as f64 * h;
            tail += if i % 2 == 1 {
                4.0 * tail_f(r)
            } else {
                2.0 * tail_f(r)
            };
        }
        tail *= h / 3.0;
        2.0 * PI * (body + tail)
    }
}

/// Fritsch-Carlson limiting of the exact ODE derivatives so that each
/// Hermite segment stays monotone.
fn monotone_slopes(q: &[f64], dq: &[f64], dr: f64) -> Vec<f64> {
    let mut m = dq.to_vec();
    for i in 0..q.len() - 1 {
        let delta = (q[i + 1] - q[i]) / dr;
        if delta == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let alpha = m[i] / delta;
        let beta = m[i + 1] / delta;
        if alpha < 0.0 {
            m[i] = 0.0;
        }
        if beta < 0.0 {
            m[i + 1] = 0.0;
        }
        let s = alpha * alpha + beta * beta;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[i] = tau * alpha * delta;
            m[i + 1] = tau * beta * delta;
        }
    }
    m
}

/// Finds the ground state by bisection on `Q(0)` until the bracket is
/// narrower than `tol`.
pub fn solve_q(tol: f64, r_max: f64, dr: f64) -> Result<RadialProfile> {
    if !(tol >= f64::EPSILON * 1e3) {
        return Err(Error::InvalidInput(format!(
            "bisection tolerance {tol:e} is below 1e3 machine epsilons"
        )));
    }
    validate_shooting(1.0, r_max, dr)?;
    let (mut lo, mut hi) = BRACKET;
    let lo_trace = integrate(lo, r_max, dr, false);
    let hi_trace = integrate(hi, r_max, dr, false);
    if lo_trace.side() != Side::Under || hi_trace.side() != Side::Over {
        return Err(Error::Configuration(format!(
            "bracket [{lo}, {hi}] does not straddle the ground state: outcomes {:?} / {:?}",
            lo_trace.outcome, hi_trace.outcome
        )));
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match integrate(mid, r_max, dr, false).side() {
            Side::Under => lo = mid,
            Side::Over => hi = mid,
        }
    }
    let q0 = 0.5 * (lo + hi);
    let mid = integrate(q0, r_max, dr, false);
    let under = integrate(lo, r_max, dr, false);
    let over = integrate(hi, r_max, dr, false);

    // Keep samples only while both bracket trajectories agree with the
    // midpoint and the midpoint is still positive and decreasing.
    let len = mid
        .q_values
        .len()
        .min(under.q_values.len())
        .min(over.q_values.len());
    let mut cut = 1;
    for i in 1..len {
        let q = mid.q_values[i];
        if q <= 0.0 || mid.dq_values[i] >= 0.0 || q >= mid.q_values[i - 1] {
            break;
        }
        let spread = (under.q_values[i] - over.q_values[i]).abs();
        if spread > BRACKET_AGREEMENT * q {
            break;
        }
        cut = i;
    }
    let r: Vec<f64> = mid.r_grid[..=cut].to_vec();
    RadialProfile::from_samples(&r, &mid.q_values[..=cut], &mid.dq_values[..=cut])
}

/// Integrals of the ground state consumed throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateConstants {
    /// `∫Q²`, the critical mass.
    pub a_star: f64,
    /// `∫|x|²Q²`.
    pub second_moment: f64,
    /// `∫Q⁴`.
    pub quartic: f64,
    pub decay_rate: f64,
    pub q0_star: f64,
}

/// Raw radial integrals of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialIntegrals {
    pub mass: f64,
    pub gradient: f64,
    pub quartic: f64,
    pub second_moment: f64,
}

pub fn radial_integrals(profile: &RadialProfile) -> RadialIntegrals {
    RadialIntegrals {
        mass: profile.radial_integral(|q, _, _| q * q),
        gradient: profile.radial_integral(|_, dq, _| dq * dq),
        quartic: profile.radial_integral(|q, _, _| q * q * q * q),
        second_moment: profile.radial_integral(|q, _, r| q * q * r * r),
    }
}

/// Computes `a*` and the moments, checking `∫|∇Q|² = ∫Q² = ½∫Q⁴`.
pub fn ground_state_constants(profile: &RadialProfile) -> Result<GroundStateConstants> {
    let ints = radial_integrals(profile);
    let grad_ratio = ints.gradient / ints.mass;
    let quartic_ratio = ints.quartic / ints.mass;
    if (grad_ratio - 1.0).abs() > IDENTITY_TOL || (quartic_ratio - 2.0).abs() / 2.0 > IDENTITY_TOL {
        return Err(Error::Accuracy(format!(
            "ground-state identities violated: ∫|∇Q|²/∫Q² = {grad_ratio:.8}, ∫Q⁴/∫Q² = {quartic_ratio:.8}"
        )));
    }
    Ok(GroundStateConstants {
        a_star: ints.mass,
        second_moment: ints.second_moment,
        quartic: ints.quartic,
        decay_rate: profile.decay_rate(),
        q0_star: profile.q0_star(),
    })
}

/// A field sampled from a rescaled, translated ground state.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub field: Field2D,
    /// False when the grid does not cover `center ± 8/inv_scale`.
    pub coverage_ok: bool,
    /// `|∫u² - 1|` on the grid.
    pub mass_defect: f64,
}

/// Profile plus constants: everything downstream modules need.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub profile: RadialProfile,
    pub constants: GroundStateConstants,
}

impl GroundState {
    pub const DEFAULT_TOL: f64 = 1e-12;
    pub const DEFAULT_R_MAX: f64 = 20.0;
    pub const DEFAULT_DR: f64 = 1e-3;

    pub fn compute(tol: f64, r_max: f64, dr: f64) -> Result<Self> {
        let profile = solve_q(tol, r_max, dr)?;
        let constants = ground_state_constants(&profile)?;
        Ok(Self { profile, constants })
    }

    pub fn from_profile(profile: RadialProfile) -> Result<Self> {
        let constants = ground_state_constants(&profile)?;
        Ok(Self { profile, constants })
    }

    /// Process-wide ground state at the default resolution.
    pub fn reference() -> &'static GroundState {
        static CELL: OnceLock<GroundState> = OnceLock::new();
        CELL.get_or_init(|| {
            GroundState::compute(Self::DEFAULT_TOL, Self::DEFAULT_R_MAX, Self::DEFAULT_DR)
                .expect("default ground-state solve")
        })
    }

    pub fn a_star(&self) -> f64 {
        self.constants.a_star
    }

    /// Samples `x ↦ (s/√a*)·Q(s·|x - center|)` onto `grid`.
    pub fn sample_field(
        &self,
        grid: &GridSpec,
        center: [f64; 2],
        inv_scale: f64,
    ) -> Result<SampledField> {
        sample_field(
            &self.profile,
            self.constants.a_star,
            grid,
            center,
            inv_scale,
        )
    }
}

/// Samples the unit-mass rescaled ground state `(s/√a*)·Q(s·|x - center|)`.
pub fn sample_field(
    profile: &RadialProfile,
    a_star: f64,
    grid: &GridSpec,
    center: [f64; 2],
    inv_scale: f64,
) -> Result<SampledField> {
    if !(inv_scale > 0.0) || !inv_scale.is_finite() {
        return Err(Error::InvalidInput(format!(
            "inv_scale must be positive, got {inv_scale}"
        )));
    }
    let amp = inv_scale / a_star.sqrt();
    let field = Field2D::from_fn(grid.clone(), |x, y| {
        let r = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
        amp * profile.value(inv_scale * r)
    });
    let reach = 8.0 / inv_scale;
    let coverage_ok = grid.covers([center[0] - reach, center[1] - reach])
        && grid.covers([center[0] + reach, center[1] + reach]);
    let mass_defect = (field.mass() - 1.0).abs();
    Ok(SampledField {
        field,
        coverage_ok,
        mass_defect,
    })
}
