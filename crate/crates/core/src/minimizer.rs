//! Mass-constrained minimization by normalized gradient flow, with
//! multi-start and warm-started sweeps over `b`.
//!
//! One step freezes `θ` and `μ` at the current iterate and solves
//!
//! ```text
//! (1 + dt·((1+bθ)(-Δ) + V + s))·u* = (1 + dt·(s+μ))·u + dt·a·u³
//! ```
//!
//! with `s = max(0, -μ)`, then renormalizes. A fixed point is an exact
//! solution of the discrete Euler–Lagrange equation `g = μu`, so the
//! converged field does not depend on `dt`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustdct::{DctPlanner, Dst1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    apply_neg_laplacian, energy, l2_gradient, lagrange_mu, normalize, potential_integral,
    EnergyBreakdown, Field2D, GridSpec, SampledPotential, Stencil,
};
use crate::ground_state::GroundState;
use crate::limit_oracle::{theory_epsilon, trial_upper_bound, Regime};
use crate::potential::{analyze_wells, PotentialSpec, WellAnalysis};

/// The functional being minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
}

impl Problem {
    pub fn new(a: f64, b: f64, potential: Option<PotentialSpec>) -> Self {
        Self { a, b, potential }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0) || !(self.b >= 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidInput(format!(
                "need a >= 0 and b >= 0, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if let Some(v) = &self.potential {
            v.validate()?;
        }
        Ok(())
    }

    pub fn with_b(&self, b: f64) -> Self {
        Self { b, ..self.clone() }
    }
}

/// Initial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Gaussian {
        center: [f64; 2],
        sigma: f64,
    },
    /// A sum of a few positive Gaussian bumps drawn from `seed`.
    Random {
        seed: u64,
    },
    /// An explicit field, resampled onto the run grid if needed.
    #[serde(skip)]
    Field(Field2D),
}

impl Init {
    pub fn build(&self, grid: &GridSpec) -> Result<Field2D> {
        let raw = match self {
            Init::Gaussian { center, sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "Gaussian width must be positive, got {sigma}"
                    )));
                }
                let s2 = 2.0 * sigma * sigma;
                Field2D::from_fn(grid.clone(), |x, y| {
                    (-((x - center[0]).powi(2) + (y - center[1]).powi(2)) / s2).exp()
                })
            }
            Init::Random { seed } => random_bumps(grid, *seed),
            Init::Field(f) => {
                if f.grid() == grid {
                    f.clone()
                } else {
                    f.resample(grid)
                }
            }
        };
        let abs =
            Field2D::from_values(grid.clone(), raw.values().iter().map(|v| v.abs()).collect())?;
        normalize(&abs)
    }
}

fn random_bumps(grid: &GridSpec, seed: u64) -> Field2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.half_width;
    let bumps: Vec<([f64; 2], f64, f64)> = (0..4)
        .map(|_| {
            let c = [
                grid.center[0] + rng.gen_range(-0.4..0.4) * l,
                grid.center[1] + rng.gen_range(-0.4..0.4) * l,
            ];
            (c, rng.gen_range(0.08..0.25) * l, rng.gen_range(0.5..1.0))
        })
        .collect();
    Field2D::from_fn(grid.clone(), |x, y| {
        bumps
            .iter()
            .map(|(c, s, w)| w * (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (2.0 * s * s)).exp())
            .sum()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub grid: GridSpec,
    /// Initial pseudo-time step.
    pub dt: f64,
    /// Largest pseudo-time step the adaptive controller may reach.
    pub dt_max: f64,
    /// Stop when the relative energy change of an accepted step is below this…
    pub tol_energy: f64,
    /// …and `‖g - μu‖₂ ≤ tol_residual·max(1, |μ|)`.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Blow-up guard on `θ`; a run also stops when `θ·h² > 1/4`.
    pub theta_max: f64,
    pub init: Init,
    /// Conjugate momentum and an energy line search on top of each accepted
    /// flow step; off runs the plain flow.
    #[serde(default = "yes")]
    pub accelerate: bool,
}

fn yes() -> bool {
    true
}

impl MinimizeConfig {
    pub fn new(grid: GridSpec) -> Self {
        let center = grid.center;
        let sigma = grid.half_width / 4.0;
        Self {
            grid,
            dt: 1e-2,
            dt_max: 1e3,
            tol_energy: 1e-12,
            tol_residual: 1e-7,
            max_iter: 5000,
            theta_max: 1e4,
            init: Init::Gaussian { center, sigma },
            accelerate: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let positive = [
            self.dt,
            self.dt_max,
            self.tol_energy,
            self.tol_residual,
            self.theta_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_iter == 0 {
            return Err(Error::InvalidInput(
                "dt, tolerances and theta_max must be positive, max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub dt: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Converged,
    NotConverged,
    /// The step controller shrank `dt` below any useful size.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub field: Field2D,
    pub breakdown: EnergyBreakdown,
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: RunStatus,
    pub residual: f64,
    /// Grid point of the global maximum.
    pub peak: [f64; 2],
    pub peak_value: f64,
    /// Smallest field value; minimizers are nonnegative.
    pub min_value: f64,
    pub log: Vec<IterRecord>,
}

impl MinimizerResult {
    pub fn energy(&self) -> f64 {
        self.breakdown.total
    }

    pub fn theta(&self) -> f64 {
        self.breakdown.theta()
    }
}

const CG_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 5000;
const DT_GROWTH: f64 = 1.25;
const DT_FLOOR: f64 = 1e-14;

/// Fast solver for `c + dt·k·(-Δ)` on the interior nodes. Both stencils are
/// diagonalized by the 2D sine transform (exactly for the 5-point stencil,
/// up to the boundary closure for the fourth-order one).
struct SpectralPreconditioner {
    m: usize,
    dst: Arc<dyn Dst1<f64>>,
    /// Per-axis symbol of `-Δ_h`.
    symbol: Vec<f64>,
}

impl SpectralPreconditioner {
    fn new(grid: &GridSpec) -> Self {
        let m = grid.n - 2;
        let dst = DctPlanner::new().plan_dst1(m);
        let h2 = grid.spacing().powi(2);
        let symbol = (1..=m)
            .map(|j| {
                let t = std::f64::consts::PI * j as f64 / (m + 1) as f64;
                match grid.stencil {
                    Stencil::FivePoint => (2.0 - 2.0 * t.cos()) / h2,
                    Stencil::FourthOrder => {
                        (30.0 - 32.0 * t.cos() + 2.0 * (2.0 * t).cos()) / (12.0 * h2)
                    }
                }
            })
            .collect();
        Self { m, dst, symbol }
    }

    fn transform(&self, buf: &mut [f64], tmp: &mut [f64]) {
        let m = self.m;
        for row in buf.chunks_exact_mut(m) {
            self.dst.process_dst1(row);
        }
        for j in 0..m {
            for i in 0..m {
                tmp[i * m + j] = buf[j * m + i];
            }
        }
        for row in tmp.chunks_exact_mut(m) {
            self.dst.process_dst1(row);
        }
        for j in 0..m {
            for i in 0..m {
                buf[i * m + j] = tmp[j * m + i];
            }
        }
    }

    /// `z = (c + dk·(-Δ))⁻¹ r` on the interior of an `n × n` layout.
    fn apply(&self, c: f64, dk: f64, r: &[f64], z: &mut [f64], buf: &mut [f64], tmp: &mut [f64]) {
        let (m, n) = (self.m, self.m + 2);
        for j in 0..m {
            buf[j * m..(j + 1) * m].copy_from_slice(&r[(j + 1) * n + 1..(j + 1) * n + 1 + m]);
        }
        self.transform(buf, tmp);
        let scale = (2.0 / (m + 1) as f64).powi(2);
        for j in 0..m {
            for i in 0..m {
                buf[j * m + i] *= scale / (c + dk * (self.symbol[i] + self.symbol[j]));
            }
        }
        self.transform(buf, tmp);
        for j in 0..m {
            z[(j + 1) * n + 1..(j + 1) * n + 1 + m].copy_from_slice(&buf[j * m..(j + 1) * m]);
        }
    }
}

/// Matrix-free operator `x ↦ x + dt·(k(-Δ)x + w·x)` on interior nodes.
struct StepOperator<'a> {
    grid: &'a GridSpec,
    dt: f64,
    k: f64,
    /// `V + s` per node.
    w: Vec<f64>,
    /// Representative value of `w` for the preconditioner.
    w_mean: f64,
}

impl<'a> StepOperator<'a> {
    fn new(
        grid: &'a GridSpec,
        dt: f64,
        k: f64,
        v: Option<&SampledPotential>,
        shift: f64,
        weight: &Field2D,
    ) -> Self {
        let n = grid.n;
        let w: Vec<f64> = match v {
            Some(v) => v.values().iter().map(|x| x + shift).collect(),
            None => vec![shift; n * n],
        };
        let w_mean = v.map_or(0.0, |v| potential_integral(weight, v) / weight.mass()) + shift;
        Self {
            grid,
            dt,
            k,
            w,
            w_mean,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        apply_neg_laplacian(self.grid, x, out);
        let n = self.grid.n;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let m = j * n + i;
                out[m] = x[m] + self.dt * (self.k * out[m] + self.w[m] * x[m]);
            }
        }
    }

    /// Preconditioned CG from the initial guess in `x`.
    fn solve(&self, pre: &SpectralPreconditioner, rhs: &[f64], x: &mut [f64]) -> (usize, f64) {
        let len = rhs.len();
        let (mut r, mut z, mut p, mut ap) = (
            vec![0.0; len],
            vec![0.0; len],
            vec![0.0; len],
            vec![0.0; len],
        );
        let mut buf = vec![0.0; pre.m * pre.m];
        let mut tmp = vec![0.0; pre.m * pre.m];
        let c = 1.0 + self.dt * self.w_mean;
        let dk = self.dt * self.k;
        self.apply(x, &mut ap);
        for k in 0..len {
            r[k] = rhs[k] - ap[k];
        }
        pre.apply(c, dk, &r, &mut z, &mut buf, &mut tmp);
        p.copy_from_slice(&z);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let rhs_norm = dot(rhs, rhs).sqrt();
        let target = CG_TOL * rhs_norm;
        let mut rz = dot(&r, &z);
        let mut rr = dot(&r, &r);
        let mut it = 0;
        while rr.sqrt() > target && it < CG_MAX_ITER {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for k in 0..len {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            rr = dot(&r, &r);
            pre.apply(c, dk, &r, &mut z, &mut buf, &mut tmp);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..len {
                p[k] = z[k] + beta * p[k];
            }
            it += 1;
        }
        (it, rr.sqrt() / rhs_norm.max(f64::MIN_POSITIVE))
    }
}

fn flow_step(
    u: &Field2D,
    problem: &Problem,
    v: Option<&SampledPotential>,
    pre: &SpectralPreconditioner,
    theta: f64,
    mu: f64,
    dt: f64,
) -> Field2D {
    let grid = u.grid();
    let shift = (-mu).max(0.0);
    let op = StepOperator::new(grid, dt, 1.0 + problem.b * theta, v, shift, u);
    let c = 1.0 + dt * (shift + mu);
    let rhs: Vec<f64> = u
        .values()
        .iter()
        .map(|&x| c * x + dt * problem.a * x * x * x)
        .collect();
    let mut x = u.values().to_vec();
    op.solve(pre, &rhs, &mut x);
    Field2D::from_values_clamped(grid.clone(), x).unwrap_or_else(|_| Field2D::zeros(grid.clone()))
}

fn guard(u: &Field2D, theta: f64, config: &MinimizeConfig, iteration: usize) -> Result<()> {
    if !theta.is_finite() || theta > config.theta_max || theta * u.grid().spacing().powi(2) > 0.25 {
        return Err(Error::BlowupDetected { iteration, theta });
    }
    Ok(())
}

/// Longest stretch tried along one search direction.
const MAX_STRETCH: f64 = 1048576.0;
/// Most negative value an accelerated iterate may take.
const NEGATIVE_FLOOR: f64 = -1e-13;

fn grid_dot(grid: &GridSpec, x: &[f64], y: &[f64]) -> f64 {
    grid.spacing().powi(2) * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
}

/// Conjugate momentum on top of the flow.
///
/// The explicit cubic term makes the plain flow crawl along near-neutral
/// directions, such as a peak sliding into a flat well. For a fixed `dt` the
/// increment `G(u) - u` is a preconditioned residual, so Polak–Ribière
/// combinations of successive increments, followed by an energy line search
/// on the unit sphere, amount to a preconditioned nonlinear CG. Momentum is
/// dropped whenever `dt` changes.
struct Momentum {
    prev: Option<LastStep>,
}

/// Residual, preconditioned residual, direction and `dt` of the last step.
type LastStep = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

impl Momentum {
    fn direction(&mut self, u: &Field2D, r: Vec<f64>, delta: &[f64], dt: f64) -> (Vec<f64>, bool) {
        let grid = u.grid();
        let z: Vec<f64> = delta.iter().map(|d| -d).collect();
        let mut d = delta.to_vec();
        let mut conjugate = false;
        if let Some((r0, z0, d0, dt0)) = &self.prev {
            if *dt0 == dt {
                let dz: Vec<f64> = z.iter().zip(z0).map(|(a, b)| a - b).collect();
                let beta = (grid_dot(grid, &r, &dz) / grid_dot(grid, r0, z0)).max(0.0);
                if beta.is_finite() && beta > 0.0 {
                    let along = grid_dot(grid, u.values(), d0);
                    let trial: Vec<f64> = d
                        .iter()
                        .zip(d0)
                        .zip(u.values())
                        .map(|((d, p), u)| d + beta * (p - along * u))
                        .collect();
                    if grid_dot(grid, &r, &trial) < 0.0 {
                        d = trial;
                        conjugate = true;
                    }
                }
            }
        }
        self.prev = Some((r, z, d.clone(), dt));
        (d, conjugate)
    }

    fn reset(&mut self) {
        self.prev = None;
    }
}

/// Energy line search on `t ↦ normalize(u + t·d)`, starting from the plain
/// flow step (`t = 1`, `d = delta`) as the fallback.
fn line_search(
    u: &Field2D,
    d: &[f64],
    conjugate: bool,
    plain: (Field2D, EnergyBreakdown),
    problem: &Problem,
    v: Option<&SampledPotential>,
) -> ((Field2D, EnergyBreakdown), bool) {
    let at = |t: f64| -> Option<(Field2D, EnergyBreakdown)> {
        let raw: Vec<f64> = u.values().iter().zip(d).map(|(x, d)| x + t * d).collect();
        let f = Field2D::from_values(u.grid().clone(), raw)
            .and_then(|f| normalize(&f))
            .ok()?;
        if f.min_value() < NEGATIVE_FLOOR {
            return None;
        }
        let e = energy(&f, problem.a, problem.b, v);
        e.total.is_finite().then_some((f, e))
    };
    let mut best = plain;
    let mut improved = false;
    let first = if conjugate { at(1.0) } else { None };
    let mut t = match first {
        Some(c) if c.1.total < best.1.total => {
            best = c;
            improved = true;
            2.0
        }
        Some(_) => {
            // The conjugate direction overshoots at unit length: look shorter.
            let mut t = 0.5;
            while t >= 1.0 / 64.0 {
                match at(t) {
                    Some(c) if c.1.total < best.1.total => {
                        best = c;
                        improved = true;
                        break;
                    }
                    _ => t *= 0.5,
                }
            }
            return (best, improved);
        }
        None if conjugate => return (best, false),
        None => 2.0,
    };
    while t <= MAX_STRETCH {
        match at(t) {
            Some(c) if c.1.total < best.1.total => {
                best = c;
                improved = true;
                t *= 2.0;
            }
            _ => break,
        }
    }
    (best, improved)
}

/// Runs the normalized gradient flow from `config.init`.
///
/// Returns `BlowupDetected` when `θ` escapes the guard; a run that exhausts
/// `max_iter` comes back with `converged = false` and the last iterate.
pub fn minimize(problem: &Problem, config: &MinimizeConfig) -> Result<MinimizerResult> {
    problem.validate()?;
    config.validate()?;
    let u0 = config.init.build(&config.grid)?;
    let v = problem.potential.as_ref().map(|p| p.sample(&config.grid));
    run_flow(problem, config, u0, v.as_ref())
}

fn run_flow(
    problem: &Problem,
    config: &MinimizeConfig,
    u0: Field2D,
    v: Option<&SampledPotential>,
) -> Result<MinimizerResult> {
    let (a, b) = (problem.a, problem.b);
    let mut u = u0;
    let mut e = energy(&u, a, b, v);
    guard(&u, e.theta(), config, 0)?;
    let pre = SpectralPreconditioner::new(u.grid());
    let mut dt = config.dt;
    let mut log = Vec::new();
    let mut rel_change = f64::INFINITY;
    let mut status = RunStatus::NotConverged;
    let mut iterations = 0;
    let mut momentum = Momentum { prev: None };
    let (mut mu, mut residual);
    loop {
        let theta = e.theta();
        mu = lagrange_mu(&u, a, b, v)?;
        let g = l2_gradient(&u, a, b, v);
        let r: Vec<f64> = g
            .values()
            .iter()
            .zip(u.values())
            .map(|(g, u)| g - mu * u)
            .collect();
        residual = grid_dot(u.grid(), &r, &r).sqrt();
        log.push(IterRecord {
            iter: iterations,
            energy: e.total,
            residual,
            dt,
            theta,
        });
        if residual <= config.tol_residual * mu.abs().max(1.0) && rel_change <= config.tol_energy {
            status = RunStatus::Converged;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;
        let accepted = loop {
            let cand = flow_step(&u, problem, v, &pre, theta, mu, dt);
            let m = cand.mass();
            if m > 0.0 && m.is_finite() {
                let cand = cand.scaled(1.0 / m.sqrt());
                let ec = energy(&cand, a, b, v);
                if ec.total.is_finite() && ec.total <= e.total + 4.0 * f64::EPSILON * e.total.abs()
                {
                    break Some((cand, ec));
                }
            }
            dt *= 0.5;
            if dt < DT_FLOOR {
                break None;
            }
        };
        let Some(plain) = accepted else {
            status = RunStatus::Stalled;
            break;
        };
        let (next, en) = if config.accelerate {
            let delta: Vec<f64> = plain
                .0
                .values()
                .iter()
                .zip(u.values())
                .map(|(x, y)| x - y)
                .collect();
            let (d, conjugate) = momentum.direction(&u, r, &delta, dt);
            let (best, improved) = line_search(&u, &d, conjugate, plain, problem, v);
            if conjugate && !improved {
                momentum.reset();
            }
            best
        } else {
            plain
        };
        guard(&next, en.theta(), config, iterations)?;
        rel_change = (e.total - en.total).abs() / en.total.abs().max(f64::MIN_POSITIVE);
        u = next;
        e = en;
        dt = (dt * DT_GROWTH).min(config.dt_max);
    }
    let k = u.argmax();
    let peak = u.grid().point(k);
    Ok(MinimizerResult {
        peak_value: u.values()[k],
        min_value: u.min_value(),
        converged: status == RunStatus::Converged,
        field: u,
        breakdown: e,
        mu,
        iterations,
        status,
        residual,
        peak,
        log,
    })
}

/// Runs from an explicit unit-mass field.
pub fn minimize_from(
    problem: &Problem,
    config: &MinimizeConfig,
    u0: Field2D,
) -> Result<MinimizerResult> {
    let config = MinimizeConfig {
        init: Init::Field(u0),
        ..config.clone()
    };
    minimize(problem, &config)
}

#[derive(Debug, Clone)]
pub struct MultiStartResult {
    pub best: MinimizerResult,
    pub all: Vec<std::result::Result<MinimizerResult, Error>>,
    pub seeds: Vec<u64>,
    /// `(max - min)/|min|` of converged energies.
    pub energy_spread: f64,
    /// Largest distance between converged peaks.
    pub peak_spread: f64,
    pub n_converged: usize,
}

/// Independent runs: the first from the configured initialization, the rest
/// from random fields seeded by a ChaCha stream on `seed`.
pub fn multi_start(
    problem: &Problem,
    config: &MinimizeConfig,
    n_starts: usize,
    seed: u64,
) -> Result<MultiStartResult> {
    if n_starts < 2 {
        return Err(Error::InvalidInput(format!(
            "multi-start needs at least 2 starts, got {n_starts}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n_starts).map(|_| rng.gen()).collect();
    let all: Vec<_> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &s)| {
            let init = if k == 0 {
                config.init.clone()
            } else {
                Init::Random { seed: s }
            };
            minimize(
                problem,
                &MinimizeConfig {
                    init,
                    ..config.clone()
                },
            )
        })
        .collect();
    let converged: Vec<&MinimizerResult> = all
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter(|r| r.converged)
        .collect();
    if converged.is_empty() {
        return Err(Error::AllRunsFailed(n_starts));
    }
    let emin = converged
        .iter()
        .map(|r| r.energy())
        .fold(f64::INFINITY, f64::min);
    let emax = converged
        .iter()
        .map(|r| r.energy())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut peak_spread: f64 = 0.0;
    for (i, ri) in converged.iter().enumerate() {
        for rj in &converged[i + 1..] {
            peak_spread = peak_spread.max((ri.peak[0] - rj.peak[0]).hypot(ri.peak[1] - rj.peak[1]));
        }
    }
    let best = (*converged
        .iter()
        .min_by(|x, y| x.energy().total_cmp(&y.energy()))
        .expect("nonempty"))
    .clone();
    Ok(MultiStartResult {
        n_converged: converged.len(),
        best,
        energy_spread: (emax - emin) / emin.abs().max(f64::MIN_POSITIVE),
        peak_spread,
        all,
        seeds,
    })
}

/// How each sweep point chooses its grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPolicy {
    /// Use the configured grid for every `b`.
    Fixed,
    /// Half-width `width_factor·ε` and spacing `ε/points_per_eps` around each
    /// candidate center, with `ε` the theoretical blow-up scale.
    Adaptive {
        width_factor: f64,
        points_per_eps: f64,
        max_n: usize,
    },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Adaptive {
            width_factor: 8.0,
            points_per_eps: 12.0,
            max_n: 513,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: MinimizeConfig,
    #[serde(default)]
    pub grid_policy: GridPolicy,
    /// Initial `dt` in units of `ε²`; `None` keeps `base.dt`.
    #[serde(default)]
    pub dt_per_eps2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub b: f64,
    pub result: MinimizerResult,
    pub eps_theory: Option<f64>,
    /// `h ≤ ε_theory/4`.
    pub resolution_ok: bool,
    /// Discrete energy of the cut-off trial state on the run grid.
    pub trial_energy: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub problem: Problem,
    pub analysis: Option<WellAnalysis>,
    pub points: Vec<SweepPoint>,
    /// Set when a blow-up aborted the remaining values of `b`.
    pub aborted: Option<Error>,
}

fn adaptive_grid(
    center: [f64; 2],
    eps: f64,
    width_factor: f64,
    ppe: f64,
    max_n: usize,
    stencil: Stencil,
) -> Result<GridSpec> {
    let half_width = width_factor * eps;
    let n =
        ((2.0 * half_width * ppe / eps).ceil() as usize + 1).clamp(crate::field::MIN_POINTS, max_n);
    Ok(GridSpec::centered(half_width, n, center)?.with_stencil(stencil))
}

struct Start {
    grid: GridSpec,
    init: Field2D,
}

/// Sweeps `b` downwards with warm starts.
///
/// At each `b` the candidates are the previous minimizer (re-centered on its
/// peak) and the cut-off trial state at the selected well; on the first
/// point every well location is also tried. Candidates sharing a basin run
/// once from whichever initial field has the lower energy; distinct basins
/// run separately and the lowest final energy wins.
pub fn sweep_b(
    gs: &GroundState,
    problem: &Problem,
    b_list: &[f64],
    config: &SweepConfig,
) -> Result<SweepRun> {
    problem.validate()?;
    config.base.validate()?;
    if b_list.is_empty() {
        return Err(Error::InvalidInput("empty b list".into()));
    }
    if b_list.iter().any(|b| !(*b > 0.0)) || b_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "b values must be positive and strictly decreasing".into(),
        ));
    }
    let a_star = gs.a_star();
    let regime = Regime::of(problem.a, a_star);
    let analysis = match &problem.potential {
        Some(v) if regime != Regime::Subcritical => Some(analyze_wells(v, &gs.profile)?),
        _ => None,
    };
    let (p, lambda0) = analysis
        .as_ref()
        .map_or((0.0, 0.0), |an| (an.p, an.lambda0));
    let mut points: Vec<SweepPoint> = Vec::new();
    let mut aborted = None;
    for (idx, &b) in b_list.iter().enumerate() {
        let pb = problem.with_b(b);
        let eps = theory_epsilon(pb.a, b, p, lambda0, a_star);
        let mut warnings = Vec::new();
        let stencil = config.base.grid.stencil;
        let make_grid = |center: [f64; 2]| -> Result<GridSpec> {
            match (config.grid_policy, eps) {
                (
                    GridPolicy::Adaptive {
                        width_factor,
                        points_per_eps,
                        max_n,
                    },
                    Some(e),
                ) => adaptive_grid(center, e, width_factor, points_per_eps, max_n, stencil),
                _ => Ok(config.base.grid.clone()),
            }
        };
        let trial_for = |grid: &GridSpec| {
            let pot = pb.potential.as_ref().zip(analysis.as_ref());
            if pb.potential.is_some() && pot.is_none() {
                return None;
            }
            trial_upper_bound(gs, pb.a, b, pot, grid).ok()
        };
        let warm = points.last().map(|pt| &pt.result);
        let mut centers: Vec<[f64; 2]> = Vec::new();
        let trial_center = match regime {
            Regime::Subcritical => None,
            _ => trial_for(&make_grid(config.base.grid.center)?).map(|t| t.center),
        };
        if let Some(c) = trial_center {
            centers.push(c);
        }
        if let Some(w) = warm {
            centers.push(w.peak);
        }
        if idx == 0 {
            match &pb.potential {
                Some(v) => centers.extend(v.wells.iter().map(|w| w.x)),
                None => centers.push(config.base.grid.center),
            }
        }
        let fixed = !matches!(
            (config.grid_policy, eps),
            (GridPolicy::Adaptive { .. }, Some(_))
        );
        let mut starts: Vec<Start> = Vec::new();
        if fixed {
            let grid = config.base.grid.clone();
            let mut inits = Vec::new();
            if let Some(w) = warm {
                inits.push(Init::Field(w.field.clone()).build(&grid)?);
            }
            if let Some(t) = trial_for(&grid) {
                inits.push(t.field);
            }
            if idx == 0 {
                inits.push(config.base.init.build(&grid)?);
                if let Some(v) = &pb.potential {
                    let sigma = eps.unwrap_or(grid.half_width / 8.0);
                    for w in &v.wells {
                        inits.push(Init::Gaussian { center: w.x, sigma }.build(&grid)?);
                    }
                }
                starts.extend(inits.into_iter().map(|init| Start {
                    grid: grid.clone(),
                    init,
                }));
            } else if let Some(best) = lowest_energy(inits, &pb) {
                starts.push(Start { grid, init: best });
            }
        } else {
            let e = eps.expect("adaptive grids need a theoretical scale");
            let mut unique: Vec<[f64; 2]> = Vec::new();
            for c in centers {
                if unique
                    .iter()
                    .all(|u| (u[0] - c[0]).hypot(u[1] - c[1]) > 2.0 * e)
                {
                    unique.push(c);
                }
            }
            for c in unique {
                let grid = make_grid(c)?;
                let mut inits = vec![Init::Gaussian {
                    center: c,
                    sigma: e,
                }
                .build(&grid)?];
                if let Some(w) = warm {
                    let shifted = Init::Field(w.field.clone()).build(&grid);
                    if let Ok(f) = shifted {
                        inits.push(f);
                    }
                }
                if let Some(t) = trial_for(&grid) {
                    inits.push(t.field);
                }
                if let Some(best) = lowest_energy(inits, &pb) {
                    starts.push(Start { grid, init: best });
                }
            }
        }
        let dt = match (config.dt_per_eps2, eps) {
            (Some(f), Some(e)) => f * e * e,
            _ => config.base.dt,
        };
        let mut best: Option<MinimizerResult> = None;
        let mut blowup = None;
        for s in starts {
            let cfg = MinimizeConfig {
                grid: s.grid.clone(),
                dt,
                init: Init::Field(s.init.clone()),
                ..config.base.clone()
            };
            let v = pb.potential.as_ref().map(|p| p.sample(&s.grid));
            match run_flow(&pb, &cfg, s.init, v.as_ref()) {
                Ok(r) => {
                    let better = match &best {
                        None => true,
                        Some(cur) => {
                            (r.converged && !cur.converged)
                                || (r.converged == cur.converged && r.energy() < cur.energy())
                        }
                    };
                    if better {
                        best = Some(r);
                    }
                }
                Err(err @ Error::BlowupDetected { .. }) => blowup = Some(err),
                Err(err) => warnings.push(format!("start failed: {err}")),
            }
        }
        let Some(result) = best else {
            aborted = Some(blowup.unwrap_or(Error::AllRunsFailed(1)));
            break;
        };
        let h = result.field.grid().spacing();
        let resolution_ok = eps.is_some_and(|e| h <= 0.25 * e);
        if !resolution_ok {
            warnings.push(format!(
                "grid spacing {h:.4e} does not resolve the blow-up scale {eps:?}"
            ));
        }
        let trial_energy = trial_for(result.field.grid()).map(|t| t.energy.total);
        points.push(SweepPoint {
            b,
            result,
            eps_theory: eps,
            resolution_ok,
            trial_energy,
            warnings,
        });
        if let Some(err) = blowup {
            if points.last().is_some_and(|p| !p.result.converged) {
                aborted = Some(err);
                break;
            }
        }
    }
    Ok(SweepRun {
        problem: problem.clone(),
        analysis,
        points,
        aborted,
    })
}

fn lowest_energy(inits: Vec<Field2D>, problem: &Problem) -> Option<Field2D> {
    inits
        .into_iter()
        .filter(|f| f.is_finite() && f.mass() > 0.0)
        .map(|f| {
            let v = problem.potential.as_ref().map(|p| p.sample(f.grid()));
            let e = energy(&f, problem.a, problem.b, v.as_ref()).total;
            (e, f)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, f)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn harmonic_config(n: usize) -> MinimizeConfig {
        let mut c = MinimizeConfig::new(GridSpec::new(6.0, n).unwrap());
        c.init = Init::Gaussian {
            center: [0.3, -0.2],
            sigma: 1.5,
        };
        c.dt = 0.1;
        c
    }

    #[test]
    fn harmonic_oscillator_ground_state() {
        let p = Problem::new(0.0, 0.0, Some(PotentialSpec::harmonic()));
        let r = minimize(&p, &harmonic_config(97)).unwrap();
        assert!(r.converged, "{:?}", r.status);
        assert_relative_eq!(r.energy(), 1.0, max_relative = 5e-3);
        assert!((r.field.mass() - 1.0).abs() < 1e-10);
        let peak_expected = 1.0 / std::f64::consts::PI.sqrt();
        assert_relative_eq!(r.peak_value, peak_expected, max_relative = 5e-3);
    }

    #[test]
    fn energy_log_is_monotone() {
        let gs = GroundState::reference();
        let p = Problem::new(0.5 * gs.a_star(), 0.2, Some(PotentialSpec::harmonic()));
        let r = minimize(&p, &harmonic_config(65)).unwrap();
        for w in r.log.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        assert!(r.min_value >= -1e-12);
    }

    #[test]
    fn critical_mass_without_kirchhoff_term_blows_up_or_stalls() {
        let gs = GroundState::reference();
        let p = Problem::new(gs.a_star(), 0.0, Some(PotentialSpec::harmonic()));
        let mut c = harmonic_config(65);
        c.max_iter = 400;
        match minimize(&p, &c) {
            Err(Error::BlowupDetected { .. }) => {}
            Ok(r) => {
                assert!(!r.converged);
                assert!(r.energy() < 0.5 && r.energy() > -1e-6);
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn repeated_seeds_are_bitwise_identical() {
        let gs = GroundState::reference();
        let p = Problem::new(0.5 * gs.a_star(), 0.1, Some(PotentialSpec::harmonic()));
        let mut c = harmonic_config(49);
        c.tol_residual = 1e-5;
        let r1 = multi_start(&p, &c, 2, 7).unwrap();
        let r2 = multi_start(&p, &c, 2, 7).unwrap();
        assert_eq!(r1.best.field.values(), r2.best.field.values());
        assert_eq!(r1.seeds, r2.seeds);
    }

    #[test]
    fn multi_start_rejects_single_start() {
        let p = Problem::new(0.0, 0.0, Some(PotentialSpec::harmonic()));
        assert!(matches!(
            multi_start(&p, &harmonic_config(49), 1, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn sweep_rejects_unsorted_b() {
        let gs = GroundState::reference();
        let p = Problem::new(gs.a_star(), 0.0, Some(PotentialSpec::harmonic()));
        let c = SweepConfig {
            base: harmonic_config(49),
            grid_policy: GridPolicy::Fixed,
            dt_per_eps2: None,
        };
        assert!(sweep_b(gs, &p, &[0.1, 0.2], &c).is_err());
        assert!(sweep_b(gs, &p, &[], &c).is_err());
    }

    #[test]
    fn single_point_sweep_is_one_minimization() {
        let gs = GroundState::reference();
        let p = Problem::new(0.5 * gs.a_star(), 0.3, Some(PotentialSpec::harmonic()));
        let base = harmonic_config(65);
        let c = SweepConfig {
            base: base.clone(),
            grid_policy: GridPolicy::Fixed,
            dt_per_eps2: None,
        };
        let run = sweep_b(gs, &p, &[0.3], &c).unwrap();
        assert_eq!(run.points.len(), 1);
        let direct = minimize(&p.with_b(0.3), &base).unwrap();
        assert_relative_eq!(
            run.points[0].result.energy(),
            direct.energy(),
            max_relative = 1e-9
        );
    }
}
