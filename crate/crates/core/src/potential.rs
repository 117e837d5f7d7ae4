//! Multi-well trapping potentials built from homogeneous local models, and
//! the well-selection quantities `H_i`, `λ_i`, `p`, `Z̄`, `Z₀`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, SampledPotential};
use crate::ground_state::RadialProfile;

fn one() -> f64 {
    1.0
}

/// Homogeneous function describing the shape of `V` near one of its zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum LocalModel {
    /// `c·|x|^p`
    Isotropic {
        #[serde(default = "one")]
        c: f64,
    },
    /// `c₁x₁² + c₂x₂²`; degree 2 only.
    Anisotropic { c1: f64, c2: f64 },
    /// `c·|x|^p·(1 + κ·cos(kφ))` with `|κ| < 1`.
    Dihedral {
        #[serde(default = "one")]
        c: f64,
        kappa: f64,
        k: u32,
    },
}

impl LocalModel {
    pub fn eval(&self, p: f64, x: [f64; 2]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match *self {
            LocalModel::Isotropic { c } => c * pow_r2(r2, p),
            LocalModel::Anisotropic { c1, c2 } => c1 * x[0] * x[0] + c2 * x[1] * x[1],
            LocalModel::Dihedral { c, kappa, k } => {
                if r2 == 0.0 {
                    return 0.0;
                }
                let phi = x[1].atan2(x[0]);
                c * pow_r2(r2, p) * (1.0 + kappa * (k as f64 * phi).cos())
            }
        }
    }

    pub fn gradient(&self, p: f64, x: [f64; 2]) -> [f64; 2] {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match *self {
            LocalModel::Isotropic { c } => {
                if r2 == 0.0 {
                    return [0.0, 0.0];
                }
                let f = c * p * pow_r2(r2, p - 2.0);
                [f * x[0], f * x[1]]
            }
            LocalModel::Anisotropic { c1, c2 } => [2.0 * c1 * x[0], 2.0 * c2 * x[1]],
            LocalModel::Dihedral { c, kappa, k } => {
                if r2 == 0.0 {
                    return [0.0, 0.0];
                }
                let r = r2.sqrt();
                let (sin, cos) = (x[1] / r, x[0] / r);
                let kphi = k as f64 * x[1].atan2(x[0]);
                let radial = p * (1.0 + kappa * kphi.cos());
                let angular = kappa * k as f64 * kphi.sin();
                let f = c * pow_r2(r2, p - 1.0);
                [
                    f * (radial * cos + angular * sin),
                    f * (radial * sin - angular * cos),
                ]
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> LocalModel {
        match *self {
            LocalModel::Isotropic { c } => LocalModel::Isotropic { c: c * factor },
            LocalModel::Anisotropic { c1, c2 } => LocalModel::Anisotropic {
                c1: c1 * factor,
                c2: c2 * factor,
            },
            LocalModel::Dihedral { c, kappa, k } => LocalModel::Dihedral {
                c: c * factor,
                kappa,
                k,
            },
        }
    }

    /// Whether the model is invariant under `x ↦ -x`.
    pub fn is_even(&self) -> bool {
        match self {
            LocalModel::Dihedral { k, .. } => k % 2 == 0,
            _ => true,
        }
    }
}

/// `|x|^p` from `|x|²`.
#[inline]
fn pow_r2(r2: f64, p: f64) -> f64 {
    if p == 2.0 {
        r2
    } else if p == 4.0 {
        r2 * r2
    } else if r2 == 0.0 {
        0.0
    } else {
        r2.powf(0.5 * p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    pub x: [f64; 2],
    pub p: f64,
    #[serde(flatten)]
    pub model: LocalModel,
}

impl WellSpec {
    pub fn new(x: [f64; 2], p: f64, model: LocalModel) -> Self {
        Self { x, p, model }
    }

    pub fn isotropic(x: [f64; 2], p: f64) -> Self {
        Self::new(x, p, LocalModel::Isotropic { c: 1.0 })
    }

    /// The local model evaluated relative to the well location.
    pub fn eval_local(&self, y: [f64; 2]) -> f64 {
        self.model.eval(self.p, y)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !self.x.iter().all(|v| v.is_finite()) {
            return bad("well location must be finite".into());
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return bad(format!("well degree must be positive, got {}", self.p));
        }
        match self.model {
            LocalModel::Isotropic { c } if !(c > 0.0) => {
                bad(format!("isotropic coefficient must be positive, got {c}"))
            }
            LocalModel::Anisotropic { c1, c2 } if !(c1 > 0.0 && c2 > 0.0) => bad(format!(
                "anisotropic coefficients must be positive, got {c1}, {c2}"
            )),
            LocalModel::Anisotropic { .. } if self.p != 2.0 => {
                bad(format!("anisotropic model has degree 2, got {}", self.p))
            }
            LocalModel::Dihedral { c, kappa, k }
                if !(c > 0.0) || !(kappa.abs() < 1.0) || k == 0 =>
            {
                bad(format!(
                    "dihedral model needs c > 0, |kappa| < 1, k >= 1; got {c}, {kappa}, {k}"
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `V(x) = Π_i V_i(x - x_i)`.
    #[default]
    Product,
    /// `V(x) = V_1(x - x_1)`.
    Single,
}

/// Growth bound `V(x) ≤ C·e^{β|x|}` for large `|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "C")]
    pub c: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(default)]
    pub composition: Composition,
    pub wells: Vec<WellSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
}

impl PotentialSpec {
    pub fn single(well: WellSpec) -> Self {
        Self {
            composition: Composition::Single,
            wells: vec![well],
            envelope: None,
        }
    }

    pub fn product(wells: Vec<WellSpec>) -> Self {
        Self {
            composition: Composition::Product,
            wells,
            envelope: None,
        }
    }

    /// `|x|²`.
    pub fn harmonic() -> Self {
        Self::single(WellSpec::isotropic([0.0, 0.0], 2.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.wells.is_empty() {
            return Err(Error::InvalidInput(
                "potential needs at least one well".into(),
            ));
        }
        if self.composition == Composition::Single && self.wells.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "single composition takes one well, got {}",
                self.wells.len()
            )));
        }
        for w in &self.wells {
            w.validate()?;
        }
        for (i, wi) in self.wells.iter().enumerate() {
            for wj in &self.wells[i + 1..] {
                if wi.x == wj.x {
                    return Err(Error::InvalidInput(format!(
                        "duplicate well location {:?}",
                        wi.x
                    )));
                }
            }
        }
        if let Some(e) = self.envelope {
            if !(e.c > 0.0) || !(e.beta > 0.0) {
                return Err(Error::InvalidInput(
                    "envelope needs C > 0 and beta > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.wells
            .iter()
            .map(|w| w.eval_local([x[0] - w.x[0], x[1] - w.x[1]]))
            .product()
    }

    pub fn sample(&self, grid: &GridSpec) -> SampledPotential {
        SampledPotential::from_fn(grid.clone(), |x, y| self.eval([x, y]))
    }

    /// The model `V_i` with `V(x_i + y)/V_i(y) → 1` as `y → 0`.
    pub fn effective_local_model(&self, i: usize) -> WellSpec {
        let wi = &self.wells[i];
        let factor: f64 = self
            .wells
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, wj)| wj.eval_local([wi.x[0] - wj.x[0], wi.x[1] - wj.x[1]]))
            .product();
        WellSpec {
            x: wi.x,
            p: wi.p,
            model: wi.model.scaled(factor),
        }
    }

    /// Checks the envelope bound along the eight compass rays at radii
    /// `10²` and `10³`. Without an envelope the check passes vacuously.
    pub fn within_envelope(&self) -> bool {
        let Some(e) = self.envelope else { return true };
        (0..8).all(|k| {
            let phi = k as f64 * std::f64::consts::FRAC_PI_4;
            [1e2, 1e3].iter().all(|&r| {
                let v = self.eval([r * phi.cos(), r * phi.sin()]);
                v.ln() <= e.c.ln() + e.beta * r
            })
        })
    }
}

/// Half-width of the box carrying the tensor quadrature for `H_i`.
pub const H_BOX: f64 = 14.0;
/// Largest degree the fixed box integrates reliably.
pub const MAX_DEGREE: f64 = 8.0;

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Composite Gauss–Legendre nodes and weights on `[lo, hi]`.
fn gauss_composite(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * GAUSS8.len());
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * width;
        for &(t, w) in &GAUSS8 {
            out.push((mid + 0.5 * width * t, 0.5 * width * w));
        }
    }
    out
}

/// Nodes `x` with weights `w·Q²(|x|)` approximating `∫f(x)Q²(x)dx`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<([f64; 2], f64)>,
}

impl QuadratureRule {
    pub fn new(profile: &RadialProfile) -> Self {
        let axis = gauss_composite(-H_BOX, H_BOX, 28);
        let mut nodes = Vec::with_capacity(axis.len() * axis.len());
        for &(y, wy) in &axis {
            for &(x, wx) in &axis {
                let q = profile.value((x * x + y * y).sqrt());
                let w = wx * wy * q * q;
                if w > 1e-300 {
                    nodes.push(([x, y], w));
                }
            }
        }
        // Outside the box: polar quadrature over r ≥ H_BOX, keeping only
        // points the box missed.
        let radial = gauss_composite(H_BOX, H_BOX + 16.0, 8);
        let n_phi = 128;
        for &(r, wr) in &radial {
            let q = profile.value(r);
            for m in 0..n_phi {
                let phi = std::f64::consts::TAU * m as f64 / n_phi as f64;
                let p = [r * phi.cos(), r * phi.sin()];
                if p[0].abs().max(p[1].abs()) > H_BOX {
                    let w = wr * r * std::f64::consts::TAU / n_phi as f64 * q * q;
                    if w > 1e-300 {
                        nodes.push((p, w));
                    }
                }
            }
        }
        Self { nodes }
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.nodes.iter().map(|&(x, w)| w * f(x)).sum()
    }

    /// `H(y)` and `∇H(y)` for one well model.
    fn h_and_gradient(&self, well: &WellSpec, y: [f64; 2]) -> (f64, [f64; 2]) {
        let (mut h, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for &(x, w) in &self.nodes {
            let z = [x[0] + y[0], x[1] + y[1]];
            h += w * well.model.eval(well.p, z);
            let g = well.model.gradient(well.p, z);
            gx += w * g[0];
            gy += w * g[1];
        }
        (h, [gx, gy])
    }
}

fn check_degree(well: &WellSpec) -> Result<()> {
    if well.p > MAX_DEGREE {
        return Err(Error::Accuracy(format!(
            "degree {} exceeds {MAX_DEGREE}; the quadrature box of half-width {H_BOX} is too small",
            well.p
        )));
    }
    Ok(())
}

/// `H(y) = ∫V_i(x + y)Q²(x)dx` for the local model of `well`.
pub fn h_function(well: &WellSpec, profile: &RadialProfile, y: [f64; 2]) -> Result<f64> {
    check_degree(well)?;
    Ok(QuadratureRule::new(profile).h_and_gradient(well, y).0)
}

pub fn h_gradient(well: &WellSpec, profile: &RadialProfile, y: [f64; 2]) -> Result<[f64; 2]> {
    check_degree(well)?;
    Ok(QuadratureRule::new(profile).h_and_gradient(well, y).1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellResult {
    pub index: usize,
    pub location: [f64; 2],
    pub degree: f64,
    pub lambda: f64,
    pub y_star: [f64; 2],
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellAnalysis {
    pub wells: Vec<WellResult>,
    /// `max_i p_i`.
    pub p: f64,
    /// Wells of maximal degree (0-based indices).
    pub z_bar: Vec<usize>,
    pub lambda0: f64,
    /// Flattest wells: members of `z_bar` with `λ_i = λ₀` up to [`TIE_TOL`].
    pub z0: Vec<usize>,
    pub warnings: Vec<String>,
}

impl WellAnalysis {
    /// The first flattest well: `(x_{i₀}, y₀)`.
    pub fn selected(&self) -> ([f64; 2], [f64; 2]) {
        let w = &self.wells[self.z0[0]];
        (w.location, w.y_star)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Relative tolerance for ties in `λ₀`.
pub const TIE_TOL: f64 = 1e-6;
/// Relative gradient tolerance for the per-well minimization.
pub const GRADIENT_TOL: f64 = 1e-8;
const SEED_LATTICE: usize = 5;
const SEED_EXTENT: f64 = 3.0;

struct Minimum {
    y: [f64; 2],
    f: f64,
    gnorm: f64,
    converged: bool,
}

/// BFGS with Armijo backtracking on a smooth function of two variables.
fn bfgs(f: impl Fn([f64; 2]) -> (f64, [f64; 2]), y0: [f64; 2], max_iter: usize) -> Minimum {
    let norm = |g: [f64; 2]| g[0].hypot(g[1]);
    let mut y = y0;
    let (mut fy, mut g) = f(y);
    let mut hinv = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..max_iter {
        if norm(g) <= GRADIENT_TOL * fy.abs().max(1.0) {
            return Minimum {
                y,
                f: fy,
                gnorm: norm(g),
                converged: true,
            };
        }
        let mut d = [
            -(hinv[0][0] * g[0] + hinv[0][1] * g[1]),
            -(hinv[1][0] * g[0] + hinv[1][1] * g[1]),
        ];
        let mut slope = d[0] * g[0] + d[1] * g[1];
        if slope >= 0.0 {
            hinv = [[1.0, 0.0], [0.0, 1.0]];
            d = [-g[0], -g[1]];
            slope = -(g[0] * g[0] + g[1] * g[1]);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = [y[0] + step * d[0], y[1] + step * d[1]];
            let (fc, gc) = f(cand);
            if fc.is_finite() && fc <= fy + 1e-4 * step * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((yn, fnew, gn)) = accepted else {
            break;
        };
        let s = [yn[0] - y[0], yn[1] - y[1]];
        let q = [gn[0] - g[0], gn[1] - g[1]];
        let sq = s[0] * q[0] + s[1] * q[1];
        if sq > 1e-300 {
            let hq = [
                hinv[0][0] * q[0] + hinv[0][1] * q[1],
                hinv[1][0] * q[0] + hinv[1][1] * q[1],
            ];
            let qhq = q[0] * hq[0] + q[1] * hq[1];
            let rho = 1.0 / sq;
            for i in 0..2 {
                for j in 0..2 {
                    hinv[i][j] +=
                        (1.0 + qhq * rho) * rho * s[i] * s[j] - rho * (hq[i] * s[j] + s[i] * hq[j]);
                }
            }
        }
        let stalled = (fy - fnew).abs() <= 1e-15 * fy.abs().max(1e-300);
        y = yn;
        fy = fnew;
        g = gn;
        if stalled {
            break;
        }
    }
    let converged = norm(g) <= GRADIENT_TOL * fy.abs().max(1.0);
    Minimum {
        y,
        f: fy,
        gnorm: norm(g),
        converged,
    }
}

/// Minimizes every `H_i` from a seed lattice and aggregates `p`, `Z̄`,
/// `λ₀` and `Z₀`.
pub fn analyze_wells(spec: &PotentialSpec, profile: &RadialProfile) -> Result<WellAnalysis> {
    spec.validate()?;
    for w in &spec.wells {
        check_degree(w)?;
    }
    let rule = QuadratureRule::new(profile);
    let mut wells = Vec::with_capacity(spec.wells.len());
    let mut warnings = Vec::new();
    for i in 0..spec.wells.len() {
        let local = spec.effective_local_model(i);
        let eval = |y: [f64; 2]| rule.h_and_gradient(&local, y);
        let mut best: Option<Minimum> = None;
        for sj in 0..SEED_LATTICE {
            for si in 0..SEED_LATTICE {
                let step = 2.0 * SEED_EXTENT / (SEED_LATTICE - 1) as f64;
                let seed = [
                    -SEED_EXTENT + si as f64 * step,
                    -SEED_EXTENT + sj as f64 * step,
                ];
                let m = bfgs(eval, seed, 200);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (m.converged && !b.converged) || (m.converged == b.converged && m.f < b.f)
                    }
                };
                if better {
                    best = Some(m);
                }
            }
        }
        let m = best.expect("seed lattice is nonempty");
        if !m.converged {
            warnings.push(format!(
                "well {i}: minimization of H did not converge (|grad| = {:.3e})",
                m.gnorm
            ));
        }
        wells.push(WellResult {
            index: i,
            location: spec.wells[i].x,
            degree: spec.wells[i].p,
            lambda: m.f,
            y_star: m.y,
            gradient_norm: m.gnorm,
            converged: m.converged,
        });
    }
    let p = wells
        .iter()
        .map(|w| w.degree)
        .fold(f64::NEG_INFINITY, f64::max);
    let z_bar: Vec<usize> = wells
        .iter()
        .filter(|w| w.degree == p)
        .map(|w| w.index)
        .collect();
    let candidates: Vec<&WellResult> = z_bar
        .iter()
        .map(|&i| &wells[i])
        .filter(|w| w.converged)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NotConverged {
            iterations: 200,
            residual: wells[z_bar[0]].gradient_norm,
        });
    }
    let lambda0 = candidates
        .iter()
        .map(|w| w.lambda)
        .fold(f64::INFINITY, f64::min);
    let z0 = candidates
        .iter()
        .filter(|w| (w.lambda - lambda0).abs() <= TIE_TOL * lambda0.abs())
        .map(|w| w.index)
        .collect();
    Ok(WellAnalysis {
        wells,
        p,
        z_bar,
        lambda0,
        z0,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::GroundState;
    use approx::assert_relative_eq;

    #[test]
    fn single_well_evaluation() {
        assert_eq!(PotentialSpec::harmonic().eval([3.0, 4.0]), 25.0);
    }

    #[test]
    fn product_vanishes_at_wells() {
        let spec = PotentialSpec::product(vec![
            WellSpec::isotropic([-1.0, 0.0], 2.0),
            WellSpec::isotropic([1.0, 0.0], 4.0),
        ]);
        assert_eq!(spec.eval([-1.0, 0.0]), 0.0);
        assert_eq!(spec.eval([1.0, 0.0]), 0.0);
        assert!(spec.eval([0.0, 0.5]) > 0.0);
    }

    #[test]
    fn near_well_ratio_tends_to_one() {
        let spec = PotentialSpec::product(vec![
            WellSpec::isotropic([-1.0, 0.0], 2.0),
            WellSpec::isotropic([1.0, 0.0], 4.0),
        ]);
        let local = spec.effective_local_model(0);
        let e = [0.6, 0.8];
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let y = [eps * e[0], eps * e[1]];
            let ratio = spec.eval([local.x[0] + y[0], local.x[1] + y[1]]) / local.eval_local(y);
            assert!((ratio - 1.0).abs() < last);
            last = (ratio - 1.0).abs();
        }
        assert!(last < 5e-3);
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"composition":"product","wells":[
            {"x":[-1,0],"p":2,"model":"isotropic","params":{"c":1}},
            {"x":[1,0],"p":4,"model":"dihedral","params":{"c":2,"kappa":0.3,"k":3}}],
            "envelope":{"C":1,"beta":1}}"#;
        let spec = PotentialSpec::from_json(text).unwrap();
        assert_eq!(
            spec.wells[1].model,
            LocalModel::Dihedral {
                c: 2.0,
                kappa: 0.3,
                k: 3
            }
        );
        let back: PotentialSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(spec.within_envelope());
    }

    #[test]
    fn rejects_bad_models() {
        let bad = PotentialSpec::single(WellSpec::new(
            [0.0, 0.0],
            4.0,
            LocalModel::Anisotropic { c1: 1.0, c2: 1.0 },
        ));
        assert!(bad.validate().is_err());
        let bad = PotentialSpec::single(WellSpec::new(
            [0.0, 0.0],
            2.0,
            LocalModel::Dihedral {
                c: 1.0,
                kappa: 1.0,
                k: 2,
            },
        ));
        assert!(bad.validate().is_err());
        assert!(PotentialSpec::product(vec![]).validate().is_err());
    }

    #[test]
    fn dihedral_gradient_matches_differences() {
        let m = LocalModel::Dihedral {
            c: 1.3,
            kappa: 0.4,
            k: 3,
        };
        let x = [0.7, -0.4];
        let g = m.gradient(2.5, x);
        let d = 1e-6;
        let fx = (m.eval(2.5, [x[0] + d, x[1]]) - m.eval(2.5, [x[0] - d, x[1]])) / (2.0 * d);
        let fy = (m.eval(2.5, [x[0], x[1] + d]) - m.eval(2.5, [x[0], x[1] - d])) / (2.0 * d);
        assert_relative_eq!(g[0], fx, max_relative = 1e-7);
        assert_relative_eq!(g[1], fy, max_relative = 1e-7);
    }

    #[test]
    fn harmonic_h_is_shifted_second_moment() {
        let gs = GroundState::reference();
        let w = WellSpec::isotropic([0.0, 0.0], 2.0);
        let h0 = h_function(&w, &gs.profile, [0.0, 0.0]).unwrap();
        assert_relative_eq!(h0, gs.constants.second_moment, max_relative = 1e-6);
        let h1 = h_function(&w, &gs.profile, [1.0, 0.0]).unwrap();
        assert!((h1 - h0 - gs.a_star()).abs() < 1e-3);
        let g = h_gradient(&w, &gs.profile, [0.0, 0.0]).unwrap();
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10);
    }

    #[test]
    fn rejects_very_high_degree() {
        let gs = GroundState::reference();
        let w = WellSpec::isotropic([0.0, 0.0], 9.0);
        assert!(matches!(
            h_function(&w, &gs.profile, [0.0, 0.0]),
            Err(Error::Accuracy(_))
        ));
    }

    #[test]
    fn two_well_selection_picks_the_quartic_well() {
        let gs = GroundState::reference();
        let spec = PotentialSpec::product(vec![
            WellSpec::isotropic([-1.0, 0.0], 2.0),
            WellSpec::isotropic([1.0, 0.0], 4.0),
        ]);
        let a = analyze_wells(&spec, &gs.profile).unwrap();
        assert_eq!(a.p, 4.0);
        assert_eq!(a.z_bar, vec![1]);
        assert_eq!(a.z0, vec![1]);
    }

    #[test]
    fn anisotropic_well_centers_at_origin() {
        let gs = GroundState::reference();
        let spec = PotentialSpec::single(WellSpec::new(
            [0.0, 0.0],
            2.0,
            LocalModel::Anisotropic { c1: 1.0, c2: 4.0 },
        ));
        let a = analyze_wells(&spec, &gs.profile).unwrap();
        assert_relative_eq!(
            a.lambda0,
            2.5 * gs.constants.second_moment,
            max_relative = 1e-6
        );
        let y = a.wells[0].y_star;
        assert!(y[0].hypot(y[1]) < 1e-6);
    }
}
