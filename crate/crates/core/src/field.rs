//! Scalar fields on a uniform square grid with homogeneous Dirichlet
//! boundary, and the energy functionals evaluated on them.
//!
//! Every quantity here is built from one discrete Dirichlet form
//! `θ(u) = h²·Σ u·(-Δ_h u)`, so the gradient returned by [`l2_gradient`] is
//! the exact derivative of [`energy`] on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-difference approximation of `-Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Second-order 5-point stencil.
    FivePoint,
    /// Fourth-order 9-point cross `(-1, 16, -30, 16, -1)/12h²` per axis.
    #[default]
    FourthOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Boundary {
    #[default]
    DirichletZero,
}

/// Uniform `n × n` grid covering `center ± half_width` on both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n: usize,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default)]
    pub boundary: Boundary,
}

pub const MIN_POINTS: usize = 32;

impl GridSpec {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        Self::centered(half_width, n, [0.0, 0.0])
    }

    pub fn centered(half_width: f64, n: usize, center: [f64; 2]) -> Result<Self> {
        let g = Self {
            half_width,
            n,
            center,
            stencil: Stencil::default(),
            boundary: Boundary::DirichletZero,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_POINTS {
            return Err(Error::InvalidInput(format!(
                "grid needs at least {MIN_POINTS} points per axis, got {}",
                self.n
            )));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid half-width must be positive, got {}",
                self.half_width
            )));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("grid center must be finite".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.center[0] - self.half_width + i as f64 * self.spacing()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.center[1] - self.half_width + j as f64 * self.spacing()
    }

    /// Physical coordinates of flat index `k` (row-major, `k = j·n + i`).
    pub fn point(&self, k: usize) -> [f64; 2] {
        [self.x(k % self.n), self.y(k / self.n)]
    }

    pub fn covers(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= self.half_width
            && (p[1] - self.center[1]).abs() <= self.half_width
    }

    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// Trapezoid weight of node `(i, j)` without the `h²` factor.
    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        let wi = if i == 0 || i == self.n - 1 { 0.5 } else { 1.0 };
        let wj = if j == 0 || j == self.n - 1 { 0.5 } else { 1.0 };
        wi * wj
    }
}

/// A real field on a [`GridSpec`]; boundary ring values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: GridSpec) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Samples `f(x, y)` at interior nodes; the boundary ring is set to zero.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n;
        let mut values = vec![0.0; grid.len()];
        for j in 1..n - 1 {
            let y = grid.y(j);
            for i in 1..n - 1 {
                values[j * n + i] = f(grid.x(i), y);
            }
        }
        Self { grid, values }
    }

    /// Wraps raw values, checking length, finiteness and the zero boundary.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at index {k}"
            )));
        }
        let n = grid.n;
        for j in 0..n {
            for i in 0..n {
                if grid.on_boundary(i, j) && values[j * n + i] != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "boundary value at ({i}, {j}) is not zero"
                    )));
                }
            }
        }
        Ok(Self { grid, values })
    }

    /// Like [`Field2D::from_values`] but zeroes the ring instead of failing.
    pub fn from_values_clamped(grid: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        let n = grid.n;
        if values.len() == grid.len() {
            for j in 0..n {
                for i in 0..n {
                    if grid.on_boundary(i, j) {
                        values[j * n + i] = 0.0;
                    }
                }
            }
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.n + i]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `∫u²` by the trapezoid rule.
    pub fn mass(&self) -> f64 {
        weighted_sum(&self.grid, |k| self.values[k] * self.values[k])
    }

    /// `∫|∇u|²` as the discrete Dirichlet form of the grid stencil.
    pub fn theta(&self) -> f64 {
        dirichlet_form(&self.grid, &self.values)
    }

    /// `∫u⁴` by the trapezoid rule.
    pub fn l4(&self) -> f64 {
        weighted_sum(&self.grid, |k| self.values[k].powi(4))
    }

    /// `h²·Σ u·v` (trapezoid inner product).
    pub fn dot(&self, other: &Field2D) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        weighted_sum(&self.grid, |k| self.values[k] * other.values[k])
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// Index of the largest value; ties resolve to the first index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.argmax()]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let tx = (x - (g.center[0] - g.half_width)) / h;
        let ty = (y - (g.center[1] - g.half_width)) / h;
        let last = (g.n - 1) as f64;
        if !(tx >= 0.0 && ty >= 0.0 && tx <= last && ty <= last) {
            return 0.0;
        }
        let i = (tx as usize).min(g.n - 2);
        let j = (ty as usize).min(g.n - 2);
        let sx = tx - i as f64;
        let sy = ty - j as f64;
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - sy) * ((1.0 - sx) * v00 + sx * v10) + sy * ((1.0 - sx) * v01 + sx * v11)
    }

    /// Resamples onto another grid by bilinear interpolation.
    pub fn resample(&self, grid: &GridSpec) -> Field2D {
        Field2D::from_fn(grid.clone(), |x, y| self.interpolate(x, y))
    }
}

/// A potential sampled on a grid (no boundary constraint).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    grid: GridSpec,
    values: Vec<f64>,
}

impl SampledPotential {
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n {
            let y = grid.y(j);
            for i in 0..grid.n {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn weighted_sum(grid: &GridSpec, f: impl Fn(usize) -> f64) -> f64 {
    let n = grid.n;
    let h2 = grid.spacing().powi(2);
    let mut total = 0.0;
    for j in 0..n {
        let mut row = 0.0;
        for i in 0..n {
            row += grid.weight(i, j) * f(j * n + i);
        }
        total += row;
    }
    total * h2
}

/// Writes `-Δ_h u` into `out` at interior nodes and zero on the ring.
/// Values outside the grid are taken as zero.
pub fn apply_neg_laplacian(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    out[..n].fill(0.0);
    out[(n - 1) * n..].fill(0.0);
    match grid.stencil {
        Stencil::FivePoint => {
            for j in 1..n - 1 {
                let row = j * n;
                out[row] = 0.0;
                out[row + n - 1] = 0.0;
                for i in 1..n - 1 {
                    let k = row + i;
                    out[k] = (4.0 * u[k] - u[k - 1] - u[k + 1] - u[k - n] - u[k + n]) * inv_h2;
                }
            }
        }
        Stencil::FourthOrder => {
            let c = inv_h2 / 12.0;
            let at = |i: isize, j: isize| -> f64 {
                if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                    0.0
                } else {
                    u[j as usize * n + i as usize]
                }
            };
            for j in 1..n - 1 {
                let row = j * n;
                out[row] = 0.0;
                out[row + n - 1] = 0.0;
                let interior = j >= 2 && j + 2 < n;
                for i in 1..n - 1 {
                    let k = row + i;
                    if interior && i >= 2 && i + 2 < n {
                        out[k] = c
                            * (60.0 * u[k] - 16.0 * (u[k - 1] + u[k + 1] + u[k - n] + u[k + n])
                                + (u[k - 2] + u[k + 2] + u[k - 2 * n] + u[k + 2 * n]));
                    } else {
                        let (ii, jj) = (i as isize, j as isize);
                        out[k] = c
                            * (60.0 * u[k]
                                - 16.0
                                    * (at(ii - 1, jj)
                                        + at(ii + 1, jj)
                                        + at(ii, jj - 1)
                                        + at(ii, jj + 1))
                                + (at(ii - 2, jj)
                                    + at(ii + 2, jj)
                                    + at(ii, jj - 2)
                                    + at(ii, jj + 2)));
                    }
                }
            }
        }
    }
}

/// `h²·Σ u·(-Δ_h u)`. For the 5-point stencil this is evaluated as the
/// forward-difference edge sum, which coincides with the quadratic form
/// whenever the ring is zero.
pub fn dirichlet_form(grid: &GridSpec, u: &[f64]) -> f64 {
    let n = grid.n;
    match grid.stencil {
        Stencil::FivePoint => {
            let mut total = 0.0;
            for j in 0..n {
                let mut row = 0.0;
                for i in 0..n {
                    let k = j * n + i;
                    if i + 1 < n {
                        let d = u[k + 1] - u[k];
                        row += d * d;
                    }
                    if j + 1 < n {
                        let d = u[k + n] - u[k];
                        row += d * d;
                    }
                }
                total += row;
            }
            total
        }
        Stencil::FourthOrder => {
            let mut lap = vec![0.0; u.len()];
            apply_neg_laplacian(grid, u, &mut lap);
            let h2 = grid.spacing().powi(2);
            let mut total = 0.0;
            for j in 1..n - 1 {
                let mut row = 0.0;
                for i in 1..n - 1 {
                    let k = j * n + i;
                    row += u[k] * lap[k];
                }
                total += row;
            }
            total * h2
        }
    }
}

/// `(∫u², ∫|∇u|², ∫u⁴)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldIntegrals {
    pub mass: f64,
    pub theta: f64,
    pub l4: f64,
}

pub fn field_integrals(u: &Field2D) -> Result<FieldIntegrals> {
    if !u.is_finite() {
        return Err(Error::InvalidInput(
            "field contains non-finite values".into(),
        ));
    }
    Ok(FieldIntegrals {
        mass: u.mass(),
        theta: u.theta(),
        l4: u.l4(),
    })
}

/// Rescales `u` to unit mass.
pub fn normalize(u: &Field2D) -> Result<Field2D> {
    let m = u.mass();
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "cannot normalize a field of mass {m}"
        )));
    }
    Ok(u.scaled(1.0 / m.sqrt()))
}

/// Parts of `E(u) = ½θ + ½∫Vu² + (b/4)θ² - (a/4)∫u⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub kirchhoff: f64,
    pub interaction: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn theta(&self) -> f64 {
        2.0 * self.kinetic
    }
}

/// `∫V u²`.
pub fn potential_integral(u: &Field2D, v: &SampledPotential) -> f64 {
    debug_assert_eq!(u.grid, v.grid);
    weighted_sum(&u.grid, |k| v.values[k] * u.values[k] * u.values[k])
}

/// Kirchhoff energy; with `v = None` this is the potential-free functional.
pub fn energy(u: &Field2D, a: f64, b: f64, v: Option<&SampledPotential>) -> EnergyBreakdown {
    let theta = u.theta();
    let kinetic = 0.5 * theta;
    let potential = v.map_or(0.0, |v| 0.5 * potential_integral(u, v));
    let kirchhoff = 0.25 * b * theta * theta;
    let interaction = -0.25 * a * u.l4();
    EnergyBreakdown {
        kinetic,
        potential,
        kirchhoff,
        interaction,
        total: kinetic + potential + kirchhoff + interaction,
    }
}

/// `a*·∫u⁴ / (2·θ·∫u²)`, at most 1 in the continuum.
pub fn gn_ratio(u: &Field2D, a_star: f64) -> Result<f64> {
    let FieldIntegrals { mass, theta, l4 } = field_integrals(u)?;
    if !(mass > 0.0) || !(theta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "GN ratio undefined for mass {mass}, theta {theta}"
        )));
    }
    Ok(a_star * l4 / (2.0 * theta * mass))
}

/// `g = -(1 + bθ)Δu + Vu - a·u³`, the `L²` gradient of [`energy`].
pub fn l2_gradient(u: &Field2D, a: f64, b: f64, v: Option<&SampledPotential>) -> Field2D {
    let theta = u.theta();
    let mut g = vec![0.0; u.values.len()];
    apply_neg_laplacian(&u.grid, &u.values, &mut g);
    let coeff = 1.0 + b * theta;
    let n = u.grid.n;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = j * n + i;
            let uk = u.values[k];
            let vk = v.map_or(0.0, |v| v.values[k]);
            g[k] = coeff * g[k] + vk * uk - a * uk * uk * uk;
        }
    }
    Field2D {
        grid: u.grid.clone(),
        values: g,
    }
}

/// Largest tolerated deviation from unit mass for multiplier evaluation.
pub const UNIT_MASS_TOL: f64 = 1e-8;

fn require_unit_mass(u: &Field2D) -> Result<()> {
    let m = u.mass();
    if (m - 1.0).abs() > UNIT_MASS_TOL {
        return Err(Error::Contract(format!(
            "field mass {m} is not 1 within {UNIT_MASS_TOL:e}"
        )));
    }
    Ok(())
}

/// `μ = θ + ∫Vu² + bθ² - a∫u⁴` for a unit-mass field.
pub fn lagrange_mu(u: &Field2D, a: f64, b: f64, v: Option<&SampledPotential>) -> Result<f64> {
    require_unit_mass(u)?;
    let theta = u.theta();
    let vint = v.map_or(0.0, |v| potential_integral(u, v));
    Ok(theta + vint + b * theta * theta - a * u.l4())
}

/// `‖g - μu‖₂` for a unit-mass field.
pub fn el_residual(u: &Field2D, a: f64, b: f64, v: Option<&SampledPotential>) -> Result<f64> {
    let mu = lagrange_mu(u, a, b, v)?;
    let g = l2_gradient(u, a, b, v);
    Ok(weighted_sum(&u.grid, |k| (g.values[k] - mu * u.values[k]).powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(stencil: Stencil) -> GridSpec {
        GridSpec::new(6.0, 97).unwrap().with_stencil(stencil)
    }

    fn bump(g: &GridSpec) -> Field2D {
        Field2D::from_fn(g.clone(), |x, y| {
            (-(x - 0.3).powi(2) - 0.5 * (y + 0.2).powi(2)).exp() * (1.0 + 0.2 * x)
        })
    }

    #[test]
    fn rejects_small_grids() {
        assert!(GridSpec::new(5.0, 31).is_err());
        assert!(GridSpec::new(0.0, 64).is_err());
    }

    #[test]
    fn zero_field_integrals() {
        let u = Field2D::zeros(grid(Stencil::FourthOrder));
        let ints = field_integrals(&u).unwrap();
        assert_eq!((ints.mass, ints.theta, ints.l4), (0.0, 0.0, 0.0));
        assert!(normalize(&u).is_err());
    }

    #[test]
    fn from_values_rejects_nonzero_ring() {
        let g = grid(Stencil::FivePoint);
        let mut v = vec![0.0; g.len()];
        v[0] = 1.0;
        assert!(Field2D::from_values(g.clone(), v).is_err());
        let mut v = vec![0.0; g.len()];
        v[g.n + 1] = f64::NAN;
        assert!(Field2D::from_values(g, v).is_err());
    }

    #[test]
    fn integration_by_parts_identity_five_point() {
        let g = grid(Stencil::FivePoint);
        let u = bump(&g);
        let mut lap = vec![0.0; g.len()];
        apply_neg_laplacian(&g, u.values(), &mut lap);
        let lap = Field2D::from_values(g.clone(), lap).unwrap();
        let by_parts = u.dot(&lap);
        assert_relative_eq!(by_parts, u.theta(), max_relative = 1e-10);
    }

    #[test]
    fn normalize_scales_and_is_idempotent() {
        let g = grid(Stencil::FourthOrder);
        let u = bump(&g);
        let m = u.mass();
        let scaled = u.scaled(2.0 / m.sqrt());
        assert_relative_eq!(scaled.mass(), 4.0, max_relative = 1e-12);
        let n1 = normalize(&scaled).unwrap();
        assert!((n1.mass() - 1.0).abs() < 1e-12);
        for (a, b) in n1.values().iter().zip(scaled.values()) {
            assert_relative_eq!(*a, 0.5 * b, max_relative = 1e-12, epsilon = 1e-300);
        }
        let n2 = normalize(&n1).unwrap();
        for (a, b) in n1.values().iter().zip(n2.values()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs());
        }
    }

    #[test]
    fn gradient_with_degenerate_coefficients_is_the_stencil() {
        let g = grid(Stencil::FourthOrder);
        let u = bump(&g);
        let grad = l2_gradient(&u, 0.0, 0.0, None);
        let mut lap = vec![0.0; g.len()];
        apply_neg_laplacian(&g, u.values(), &mut lap);
        assert_eq!(grad.values(), &lap[..]);
        let doubled = l2_gradient(&u.scaled(2.0), 0.0, 0.0, None);
        for (d, s) in doubled.values().iter().zip(grad.values()) {
            assert_relative_eq!(*d, 2.0 * s, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn multiplier_requires_unit_mass() {
        let g = grid(Stencil::FourthOrder);
        let u = bump(&g).scaled(3.0);
        assert!(matches!(
            lagrange_mu(&u, 1.0, 0.1, None),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            el_residual(&u, 1.0, 0.1, None),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn multiplier_is_nonnegative_without_interaction() {
        let g = grid(Stencil::FourthOrder);
        let u = normalize(&bump(&g)).unwrap();
        let v = SampledPotential::from_fn(g.clone(), |x, y| x * x + y * y);
        assert!(lagrange_mu(&u, 0.0, 0.0, Some(&v)).unwrap() >= 0.0);
    }

    #[test]
    fn energy_parts_sum_to_total() {
        let g = grid(Stencil::FourthOrder);
        let u = normalize(&bump(&g)).unwrap();
        let v = SampledPotential::from_fn(g.clone(), |x, y| x * x + 2.0 * y * y);
        let e = energy(&u, 3.0, 0.2, Some(&v));
        assert_eq!(
            e.total,
            e.kinetic + e.potential + e.kirchhoff + e.interaction
        );
        let e0 = energy(&u, 3.0, 0.0, Some(&v));
        assert_eq!(e0.kirchhoff, 0.0);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = grid(Stencil::FourthOrder);
        let u = bump(&g);
        for &(i, j) in &[(5usize, 7usize), (48, 48), (90, 3)] {
            assert_relative_eq!(
                u.interpolate(g.x(i), g.y(j)),
                u.at(i, j),
                max_relative = 1e-12,
                epsilon = 1e-15
            );
        }
        assert_eq!(u.interpolate(100.0, 0.0), 0.0);
    }
}
