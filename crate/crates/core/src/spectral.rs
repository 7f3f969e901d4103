//! Spectral densities on the unit sphere, the Fourier symbol `A(ξ)` of the
//! operator, its square root, and the kernel density `b` of the half-order
//! operator `L^{1/2}`.
//!
//! Everything here lives in dimension 1 or 2. On the circle an even density
//! is `π`-periodic, so only even trigonometric modes occur and all zonal
//! pairings `ν ↦ ∫ |ν·θ|^p f(θ) dθ` act diagonally on those modes with
//! multipliers `m_k(p) = ∫_0^{2π} |cos ψ|^p cos(kψ) dψ`. The mode-by-mode
//! route is what makes the first-kind inversion for `b` well behaved.

use std::f64::consts::PI;

use crate::numeric::quad;
use crate::numeric::special::{
    fractional_laplacian_density, half_eval_scale, symbol_constant, DEFAULT_S_RANGE,
};
use crate::{Error, Result};

/// Tolerance for the paired-node evenness check (relative to the max sample).
const EVENNESS_TOL: f64 = 1e-12;

/// Hard threshold below which a zonal multiplier is considered vanishing and
/// the mode inversion refuses to divide.
const MULTIPLIER_THRESHOLD: f64 = 1e-12;

/// Normalization constant `c_s` of the Fourier symbol, restricted to the
/// default order range.
pub fn pohozaev_constant(s: f64) -> Result<f64> {
    symbol_constant(s, DEFAULT_S_RANGE)
}

/// Same constant with a caller-chosen admissible range for `s`.
pub fn pohozaev_constant_in(s: f64, range: (f64, f64)) -> Result<f64> {
    symbol_constant(s, range)
}

// ---------------------------------------------------------------------------
// trigonometric series on the circle (even modes only)
// ---------------------------------------------------------------------------

/// Truncated series `c₀ + Σ_j (c_j cos(2jφ) + s_j sin(2jφ))` for smooth
/// `π`-periodic functions on the circle.
#[derive(Debug, Clone)]
pub struct EvenSeries {
    pub mean: f64,
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

impl EvenSeries {
    /// Discrete Fourier analysis of equispaced samples at `φ_i = 2πi/N`.
    /// Keeps even modes `k = 2j` with `j = 1..N/4`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let jmax = n / 4;
        let mean = samples.iter().sum::<f64>() / n as f64;
        let mut cos_coeffs = Vec::with_capacity(jmax);
        let mut sin_coeffs = Vec::with_capacity(jmax);
        for j in 1..=jmax {
            let k = (2 * j) as f64;
            let mut c = 0.0;
            let mut s = 0.0;
            for (i, &v) in samples.iter().enumerate() {
                let phi = 2.0 * PI * i as f64 / n as f64;
                c += v * (k * phi).cos();
                s += v * (k * phi).sin();
            }
            if 2 * j == n / 2 {
                // Nyquist mode of the π-periodic sample set: half weight,
                // and its sine is not identifiable from the nodes
                cos_coeffs.push(c / n as f64);
                sin_coeffs.push(0.0);
            } else {
                cos_coeffs.push(2.0 * c / n as f64);
                sin_coeffs.push(2.0 * s / n as f64);
            }
        }
        Self { mean, cos_coeffs, sin_coeffs }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        let mut acc = self.mean;
        for (j, (&c, &s)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let k = 2.0 * (j + 1) as f64;
            acc += c * (k * phi).cos() + s * (k * phi).sin();
        }
        acc
    }

    /// Apply a zonal convolution diagonally: mode `k` is scaled by
    /// `multiplier(k)`.
    pub fn zonal_map(&self, multiplier: impl Fn(usize) -> f64) -> Self {
        Self {
            mean: self.mean * multiplier(0),
            cos_coeffs: self
                .cos_coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| c * multiplier(2 * (j + 1)))
                .collect(),
            sin_coeffs: self
                .sin_coeffs
                .iter()
                .enumerate()
                .map(|(j, &s)| s * multiplier(2 * (j + 1)))
                .collect(),
        }
    }
}

/// Zonal multipliers `m_k(p) = ∫_0^{2π} |cos ψ|^p cos(kψ) dψ` for
/// `k = 0..=k_max`, by adaptive quadrature with subdivision at the
/// derivative singularities `cos ψ = 0`. Odd `k` vanish identically.
pub fn zonal_multipliers(p: f64, k_max: usize) -> Vec<f64> {
    let breaks = [PI / 2.0, 1.5 * PI];
    (0..=k_max)
        .map(|k| {
            if k % 2 == 1 {
                0.0
            } else {
                let kf = k as f64;
                quad::adaptive_split(
                    &|psi: f64| psi.cos().abs().powf(p) * (kf * psi).cos(),
                    0.0,
                    2.0 * PI,
                    &breaks,
                    1e-13,
                )
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// spectral densities
// ---------------------------------------------------------------------------

/// Even nonnegative density `a(θ)` on the unit sphere with its measured
/// ellipticity record. For `n = 1` the sphere is the two-point set `{±1}`
/// and `samples` has length two (`θ = +1` first).
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    dim: usize,
    samples: Vec<f64>,
    series: Option<EvenSeries>,
    lambda_measured: f64,
    upper_measured: f64,
}

impl SpectralDensity {
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        match dim {
            1 => {
                if samples.len() != 2 {
                    return Err(Error::Validation(
                        "1-D spectral density needs exactly two samples".into(),
                    ));
                }
            }
            2 => {
                if samples.len() < 8 || samples.len() % 4 != 0 {
                    return Err(Error::Validation(format!(
                        "2-D spectral density needs N divisible by 4, got {}",
                        samples.len()
                    )));
                }
            }
            _ => return Err(Error::Validation(format!("unsupported dimension {dim}"))),
        }
        let scale = samples.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1e-300);
        for (i, &v) in samples.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "density sample {i} is negative or non-finite: {v}"
                )));
            }
            let opposite = samples[(i + samples.len() / 2) % samples.len()];
            if (v - opposite).abs() > EVENNESS_TOL * scale {
                return Err(Error::Validation(format!(
                    "evenness violated at node {i}: a(θ) = {v} vs a(−θ) = {opposite}"
                )));
            }
        }
        let mut density = Self {
            dim,
            samples,
            series: None,
            lambda_measured: 0.0,
            upper_measured: 0.0,
        };
        density.lambda_measured = density.mass();
        density.upper_measured = density.samples.iter().cloned().fold(0.0, f64::max);
        if density.lambda_measured <= 0.0 {
            return Err(Error::Validation(
                "lower ellipticity violated: total mass of the density is zero".into(),
            ));
        }
        if dim == 2 {
            density.series = Some(EvenSeries::from_samples(&density.samples));
        }
        Ok(density)
    }

    /// Constant density at the given level.
    pub fn constant(dim: usize, n_sphere: usize, value: f64) -> Result<Self> {
        let len = if dim == 1 { 2 } else { n_sphere };
        Self::new(dim, vec![value; len])
    }

    /// Density from a smooth even angle profile `f(φ)` (2-D).
    pub fn from_fn(n_sphere: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..n_sphere)
            .map(|i| f(2.0 * PI * i as f64 / n_sphere as f64))
            .collect();
        Self::new(2, samples)
    }

    /// The isotropic density normalized so that the operator is the
    /// fractional Laplacian of order `2s` (symbol identically `|ξ|^{2s}`).
    pub fn isotropic_normalized(dim: usize, s: f64, n_sphere: usize) -> Result<Self> {
        Self::constant(dim, n_sphere, fractional_laplacian_density(dim, s))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n_sphere(&self) -> usize {
        self.samples.len()
    }

    /// Quadrature of `∫ a dσ` (counting measure on the two-point sphere).
    pub fn mass(&self) -> f64 {
        match self.dim {
            1 => self.samples[0] + self.samples[1],
            _ => quad::periodic_trapezoid(&self.samples, 2.0 * PI),
        }
    }

    /// Measured ellipticity record `(λ, Λ)`.
    pub fn ellipticity(&self) -> (f64, f64) {
        (self.lambda_measured, self.upper_measured)
    }

    /// Smooth evaluation at an arbitrary angle (2-D; trig interpolation).
    pub fn eval_angle(&self, phi: f64) -> f64 {
        match self.dim {
            1 => self.samples[0],
            _ => self.series.as_ref().expect("2-D density has a series").eval(phi),
        }
    }

    /// Periodic convolution with a nonnegative wrapped-Gaussian bump of the
    /// given angular width. Width zero is the identity. Preserves evenness,
    /// nonnegativity and total mass.
    pub fn mollify(&self, width: f64) -> Result<Self> {
        if width < 0.0 {
            return Err(Error::Domain("mollification width must be ≥ 0".into()));
        }
        if width == 0.0 || self.dim == 1 {
            return Ok(self.clone());
        }
        let n = self.samples.len();
        let mut kernel = vec![0.0; n];
        for (j, k) in kernel.iter_mut().enumerate() {
            let mut phi = 2.0 * PI * j as f64 / n as f64;
            if phi > PI {
                phi -= 2.0 * PI;
            }
            // wrap a couple of periods; the tail beyond is negligible
            for wrap in -2..=2 {
                let t = phi + 2.0 * PI * wrap as f64;
                *k += (-0.5 * (t / width) * (t / width)).exp();
            }
        }
        let total: f64 = kernel.iter().sum();
        for k in kernel.iter_mut() {
            *k /= total;
        }
        let smoothed: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| kernel[j] * self.samples[(i + n - j) % n])
                    .sum()
            })
            .collect();
        Self::new(2, smoothed)
    }
}

/// Atomic spectral measure: direction/weight pairs, directions treated as
/// even (`θ ~ −θ`). Angles are radians on the circle for `n = 2`; for
/// `n = 1` use angles `0` and `π` for the directions `±1`.
#[derive(Debug, Clone)]
pub struct AtomicSpectralMeasure {
    dim: usize,
    atoms: Vec<(f64, f64)>,
}

impl AtomicSpectralMeasure {
    pub fn new(dim: usize, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Validation(format!("unsupported dimension {dim}")));
        }
        if atoms.is_empty() {
            return Err(Error::Validation("atomic measure needs at least one atom".into()));
        }
        for &(angle, w) in &atoms {
            if !(w > 0.0) || !angle.is_finite() {
                return Err(Error::Validation(format!(
                    "atom ({angle}, {w}) must have a positive finite weight"
                )));
            }
        }
        Ok(Self { dim, atoms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    /// Measured lower ellipticity `inf_ν Σ m_k |ν·θ_k|^{2s}` (scan over a
    /// fine angle grid plus the exact perpendiculars of every atom, where
    /// the infimum is attained for a single atom).
    pub fn ellipticity(&self, s: f64) -> f64 {
        if self.dim == 1 {
            return self.total_mass();
        }
        let value = |nu: f64| -> f64 {
            self.atoms
                .iter()
                .map(|&(angle, w)| w * (nu - angle).cos().abs().powf(2.0 * s))
                .sum()
        };
        let mut min = f64::INFINITY;
        for i in 0..720 {
            min = min.min(value(PI * i as f64 / 720.0));
        }
        for &(angle, _) in &self.atoms {
            min = min.min(value(angle + PI / 2.0));
        }
        min
    }
}

// ---------------------------------------------------------------------------
// the Fourier symbol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum SymbolBackend {
    /// Smooth density: the symbol is a rapidly converging even series.
    Series(EvenSeries),
    /// Atomic measure: evaluate `c_s Σ m_k |ν·θ_k|^{2s}` directly.
    Atoms(Vec<(f64, f64)>),
    /// 1-D: the two-point sphere makes the symbol a constant.
    Constant(f64),
}

/// Homogeneous symbol `A(ξ) = |ξ|^{2s} A(ξ/|ξ|)`, even and positive on the
/// sphere.
#[derive(Debug, Clone)]
pub struct StableSymbol {
    dim: usize,
    s: f64,
    c_s: f64,
    backend: SymbolBackend,
    node_values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl StableSymbol {
    /// Symbol of the operator with smooth spectral density `a`:
    /// `A(ν) = c_s ∫ |ν·θ|^{2s} a(θ) dθ`, evaluated mode-by-mode through
    /// the zonal multipliers `m_k(2s)` (exact for the trigonometric
    /// interpolant of the samples, and stable under node refinement).
    pub fn from_density(a: &SpectralDensity, s: f64) -> Result<Self> {
        let c_s = pohozaev_constant(s)?;
        let (lambda, _upper) = a.ellipticity();
        if lambda <= 0.0 {
            return Err(Error::Validation("density is not elliptic".into()));
        }
        match a.dim() {
            1 => {
                // |ν·θ| = 1 on the two-point sphere.
                let value = c_s * (a.samples()[0] + a.samples()[1]);
                Ok(Self::constant_symbol(1, s, c_s, value, 2))
            }
            _ => {
                let mult = zonal_multipliers(2.0 * s, a.n_sphere() / 2);
                let series = a
                    .series
                    .as_ref()
                    .expect("2-D density has a series")
                    .zonal_map(|k| c_s * mult[k]);
                let n = a.n_sphere();
                let node_values: Vec<f64> =
                    (0..n).map(|i| series.eval(2.0 * PI * i as f64 / n as f64)).collect();
                Self::finish(2, s, c_s, SymbolBackend::Series(series), node_values)
            }
        }
    }

    /// Symbol of the operator with atomic spectral measure:
    /// `A(ν) = c_s Σ m_k |ν·θ_k|^{2s}`.
    pub fn from_atomic(mu: &AtomicSpectralMeasure, s: f64) -> Result<Self> {
        let c_s = pohozaev_constant(s)?;
        let lambda = mu.ellipticity(s);
        if lambda <= 1e-14 * mu.total_mass().max(1.0) {
            return Err(Error::Validation(format!(
                "atomic measure is not elliptic: inf_ν Σ m_k |ν·θ_k|^{{2s}} = {lambda:.3e}"
            )));
        }
        if mu.dim() == 1 {
            let value = c_s * mu.total_mass();
            return Ok(Self::constant_symbol(1, s, c_s, value, 2));
        }
        let atoms = mu.atoms().to_vec();
        let n = 256;
        let backend = SymbolBackend::Atoms(atoms);
        let probe = Self {
            dim: 2,
            s,
            c_s,
            backend,
            node_values: Vec::new(),
            lower: 0.0,
            upper: 0.0,
        };
        let node_values: Vec<f64> =
            (0..n).map(|i| probe.sphere_value(2.0 * PI * i as f64 / n as f64)).collect();
        Self::finish(2, s, c_s, probe.backend, node_values)
    }

    fn constant_symbol(dim: usize, s: f64, c_s: f64, value: f64, n_nodes: usize) -> Self {
        Self {
            dim,
            s,
            c_s,
            backend: SymbolBackend::Constant(value),
            node_values: vec![value; n_nodes],
            lower: value,
            upper: value,
        }
    }

    fn finish(
        dim: usize,
        s: f64,
        c_s: f64,
        backend: SymbolBackend,
        node_values: Vec<f64>,
    ) -> Result<Self> {
        let mut sym = Self { dim, s, c_s, backend, node_values, lower: 0.0, upper: 0.0 };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..1024 {
            let v = sym.sphere_value(2.0 * PI * i as f64 / 1024.0);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        sym.lower = lo;
        sym.upper = hi;
        if lo <= 0.0 {
            return Err(Error::Validation(format!(
                "symbol is not positive on the sphere (min = {lo:.6e})"
            )));
        }
        Ok(sym)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn constant(&self) -> f64 {
        self.c_s
    }

    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    /// Positivity bounds measured on a fine sphere scan.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Value on the sphere at the direction with the given angle (for
    /// `n = 1` the argument is ignored; the symbol is constant on `{±1}`).
    pub fn sphere_value(&self, phi: f64) -> f64 {
        match &self.backend {
            SymbolBackend::Constant(v) => *v,
            SymbolBackend::Series(series) => series.eval(phi),
            SymbolBackend::Atoms(atoms) => {
                self.c_s
                    * atoms
                        .iter()
                        .map(|&(angle, w)| w * (phi - angle).cos().abs().powf(2.0 * self.s))
                        .sum::<f64>()
            }
        }
    }

    /// Full homogeneous extension `A(ξ) = |ξ|^{2s} A(ξ/|ξ|)`.
    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let phi = xi[1].atan2(xi[0]);
        r.powf(2.0 * self.s) * self.sphere_value(phi)
    }

    /// Square root on the sphere (symbol of `L^{1/2}` up to homogeneity).
    pub fn sqrt_sphere(&self, phi: f64) -> f64 {
        self.sphere_value(phi).sqrt()
    }

    /// `√A` extended homogeneously with degree `s`.
    pub fn sqrt_eval(&self, xi: [f64; 2]) -> f64 {
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let phi = xi[1].atan2(xi[0]);
        r.powf(self.s) * self.sphere_value(phi).sqrt()
    }
}

/// The square-root symbol as its own value type (order-`s` homogeneous).
#[derive(Debug, Clone)]
pub struct SqrtSymbol {
    base: StableSymbol,
}

impl SqrtSymbol {
    pub fn from_symbol(base: &StableSymbol) -> Self {
        Self { base: base.clone() }
    }

    pub fn order(&self) -> f64 {
        self.base.order() / 2.0
    }

    pub fn sphere_value(&self, phi: f64) -> f64 {
        self.base.sqrt_sphere(phi)
    }

    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.base.sqrt_eval(xi)
    }
}

// ---------------------------------------------------------------------------
// kernel density of the half-order operator
// ---------------------------------------------------------------------------

/// Kernel density `b(θ)` of `L^{1/2}`, normalized so that
/// `∫ |ν·θ|^s b(θ) dθ = √A(ν)` at every sphere node. `b` is even but need
/// not be nonnegative. The evaluator scale turns the raw quadrature with
/// this density into an operator with Fourier symbol exactly `√A`.
#[derive(Debug, Clone)]
pub struct HalfKernelDensity {
    dim: usize,
    s: f64,
    samples: Vec<f64>,
    series: Option<EvenSeries>,
    /// `n + s`
    pub kernel_exponent: f64,
    /// multiplicative scale applied by the evaluator
    pub eval_scale: f64,
    pub n_modes: usize,
    pub max_residual: f64,
}

impl HalfKernelDensity {
    /// Invert the sphere pairing mode-by-mode (2-D), or solve the two-point
    /// system (1-D). Requires a symbol backed by a smooth density; atomic
    /// symbols have kinks on the sphere and are out of scope here.
    pub fn from_symbol(symbol: &StableSymbol) -> Result<Self> {
        let s = symbol.order();
        let scale = half_eval_scale(s);
        match symbol.dim() {
            1 => {
                // ∫ |ν·θ|^s b over {±1} = 2b, so b = √A / 2.
                let b = symbol.sphere_value(0.0).sqrt() / 2.0;
                Ok(Self {
                    dim: 1,
                    s,
                    samples: vec![b, b],
                    series: None,
                    kernel_exponent: 1.0 + s,
                    eval_scale: scale,
                    n_modes: 1,
                    max_residual: 0.0,
                })
            }
            _ => {
                if matches!(symbol.backend, SymbolBackend::Atoms(_)) {
                    return Err(Error::Validation(
                        "half-kernel inversion needs a smooth spectral density".into(),
                    ));
                }
                let n = symbol.node_values().len();
                let sqrt_nodes: Vec<f64> =
                    (0..n).map(|i| symbol.sqrt_sphere(2.0 * PI * i as f64 / n as f64)).collect();
                let target = EvenSeries::from_samples(&sqrt_nodes);
                let mult = zonal_multipliers(s, n / 2);
                for (k, &m) in mult.iter().enumerate().step_by(2) {
                    if m.abs() < MULTIPLIER_THRESHOLD && k <= 2 * target.cos_coeffs.len() {
                        return Err(Error::IllConditioned { mode: k, multiplier: m });
                    }
                }
                let series = target.zonal_map(|k| 1.0 / mult[k]);
                let samples: Vec<f64> =
                    (0..n).map(|i| series.eval(2.0 * PI * i as f64 / n as f64)).collect();

                // forward check: the pairing must reproduce √A at the nodes
                let forward = series.zonal_map(|k| mult[k]);
                let max_residual = (0..n)
                    .map(|i| {
                        let phi = 2.0 * PI * i as f64 / n as f64;
                        (forward.eval(phi) - sqrt_nodes[i]).abs()
                    })
                    .fold(0.0, f64::max);

                Ok(Self {
                    dim: 2,
                    s,
                    samples,
                    series: Some(series),
                    kernel_exponent: 2.0 + s,
                    eval_scale: scale,
                    n_modes: n / 4,
                    max_residual,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Density value at an arbitrary angle.
    pub fn eval_angle(&self, phi: f64) -> f64 {
        match self.dim {
            1 => self.samples[0],
            _ => self.series.as_ref().expect("2-D kernel density has a series").eval(phi),
        }
    }

    /// Forward sphere pairing `∫ |ν·θ|^s b(θ) dθ` by direct quadrature with
    /// subdivision at the kernel kinks (independent of the mode route).
    pub fn forward_pairing(&self, nu_angle: f64) -> f64 {
        match self.dim {
            1 => 2.0 * self.samples[0],
            _ => {
                let breaks = [nu_angle + PI / 2.0, nu_angle + 1.5 * PI];
                let wrapped: Vec<f64> = breaks
                    .iter()
                    .map(|&b| b.rem_euclid(2.0 * PI))
                    .collect();
                quad::adaptive_split(
                    &|theta: f64| {
                        (nu_angle - theta).cos().abs().powf(self.s) * self.eval_angle(theta)
                    },
                    0.0,
                    2.0 * PI,
                    &wrapped,
                    1e-12,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::zonal_multiplier_closed_form;

    #[test]
    fn multipliers_match_closed_form() {
        for &p in &[0.3, 0.5, 1.0, 1.3] {
            let m = zonal_multipliers(p, 12);
            for k in 0..=12 {
                let exact = zonal_multiplier_closed_form(p, k);
                assert!(
                    (m[k] - exact).abs() < 1e-10,
                    "p = {p}, k = {k}: {} vs {exact}",
                    m[k]
                );
            }
        }
    }

    #[test]
    fn constant_density_symbol_closed_form() {
        // n = 2, s = 1/2, a ≡ a₀:  A(ν) = c_{1/2} a₀ ∫|cos| = 4π a₀.
        let a0 = 0.37;
        let a = SpectralDensity::constant(2, 64, a0).unwrap();
        let sym = StableSymbol::from_density(&a, 0.5).unwrap();
        for i in 0..64 {
            let v = sym.sphere_value(2.0 * PI * i as f64 / 64.0);
            assert!((v - 4.0 * PI * a0).abs() < 1e-10, "node {i}: {v}");
        }
    }

    #[test]
    fn normalized_density_gives_unit_symbol() {
        for &dim in &[1usize, 2] {
            for &s in &[0.3, 0.5, 0.75] {
                let a = SpectralDensity::isotropic_normalized(dim, s, 128).unwrap();
                let sym = StableSymbol::from_density(&a, s).unwrap();
                for &v in sym.node_values() {
                    assert!((v - 1.0).abs() < 1e-10, "dim {dim}, s {s}: A = {v}");
                }
            }
        }
    }

    #[test]
    fn symbol_evenness_and_homogeneity() {
        let a = SpectralDensity::from_fn(128, |phi| 1.0 + 0.7 * (2.0 * phi).cos()).unwrap();
        let s = 0.65;
        let sym = StableSymbol::from_density(&a, s).unwrap();
        for i in 0..32 {
            let phi = 2.0 * PI * i as f64 / 32.0;
            let v = sym.sphere_value(phi);
            let w = sym.sphere_value(phi + PI);
            assert!((v - w).abs() < 1e-12 * v.abs());
        }
        // homogeneity is exact by construction
        let xi = [0.3, -0.8];
        for &t in &[0.5, 2.0, 7.3] {
            let lhs = sym.eval([t * xi[0], t * xi[1]]);
            let rhs = t.powf(2.0 * s) * sym.eval(xi);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn sqrt_symbol_squares_back() {
        let a = SpectralDensity::from_fn(128, |phi| 0.4 + 0.3 * (4.0 * phi).sin().powi(2)).unwrap();
        let sym = StableSymbol::from_density(&a, 0.4).unwrap();
        let root = SqrtSymbol::from_symbol(&sym);
        for i in 0..64 {
            let phi = 2.0 * PI * i as f64 / 64.0;
            let b = root.sphere_value(phi);
            assert!((b * b - sym.sphere_value(phi)).abs() < 1e-13 * sym.sphere_value(phi));
        }
    }

    #[test]
    fn refinement_stability_of_symbol() {
        // Refining N_sphere 128 -> 256 moves the symbol by ≲ 1e-6 relative.
        let profile = |phi: f64| 1.0 + 0.5 * (2.0 * phi).cos() + 0.2 * (4.0 * phi).sin();
        let s = 0.5;
        let coarse = StableSymbol::from_density(
            &SpectralDensity::from_fn(128, profile).unwrap(),
            s,
        )
        .unwrap();
        let fine = StableSymbol::from_density(
            &SpectralDensity::from_fn(256, profile).unwrap(),
            s,
        )
        .unwrap();
        for i in 0..128 {
            let phi = 2.0 * PI * i as f64 / 128.0;
            let c = coarse.sphere_value(phi);
            let f = fine.sphere_value(phi);
            assert!((c - f).abs() / f.abs() < 1e-6, "node {i}: {c} vs {f}");
        }
    }

    #[test]
    fn validation_rejects_bad_densities() {
        // odd-asymmetric samples
        let mut samples = vec![1.0; 16];
        samples[3] = 2.0; // breaks a(θ) = a(−θ)
        assert!(matches!(
            SpectralDensity::new(2, samples),
            Err(Error::Validation(_))
        ));
        // negative sample (kept even so the evenness check passes)
        let mut neg = vec![1.0; 16];
        neg[1] = -0.5;
        neg[9] = -0.5;
        assert!(SpectralDensity::new(2, neg).is_err());
        // zero mass
        assert!(SpectralDensity::new(2, vec![0.0; 16]).is_err());
    }

    #[test]
    fn atomic_ellipticity() {
        // a single atom in 2-D is degenerate (symbol vanishes at ν ⊥ θ)
        let single = AtomicSpectralMeasure::new(2, vec![(0.0, 1.0)]).unwrap();
        assert!(StableSymbol::from_atomic(&single, 0.5).is_err());
        // two orthogonal atoms are elliptic
        let cross = AtomicSpectralMeasure::new(2, vec![(0.0, 1.0), (PI / 2.0, 1.0)]).unwrap();
        let sym = StableSymbol::from_atomic(&cross, 0.5).unwrap();
        let (lo, hi) = sym.bounds();
        assert!(lo > 0.0 && hi < f64::INFINITY);
    }

    #[test]
    fn half_kernel_two_point_and_isotropic() {
        // n = 1: b = √A / 2 exactly.
        let a1 = SpectralDensity::isotropic_normalized(1, 0.5, 2).unwrap();
        let sym1 = StableSymbol::from_density(&a1, 0.5).unwrap();
        let b1 = HalfKernelDensity::from_symbol(&sym1).unwrap();
        assert!((b1.samples()[0] - 0.5).abs() < 1e-12);

        // n = 2 isotropic: b is the constant √A / m₀(s).
        let s = 0.6;
        let a2 = SpectralDensity::isotropic_normalized(2, s, 128).unwrap();
        let sym2 = StableSymbol::from_density(&a2, s).unwrap();
        let b2 = HalfKernelDensity::from_symbol(&sym2).unwrap();
        let m0 = zonal_multiplier_closed_form(s, 0);
        for &v in b2.samples() {
            assert!((v - 1.0 / m0).abs() < 1e-10, "b = {v}, expected {}", 1.0 / m0);
        }
        assert!(b2.max_residual < 1e-10);
        // independent quadrature of the forward pairing
        let fwd = b2.forward_pairing(0.3);
        assert!((fwd - 1.0).abs() < 1e-8, "forward pairing = {fwd}");
    }

    #[test]
    fn half_kernel_anisotropic_round_trip() {
        let a = SpectralDensity::from_fn(256, |phi| 1.0 + 0.8 * (2.0 * phi).cos()).unwrap();
        let sym = StableSymbol::from_density(&a, 0.5).unwrap();
        let b = HalfKernelDensity::from_symbol(&sym).unwrap();
        assert!(b.max_residual < 1e-8, "round-trip residual = {}", b.max_residual);
        // spot-check against direct quadrature at off-node angles
        for &nu in &[0.17, 1.3, 2.9] {
            let fwd = b.forward_pairing(nu);
            let target = sym.sqrt_sphere(nu);
            assert!((fwd - target).abs() < 1e-6, "ν = {nu}: {fwd} vs {target}");
        }
    }

    #[test]
    fn mollify_identity_mass_and_ellipticity() {
        let spike = |phi: f64| {
            let d2 = |c: f64| {
                let mut t = (phi - c).rem_euclid(2.0 * PI);
                if t > PI {
                    t = 2.0 * PI - t;
                }
                t * t
            };
            (-d2(0.4) / 1e-3).exp() + (-d2(0.4 + PI) / 1e-3).exp()
        };
        let a = SpectralDensity::from_fn(256, spike).unwrap();
        assert!(std::ptr::eq(
            a.mollify(0.0).unwrap().samples().as_ptr(),
            a.samples().as_ptr()
        ) || a.mollify(0.0).unwrap().samples() == a.samples());
        let smoothed = a.mollify(0.3).unwrap();
        assert!((smoothed.mass() - a.mass()).abs() < 1e-10 * a.mass());
        let (lambda, _) = smoothed.ellipticity();
        assert!(lambda > 0.0);
    }
}
