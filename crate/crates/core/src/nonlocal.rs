//! Pointwise evaluation of `Lu`, `L^{1/2}u` and the bilinear increment
//! forms by polar singular quadrature.
//!
//! All evaluators share the same anatomy: a Taylor-corrected inner ball
//! `|y| < r₀` (the symmetric second difference is quadratic there, so the
//! radial moment integrates in closed form), a resolved annulus
//! `r₀ ≤ |y| ≤ R`, and an analytic tail `|y| > R` that uses the far-field
//! contract of the integrand.

use std::f64::consts::PI;

use crate::grid::GridFunction;
use crate::numeric::quad;
use crate::spectral::{AtomicSpectralMeasure, HalfKernelDensity, SpectralDensity};
use crate::{Error, Result};

/// Input field for the evaluators: a discrete solution or an analytic test
/// function. Analytic fields carry their far-field mean so the kernel tail
/// beyond the truncation radius can be integrated exactly; compactly
/// supported and mean-zero oscillatory fields use the default `0`.
pub enum Field<'a> {
    Grid(&'a GridFunction),
    Analytic { f: &'a (dyn Fn([f64; 2]) -> f64 + Sync), far_mean: f64 },
}

impl<'a> Field<'a> {
    pub fn analytic(f: &'a (dyn Fn([f64; 2]) -> f64 + Sync)) -> Self {
        Field::Analytic { f, far_mean: 0.0 }
    }

    #[inline]
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Field::Grid(g) => g.eval(x),
            Field::Analytic { f, .. } => f(x),
        }
    }

    fn far_mean(&self) -> f64 {
        match self {
            Field::Grid(_) => 0.0,
            Field::Analytic { far_mean, .. } => *far_mean,
        }
    }
}

/// Radial rule on the annulus.
#[derive(Debug, Clone)]
pub enum RadialRule {
    /// Fixed trapezoid on a geometric (log-spaced) node ladder; the default
    /// for grid functions, where interpolation noise dominates anyway.
    LogGrid { nodes: usize },
    /// Adaptive Gauss–Kronrod per angle; for analytic oracles.
    Adaptive { tol: f64 },
}

/// Quadrature layout for the nonlocal evaluators.
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    /// Inner cutoff: `r₀ = inner_cutoff_factor · h` for grid functions.
    pub inner_cutoff_factor: f64,
    /// Inner cutoff for analytic fields (absolute).
    pub inner_cutoff_abs: f64,
    /// Truncation radius; `None` picks the exact cover radius for grid
    /// functions (beyond it the field is identically zero) and a generic
    /// default for analytic ones.
    pub outer_radius: Option<f64>,
    pub radial: RadialRule,
    pub angular_nodes: usize,
    /// Radii where the radial integrand is known to lose smoothness
    /// (e.g. the distance to the boundary along the ray); used as
    /// subdivision hints by the adaptive rule.
    pub radial_hints: Vec<f64>,
}

impl QuadratureScheme {
    /// Defaults for discrete solutions on spacing `h`.
    pub fn for_grid() -> Self {
        Self {
            inner_cutoff_factor: 2.0,
            inner_cutoff_abs: 1e-6,
            outer_radius: None,
            radial: RadialRule::LogGrid { nodes: 320 },
            angular_nodes: 192,
            radial_hints: Vec::new(),
        }
    }

    /// Defaults for analytic test functions.
    pub fn analytic() -> Self {
        Self {
            inner_cutoff_factor: 2.0,
            inner_cutoff_abs: 1e-5,
            outer_radius: Some(200.0),
            radial: RadialRule::Adaptive { tol: 1e-9 },
            angular_nodes: 256,
            radial_hints: Vec::new(),
        }
    }

    pub fn with_hints(mut self, hints: Vec<f64>) -> Self {
        self.radial_hints = hints;
        self
    }

    pub fn with_outer_radius(mut self, r: f64) -> Self {
        self.outer_radius = Some(r);
        self
    }

    pub fn with_angular_nodes(mut self, n: usize) -> Self {
        self.angular_nodes = n;
        self
    }
}

/// Evaluation result; `near_boundary` is set when the point sits closer to
/// the boundary than twice the grid spacing, where the discrete second
/// difference is unreliable.
#[derive(Debug, Clone, Copy)]
pub struct Evaluated {
    pub value: f64,
    pub near_boundary: bool,
}

struct AngularNode {
    theta: [f64; 2],
    /// angular weight times kernel density at the node
    coeff: f64,
}

/// Shared polar evaluator for symmetric second-difference kernels
/// `∫ (2u(x) − u(x+y) − u(x−y)) dens(y/|y|) |y|^{−n−σ} dy`, multiplied by
/// `scale`.
fn eval_second_difference(
    u: &Field,
    x: [f64; 2],
    dim: usize,
    sigma: f64,
    density: &dyn Fn(f64) -> f64,
    scale: f64,
    scheme: &QuadratureScheme,
) -> Evaluated {
    let (r0, big_r, h_grid, near_boundary) = radii_for(u, x, dim, scheme);
    let angles = angular_nodes(dim, density, scheme.angular_nodes);

    let ux = u.value(x);
    let far = u.far_mean();

    // inner ball: second difference ≈ −r² θᵀ D²u(x) θ, radial moment
    // ∫_0^{r0} r^{1−σ} dr = r0^{2−σ}/(2−σ)
    let fd_step = h_grid.unwrap_or_else(|| r0.max(1e-6));
    let hess = hessian_fd(u, x, dim, fd_step);
    let inner_moment = r0.powf(2.0 - sigma) / (2.0 - sigma);
    let tail_moment = big_r.powf(-sigma) / sigma;

    let mut total = 0.0;
    for node in &angles {
        let q = quadratic_form(&hess, node.theta, dim);
        let diff = |r: f64| {
            2.0 * ux
                - u.value([x[0] + r * node.theta[0], x[1] + r * node.theta[1]])
                - u.value([x[0] - r * node.theta[0], x[1] - r * node.theta[1]])
        };
        let annulus = radial_integral(&diff, r0, big_r, sigma, scheme);
        total += node.coeff * (annulus - q * inner_moment + (2.0 * ux - 2.0 * far) * tail_moment);
    }

    Evaluated { value: scale * total, near_boundary }
}

fn radii_for(
    u: &Field,
    x: [f64; 2],
    dim: usize,
    scheme: &QuadratureScheme,
) -> (f64, f64, Option<f64>, bool) {
    match u {
        Field::Grid(g) => {
            let grid = g.grid();
            let h = grid.h;
            let r0 = scheme.inner_cutoff_factor * h;
            let big_r = scheme.outer_radius.unwrap_or_else(|| {
                // beyond the farthest box corner the field is identically zero
                let hi = grid.hi();
                let lo = grid.lo;
                let mut m: f64 = 0.0;
                for &cx in &[lo[0], hi[0]] {
                    if dim == 1 {
                        m = m.max((cx - x[0]).abs());
                    } else {
                        for &cy in &[lo[1], hi[1]] {
                            m = m.max(((cx - x[0]).powi(2) + (cy - x[1]).powi(2)).sqrt());
                        }
                    }
                }
                m + h
            });
            let d_here = interp_scaffold_dist(g, x);
            (r0, big_r, Some(h), d_here < 2.0 * h)
        }
        Field::Analytic { .. } => {
            let r0 = scheme.inner_cutoff_abs;
            let big_r = scheme.outer_radius.unwrap_or(200.0);
            (r0, big_r, None, false)
        }
    }
}

fn interp_scaffold_dist(g: &GridFunction, x: [f64; 2]) -> f64 {
    let grid = g.grid();
    let mut stencil = Vec::with_capacity(4);
    grid.stencil(x, &mut stencil);
    if stencil.is_empty() {
        return f64::INFINITY;
    }
    stencil.iter().map(|&(idx, w)| w * g.scaffold().dist[idx]).sum()
}

fn angular_nodes(dim: usize, density: &dyn Fn(f64) -> f64, n_ang: usize) -> Vec<AngularNode> {
    match dim {
        1 => vec![
            AngularNode { theta: [1.0, 0.0], coeff: density(0.0) },
            AngularNode { theta: [-1.0, 0.0], coeff: density(PI) },
        ],
        _ => (0..n_ang)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n_ang as f64;
                AngularNode {
                    theta: [phi.cos(), phi.sin()],
                    coeff: density(phi) * 2.0 * PI / n_ang as f64,
                }
            })
            .collect(),
    }
}

fn radial_integral(
    f: &dyn Fn(f64) -> f64,
    r0: f64,
    big_r: f64,
    sigma: f64,
    scheme: &QuadratureScheme,
) -> f64 {
    match &scheme.radial {
        RadialRule::LogGrid { nodes } => {
            // substitute r = r0 e^τ: ∫ f(r) r^{−1−σ} dr = ∫ f r^{−σ} dτ
            let span = (big_r / r0).ln();
            let n = (*nodes).max(8);
            let dt = span / n as f64;
            let mut acc = 0.0;
            for j in 0..=n {
                let r = r0 * (j as f64 * dt).exp();
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                acc += w * f(r) * r.powf(-sigma);
            }
            acc * dt
        }
        RadialRule::Adaptive { tol } => {
            let integrand = |r: f64| f(r) * r.powf(-1.0 - sigma);
            let mut breaks: Vec<f64> = scheme
                .radial_hints
                .iter()
                .flat_map(|&d| [d, 2.0 * d])
                .filter(|&d| d > r0 && d < big_r)
                .collect();
            // split the large dynamic range so the adaptive rule starts from
            // sensible panels
            let mut r = r0 * 10.0;
            while r < big_r {
                breaks.push(r);
                r *= 10.0;
            }
            quad::adaptive_split(&integrand, r0, big_r, &breaks, *tol)
        }
    }
}

fn hessian_fd(u: &Field, x: [f64; 2], dim: usize, step: f64) -> [f64; 3] {
    let f = |p: [f64; 2]| u.value(p);
    let uxx = (f([x[0] + step, x[1]]) - 2.0 * f(x) + f([x[0] - step, x[1]])) / (step * step);
    if dim == 1 {
        return [uxx, 0.0, 0.0];
    }
    let uyy = (f([x[0], x[1] + step]) - 2.0 * f(x) + f([x[0], x[1] - step])) / (step * step);
    let uxy = (f([x[0] + step, x[1] + step]) - f([x[0] + step, x[1] - step])
        - f([x[0] - step, x[1] + step])
        + f([x[0] - step, x[1] - step]))
        / (4.0 * step * step);
    [uxx, uyy, uxy]
}

#[inline]
fn quadratic_form(hess: &[f64; 3], theta: [f64; 2], dim: usize) -> f64 {
    if dim == 1 {
        hess[0]
    } else {
        hess[0] * theta[0] * theta[0]
            + hess[1] * theta[1] * theta[1]
            + 2.0 * hess[2] * theta[0] * theta[1]
    }
}

// ---------------------------------------------------------------------------
// public evaluators
// ---------------------------------------------------------------------------

/// `Lu(x)` for the operator with smooth spectral density `a`.
pub fn eval_l(
    u: &Field,
    x: [f64; 2],
    a: &SpectralDensity,
    s: f64,
    scheme: &QuadratureScheme,
) -> Evaluated {
    eval_second_difference(u, x, a.dim(), 2.0 * s, &|phi| a.eval_angle(phi), 1.0, scheme)
}

/// `Lu(x)` for an atomic spectral measure: the directional decomposition
/// `Lu = Σ_k m_k ∫_0^∞ (2u(x) − u(x+rθ_k) − u(x−rθ_k)) r^{−1−2s} dr`.
pub fn eval_l_atomic(
    u: &Field,
    x: [f64; 2],
    mu: &AtomicSpectralMeasure,
    s: f64,
    scheme: &QuadratureScheme,
) -> Evaluated {
    let sigma = 2.0 * s;
    let (r0, big_r, h_grid, near_boundary) = radii_for(u, x, mu.dim(), scheme);
    let ux = u.value(x);
    let far = u.far_mean();
    let fd_step = h_grid.unwrap_or_else(|| r0.max(1e-6));
    let hess = hessian_fd(u, x, mu.dim(), fd_step);
    let inner_moment = r0.powf(2.0 - sigma) / (2.0 - sigma);
    let tail_moment = big_r.powf(-sigma) / sigma;

    let mut total = 0.0;
    for &(angle, weight) in mu.atoms() {
        let theta = if mu.dim() == 1 {
            [angle.cos().signum(), 0.0]
        } else {
            [angle.cos(), angle.sin()]
        };
        let diff = |r: f64| {
            2.0 * ux
                - u.value([x[0] + r * theta[0], x[1] + r * theta[1]])
                - u.value([x[0] - r * theta[0], x[1] - r * theta[1]])
        };
        let annulus = radial_integral(&diff, r0, big_r, sigma, scheme);
        let inner = -quadratic_form(&hess, theta, mu.dim()) * inner_moment;
        let tail = (2.0 * ux - 2.0 * far) * tail_moment;
        total += weight * (annulus + inner + tail);
    }
    Evaluated { value: total, near_boundary }
}

/// `L^{1/2}u(x)`: symmetrized kernel quadrature at exponent `n + s` with
/// the density's evaluator scale, so the Fourier multiplier is `√A`.
pub fn eval_l_half(
    u: &Field,
    x: [f64; 2],
    b: &HalfKernelDensity,
    scheme: &QuadratureScheme,
) -> Evaluated {
    // the half factor turns the symmetrized form back into ∫ (u(x)−u(x+y)) b K
    eval_second_difference(
        u,
        x,
        b.dim(),
        b.order(),
        &|phi| b.eval_angle(phi),
        0.5 * b.eval_scale,
        scheme,
    )
}

/// Bilinear increment form for the full-order kernel, symmetrized over
/// `±y` so that the product rule
/// `L(w₁w₂) = w₁ Lw₂ + w₂ Lw₁ − I_L(w₁, w₂)`
/// closes with unit coefficient against the second-difference form of `L`:
/// `I_L(w₁, w₂)(x) = ∫ Σ_± (w₁(x)−w₁(x±y)) (w₂(x)−w₂(x±y)) a(y/|y|) |y|^{−n−2s} dy`.
pub fn bilinear_il(
    w1: &Field,
    w2: &Field,
    x: [f64; 2],
    a: &SpectralDensity,
    s: f64,
    scheme: &QuadratureScheme,
) -> Evaluated {
    // the two sign branches integrate identically over the full sphere
    bilinear_increment(w1, w2, x, a.dim(), 2.0 * s, &|phi| a.eval_angle(phi), 2.0, scheme)
}

/// Bilinear increment form for the half-order kernel (density `b`,
/// exponent `n + s`, evaluator scale included). `L^{1/2}` is evaluated in
/// increment form, so its product rule closes with the one-sided integral
/// and no extra symmetrization is needed here.
pub fn bilinear_i_half(
    w1: &Field,
    w2: &Field,
    x: [f64; 2],
    b: &HalfKernelDensity,
    scheme: &QuadratureScheme,
) -> Evaluated {
    bilinear_increment(
        w1,
        w2,
        x,
        b.dim(),
        b.order(),
        &|phi| b.eval_angle(phi),
        b.eval_scale,
        scheme,
    )
}

fn bilinear_increment(
    w1: &Field,
    w2: &Field,
    x: [f64; 2],
    dim: usize,
    sigma: f64,
    density: &dyn Fn(f64) -> f64,
    scale: f64,
    scheme: &QuadratureScheme,
) -> Evaluated {
    let (r0a, big_ra, h1, nb1) = radii_for(w1, x, dim, scheme);
    let (r0b, big_rb, _h2, nb2) = radii_for(w2, x, dim, scheme);
    let (r0, big_r) = (r0a.max(r0b), big_ra.max(big_rb));
    let angles = angular_nodes(dim, density, scheme.angular_nodes);
    let v1 = w1.value(x);
    let v2 = w2.value(x);
    let far1 = w1.far_mean();
    let far2 = w2.far_mean();
    let step = h1.unwrap_or_else(|| r0.max(1e-6));
    let g1 = gradient_fd(w1, x, dim, step);
    let g2 = gradient_fd(w2, x, dim, step);

    let inner_moment = r0.powf(2.0 - sigma) / (2.0 - sigma);
    let tail_moment = big_r.powf(-sigma) / sigma;
    let mut total = 0.0;
    for node in &angles {
        // increments ≈ −r ∇w·θ in the inner ball
        let d1 = g1[0] * node.theta[0] + g1[1] * node.theta[1];
        let d2 = g2[0] * node.theta[0] + g2[1] * node.theta[1];

        let prod = |r: f64| {
            let p = [x[0] + r * node.theta[0], x[1] + r * node.theta[1]];
            (v1 - w1.value(p)) * (v2 - w2.value(p))
        };
        let annulus = radial_integral(&prod, r0, big_r, sigma, scheme);
        total += node.coeff
            * (annulus + d1 * d2 * inner_moment + (v1 - far1) * (v2 - far2) * tail_moment);
    }
    Evaluated { value: scale * total, near_boundary: nb1 || nb2 }
}

fn gradient_fd(u: &Field, x: [f64; 2], dim: usize, step: f64) -> [f64; 2] {
    let f = |p: [f64; 2]| u.value(p);
    let gx = (f([x[0] + step, x[1]]) - f([x[0] - step, x[1]])) / (2.0 * step);
    let gy = if dim == 1 {
        0.0
    } else {
        (f([x[0], x[1] + step]) - f([x[0], x[1] - step])) / (2.0 * step)
    };
    [gx, gy]
}

// ---------------------------------------------------------------------------
// identity checks on compactly supported functions
// ---------------------------------------------------------------------------

/// Residual of the dilation commutation identity
/// `L(x·∇u) = x·∇(Lu) + 2s Lu` outside the support of `u`.
///
/// Returns `(residual, scale)`; the gradient of `Lu` is taken by centered
/// differences of the quadrature evaluation.
pub fn commutator_check(
    u: &(dyn Fn([f64; 2]) -> f64 + Sync),
    support_center: [f64; 2],
    support_radius: f64,
    x: [f64; 2],
    a: &SpectralDensity,
    s: f64,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let dim = a.dim();
    let gap = {
        let dx = x[0] - support_center[0];
        let dy = if dim == 1 { 0.0 } else { x[1] - support_center[1] };
        (dx * dx + dy * dy).sqrt() - support_radius
    };
    if gap <= 0.0 {
        return Err(Error::Argument(
            "commutator check needs the evaluation point outside the support".into(),
        ));
    }

    let grad_step = 1e-5 * support_radius.max(1.0);
    let dilated = move |z: [f64; 2]| {
        let gx = (u([z[0] + grad_step, z[1]]) - u([z[0] - grad_step, z[1]])) / (2.0 * grad_step);
        let gy = if dim == 1 {
            0.0
        } else {
            (u([z[0], z[1] + grad_step]) - u([z[0], z[1] - grad_step])) / (2.0 * grad_step)
        };
        z[0] * gx + z[1] * gy
    };

    let term_dilated = eval_l(&Field::analytic(&dilated), x, a, s, scheme).value;
    let lu_at = |p: [f64; 2]| eval_l(&Field::analytic(&u), p, a, s, scheme).value;
    let fd = 1e-4 * support_radius.max(1.0);
    let dlu_dx = (lu_at([x[0] + fd, x[1]]) - lu_at([x[0] - fd, x[1]])) / (2.0 * fd);
    let dlu_dy = if dim == 1 {
        0.0
    } else {
        (lu_at([x[0], x[1] + fd]) - lu_at([x[0], x[1] - fd])) / (2.0 * fd)
    };
    let lu = lu_at(x);
    let term_transport = x[0] * dlu_dx + x[1] * dlu_dy;
    let term_order = 2.0 * s * lu;

    let residual = (term_dilated - term_transport - term_order).abs();
    let scale = term_dilated
        .abs()
        .max(term_transport.abs())
        .max(term_order.abs())
        .max(1e-14);
    Ok((residual, scale))
}

/// Compactly supported bump on a ball/interval, for the support-disjoint
/// pairing checks.
pub struct SupportedBump<'a> {
    pub f: &'a (dyn Fn([f64; 2]) -> f64 + Sync),
    pub center: [f64; 2],
    pub radius: f64,
}

/// Both orderings of the double integral
/// `∫∫ −2 w₁(x) w₂(y) a((x−y)/|x−y|) |x−y|^{−n−2s} dy dx`
/// over the two disjoint supports. The kernel is regular (positive gap), so
/// tensor product rules converge fast; the two values use independent node
/// layouts and must agree. With this normalization each value equals
/// `∫ w₁ · Lw₂` for the second-difference form of `L`.
pub fn disjoint_support_symmetry(
    w1: &SupportedBump,
    w2: &SupportedBump,
    a: &SpectralDensity,
    s: f64,
) -> Result<(f64, f64)> {
    let dim = a.dim();
    let dx = w1.center[0] - w2.center[0];
    let dy = if dim == 1 { 0.0 } else { w1.center[1] - w2.center[1] };
    let gap = (dx * dx + dy * dy).sqrt() - w1.radius - w2.radius;
    if gap <= 0.0 {
        return Err(Error::Argument("supports must be disjoint with a positive gap".into()));
    }

    let kernel = move |p: [f64; 2], q: [f64; 2]| {
        let rx = p[0] - q[0];
        let ry = p[1] - q[1];
        let r = (rx * rx + ry * ry).sqrt();
        let dens = if dim == 1 { a.eval_angle(0.0) } else { a.eval_angle(ry.atan2(rx)) };
        -2.0 * dens * r.powf(-(dim as f64) - 2.0 * s)
    };

    let v1 = pair_integral(w1, w2, &kernel, dim, 40, 80);
    let v2 = pair_integral(w2, w1, &|p, q| kernel(q, p), dim, 48, 96);
    Ok((v1, v2))
}

/// Tensor midpoint × angular trapezoid over `outer`, then `inner`.
fn pair_integral(
    outer: &SupportedBump,
    inner: &SupportedBump,
    kernel: &dyn Fn([f64; 2], [f64; 2]) -> f64,
    dim: usize,
    n_rad: usize,
    n_ang: usize,
) -> f64 {
    let outer_pts = bump_quadrature(outer, dim, n_rad, n_ang);
    let inner_pts = bump_quadrature(inner, dim, n_rad, n_ang);
    let mut acc = 0.0;
    for &(p, wp, fp) in &outer_pts {
        if fp == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for &(q, wq, fq) in &inner_pts {
            row += wq * fq * kernel(p, q);
        }
        acc += wp * fp * row;
    }
    acc
}

fn bump_quadrature(
    bump: &SupportedBump,
    dim: usize,
    n_rad: usize,
    n_ang: usize,
) -> Vec<([f64; 2], f64, f64)> {
    let mut out = Vec::new();
    if dim == 1 {
        for (x, w) in quad::gauss7_nodes(
            bump.center[0] - bump.radius,
            bump.center[0] + bump.radius,
            n_rad.div_ceil(4),
        ) {
            let p = [x, 0.0];
            out.push((p, w, (bump.f)(p)));
        }
    } else {
        for (r, wr) in quad::gauss7_nodes(0.0, bump.radius, n_rad.div_ceil(4)) {
            for j in 0..n_ang {
                let phi = 2.0 * PI * j as f64 / n_ang as f64;
                let p = [bump.center[0] + r * phi.cos(), bump.center[1] + r * phi.sin()];
                out.push((p, wr * r * 2.0 * PI / n_ang as f64, (bump.f)(p)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::StableSymbol;

    fn analytic_scheme() -> QuadratureScheme {
        QuadratureScheme::analytic()
    }

    #[test]
    fn constant_field_maps_to_zero() {
        let a = SpectralDensity::isotropic_normalized(2, 0.5, 64).unwrap();
        let c = 3.7;
        let f = move |_: [f64; 2]| c;
        let u = Field::Analytic { f: &f, far_mean: c };
        let v = eval_l(&u, [0.2, -0.1], &a, 0.5, &analytic_scheme());
        assert!(v.value.abs() < 1e-12, "L(const) = {}", v.value);
    }

    #[test]
    fn plane_wave_reproduces_symbol() {
        let profile = |phi: f64| 1.0 + 0.6 * (2.0 * phi).cos();
        let a = SpectralDensity::from_fn(128, profile).unwrap();
        let s = 0.5;
        let sym = StableSymbol::from_density(&a, s).unwrap();
        for &xi in &[[1.0, 0.0], [0.7, 1.3], [-2.0, 0.4]] {
            let wave = move |p: [f64; 2]| (xi[0] * p[0] + xi[1] * p[1]).cos();
            let u = Field::analytic(&wave);
            let x = [0.13, 0.27];
            let expected = sym.eval(xi) * wave(x);
            let got = eval_l(&u, x, &a, s, &analytic_scheme()).value;
            assert!(
                (got - expected).abs() <= 1e-3 * expected.abs(),
                "ξ = {xi:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn one_d_sqrt_profile_at_center() {
        // u(x) = √(1−x²)₊ with the normalized 1-D operator at s = 1/2 has
        // Lu ≡ 1; cross-checked against an independent 1-D quadrature.
        let s = 0.5;
        let a = SpectralDensity::isotropic_normalized(1, s, 2).unwrap();
        let f = |p: [f64; 2]| {
            let t = 1.0 - p[0] * p[0];
            if t > 0.0 {
                t.sqrt()
            } else {
                0.0
            }
        };
        let u = Field::analytic(&f);
        let scheme = analytic_scheme().with_hints(vec![1.0]).with_outer_radius(1e4);
        let got = eval_l(&u, [0.0, 0.0], &a, s, &scheme).value;

        // independent oracle: a± ∫_0^∞ (2u(0) − u(r) − u(−r)) r^{−2} dr,
        // a± = 1/(2π) each, both half-lines equal
        let integrand = |r: f64| (2.0 - 2.0 * f([r, 0.0])) / (r * r);
        let oracle = (1.0 / PI)
            * (quad::adaptive_split(&integrand, 1e-9, 1.0, &[0.5], 1e-12)
                + quad::adaptive(&integrand, 1.0, 1e7, 1e-12));
        assert!((oracle - 1.0).abs() < 1e-4, "oracle sanity: {oracle}");
        assert!((got - 1.0).abs() < 2e-3, "eval_l = {got}");
    }

    #[test]
    fn atomic_matches_smooth_on_plane_waves() {
        let profile = |phi: f64| 0.8 + 0.3 * (2.0 * phi).cos();
        let n = 64;
        let a = SpectralDensity::from_fn(n, profile).unwrap();
        let atoms: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                (phi, profile(phi) * 2.0 * PI / n as f64)
            })
            .collect();
        let mu = AtomicSpectralMeasure::new(2, atoms).unwrap();
        let s = 0.6;
        let xi = [1.2, -0.5];
        let wave = move |p: [f64; 2]| (xi[0] * p[0] + xi[1] * p[1]).cos();
        let u = Field::analytic(&wave);
        let x = [0.21, 0.05];
        let smooth = eval_l(&u, x, &a, s, &analytic_scheme()).value;
        let atomic = eval_l_atomic(&u, x, &mu, s, &analytic_scheme()).value;
        assert!(
            (smooth - atomic).abs() <= 1e-2 * smooth.abs().max(1.0),
            "{smooth} vs {atomic}"
        );
    }

    #[test]
    fn single_atom_gives_directional_symbol() {
        let s = 0.45;
        let m = 0.9;
        let mu = AtomicSpectralMeasure::new(1, vec![(0.0, m)]).unwrap();
        let t = 1.7;
        let wave = move |p: [f64; 2]| (t * p[0]).cos();
        let u = Field::analytic(&wave);
        let x = [0.3, 0.0];
        let got = eval_l_atomic(&u, x, &mu, s, &analytic_scheme()).value;
        let c_s = crate::spectral::pohozaev_constant(s).unwrap();
        let expected = c_s * m * t.powf(2.0 * s) * wave(x);
        assert!(
            (got - expected).abs() < 2e-3 * expected.abs(),
            "{got} vs {expected}"
        );
    }

    #[test]
    fn half_operator_multiplier_squares_to_symbol() {
        let profile = |phi: f64| 1.0 + 0.5 * (2.0 * phi).cos();
        let a = SpectralDensity::from_fn(128, profile).unwrap();
        let s = 0.5;
        let sym = StableSymbol::from_density(&a, s).unwrap();
        let b = HalfKernelDensity::from_symbol(&sym).unwrap();
        for &xi in &[[1.0, 0.0], [0.4, 0.9]] {
            let wave = move |p: [f64; 2]| (xi[0] * p[0] + xi[1] * p[1]).cos();
            let u = Field::analytic(&wave);
            let x = [0.11, -0.07];
            let got = eval_l_half(&u, x, &b, &analytic_scheme()).value;
            let expected = sym.sqrt_eval(xi) * wave(x);
            assert!(
                (got - expected).abs() <= 1e-3 * expected.abs(),
                "ξ = {xi:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn product_rules_close() {
        let a = SpectralDensity::from_fn(64, |phi| 1.0 + 0.4 * (2.0 * phi).cos()).unwrap();
        let s = 0.55;
        let sym = StableSymbol::from_density(&a, s).unwrap();
        let b = HalfKernelDensity::from_symbol(&sym).unwrap();
        let w1 = |p: [f64; 2]| (-(p[0] * p[0] + p[1] * p[1])).exp();
        let w2 = |p: [f64; 2]| (-(p[0] - 0.3) * (p[0] - 0.3) - 0.5 * p[1] * p[1]).exp();
        let prod = move |p: [f64; 2]| w1(p) * w2(p);
        let x = [0.2, 0.1];
        let scheme = analytic_scheme();

        // full order: L(w1 w2) = w1 Lw2 + w2 Lw1 − I_L(w1, w2)
        let lhs = eval_l(&Field::analytic(&prod), x, &a, s, &scheme).value;
        let rhs = w1(x) * eval_l(&Field::analytic(&w2), x, &a, s, &scheme).value
            + w2(x) * eval_l(&Field::analytic(&w1), x, &a, s, &scheme).value
            - bilinear_il(&Field::analytic(&w1), &Field::analytic(&w2), x, &a, s, &scheme).value;
        assert!((lhs - rhs).abs() < 1e-3 * lhs.abs().max(1.0), "{lhs} vs {rhs}");

        // half order with the same density b
        let lhs_h = eval_l_half(&Field::analytic(&prod), x, &b, &scheme).value;
        let rhs_h = w1(x) * eval_l_half(&Field::analytic(&w2), x, &b, &scheme).value
            + w2(x) * eval_l_half(&Field::analytic(&w1), x, &b, &scheme).value
            - bilinear_i_half(&Field::analytic(&w1), &Field::analytic(&w2), x, &b, &scheme)
                .value;
        assert!(
            (lhs_h - rhs_h).abs() < 1e-3 * lhs_h.abs().max(1.0),
            "{lhs_h} vs {rhs_h}"
        );
    }

    #[test]
    fn bilinear_same_argument_is_nonnegative() {
        let a = SpectralDensity::isotropic_normalized(2, 0.4, 64).unwrap();
        let w = |p: [f64; 2]| (-(p[0] * p[0] + 2.0 * p[1] * p[1])).exp();
        let v = bilinear_il(
            &Field::analytic(&w),
            &Field::analytic(&w),
            [0.1, 0.4],
            &a,
            0.4,
            &analytic_scheme(),
        );
        assert!(v.value >= 0.0);
        // constant first factor kills the form
        let c = |_: [f64; 2]| 2.0;
        let z = bilinear_il(
            &Field::Analytic { f: &c, far_mean: 2.0 },
            &Field::analytic(&w),
            [0.1, 0.4],
            &a,
            0.4,
            &analytic_scheme(),
        );
        assert!(z.value.abs() < 1e-10);
    }

    #[test]
    fn commutator_identity_outside_support() {
        let a = SpectralDensity::from_fn(64, |phi| 1.0 + 0.3 * (4.0 * phi).cos()).unwrap();
        let s = 0.6;
        let bump = |p: [f64; 2]| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            if r2 < 1.0 {
                (-1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let x = [2.0, 0.3];
        let (residual, scale) =
            commutator_check(&bump, [0.0, 0.0], 1.0, x, &a, s, &analytic_scheme()).unwrap();
        assert!(residual <= 1e-3 * scale, "residual {residual} vs scale {scale}");
        // inside-support evaluation is rejected
        assert!(commutator_check(&bump, [0.0, 0.0], 1.0, [0.5, 0.0], &a, s, &analytic_scheme())
            .is_err());
    }

    #[test]
    fn disjoint_supports_pair_symmetrically() {
        let a = SpectralDensity::isotropic_normalized(2, 0.5, 64).unwrap();
        // bumps flat to all orders at the support edge, so the tensor rules
        // converge spectrally and the two orderings can agree to 1e-8
        let f1 = |p: [f64; 2]| {
            let r2 = 4.0 * ((p[0] + 1.0) * (p[0] + 1.0) + p[1] * p[1]);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let f2 = |p: [f64; 2]| {
            let r2 = 4.0 * ((p[0] - 1.0) * (p[0] - 1.0) + p[1] * p[1]);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let b1 = SupportedBump { f: &f1, center: [-1.0, 0.0], radius: 0.5 };
        let b2 = SupportedBump { f: &f2, center: [1.0, 0.0], radius: 0.5 };
        let (v1, v2) = disjoint_support_symmetry(&b1, &b2, &a, 0.5).unwrap();
        assert!(v1 < 0.0 && v2 < 0.0, "nonnegative bumps pair negatively: {v1}, {v2}");
        assert!((v1 - v2).abs() < 1e-8, "{v1} vs {v2}");

        // cross-check against the pointwise evaluator: v1 ≈ ∫ w1 · L w2
        let scheme = analytic_scheme();
        let mut acc = 0.0;
        let n = 24;
        let dx = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n {
                let p = [-1.5 + (i as f64 + 0.5) * dx, -0.5 + (j as f64 + 0.5) * dx];
                let w = f1(p);
                if w > 0.0 {
                    acc += dx * dx * w * eval_l(&Field::analytic(&f2), p, &a, 0.5, &scheme).value;
                }
            }
        }
        assert!(
            (acc - v1).abs() < 3e-2 * v1.abs(),
            "⟨w1, Lw2⟩ = {acc} vs pair integral {v1}"
        );

        // overlap is rejected
        let b3 = SupportedBump { f: &f1, center: [0.2, 0.0], radius: 0.5 };
        assert!(disjoint_support_symmetry(&b3, &b2, &a, 0.5).is_err());
    }

    #[test]
    fn translation_covariance() {
        let a = SpectralDensity::from_fn(64, |phi| 1.0 + 0.3 * (2.0 * phi).cos()).unwrap();
        let s = 0.5;
        let scheme = analytic_scheme();
        let f = |p: [f64; 2]| (-(p[0] * p[0] + 0.8 * p[1] * p[1])).exp();
        let z = [0.7, -0.4];
        let shifted = move |p: [f64; 2]| f([p[0] - z[0], p[1] - z[1]]);
        let x = [0.25, 0.1];
        let base = eval_l(&Field::analytic(&f), x, &a, s, &scheme).value;
        let moved =
            eval_l(&Field::analytic(&shifted), [x[0] + z[0], x[1] + z[1]], &a, s, &scheme).value;
        assert!(
            (base - moved).abs() <= 1e-10 * base.abs().max(1.0),
            "{base} vs {moved}"
        );
    }

    #[test]
    fn linearity_and_scaling_covariance() {
        let a = SpectralDensity::from_fn(64, |phi| 1.0 + 0.2 * (2.0 * phi).sin()).unwrap();
        let s = 0.5;
        let scheme = analytic_scheme();
        let f = |p: [f64; 2]| (-(p[0] * p[0] + p[1] * p[1])).exp();
        let g = |p: [f64; 2]| (p[0] + 0.4 * p[1]).cos();
        let x = [0.3, -0.2];
        let combo = move |p: [f64; 2]| 2.0 * f(p) - 0.7 * g(p);
        let lhs = eval_l(&Field::analytic(&combo), x, &a, s, &scheme).value;
        let rhs = 2.0 * eval_l(&Field::analytic(&f), x, &a, s, &scheme).value
            - 0.7 * eval_l(&Field::analytic(&g), x, &a, s, &scheme).value;
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));

        // u_λ(x) = u(λx): L u_λ(x) = λ^{2s} (Lu)(λx)
        let lam = 1.5;
        let scaled = move |p: [f64; 2]| f([lam * p[0], lam * p[1]]);
        let lhs = eval_l(&Field::analytic(&scaled), x, &a, s, &scheme).value;
        let rhs = lam.powf(2.0 * s)
            * eval_l(&Field::analytic(&f), [lam * x[0], lam * x[1]], &a, s, &scheme).value;
        assert!(
            (lhs - rhs).abs() < 1e-6 * rhs.abs().max(1.0),
            "scaling: {lhs} vs {rhs}"
        );
    }
}
