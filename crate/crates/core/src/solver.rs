//! Symmetric Galerkin discretization of the anisotropic energy form and the
//! Dirichlet solvers built on it.
//!
//! The energy of the operator splits over directions,
//! `E(u, v) = Σ_k c_k ∫∫ (u(x) − u(x+rθ_k)) (v(x) − v(x+rθ_k)) |r|^{−1−2s} dr dx`,
//! so the stiffness action is assembled line by line: for every quadrature
//! direction the grid is covered by parallel lines spaced `h` apart, the
//! multilinear basis is resampled onto each line, and the exact 1-D
//! fractional stiffness of hat functions couples the samples. The resulting
//! operator is symmetric positive definite and is applied matrix-free.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::geometry::DomainGeometry;
use crate::grid::{GridFunction, GridScaffold};
use crate::spectral::{AtomicSpectralMeasure, SpectralDensity, StableSymbol};
use crate::{Error, Result};

/// Operator description shared by the solvers and the CLI.
#[derive(Debug, Clone)]
pub enum OperatorSpec {
    Density(SpectralDensity),
    Atomic(AtomicSpectralMeasure),
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Density(a) => a.dim(),
            OperatorSpec::Atomic(mu) => mu.dim(),
        }
    }

    pub fn symbol(&self, s: f64) -> Result<StableSymbol> {
        match self {
            OperatorSpec::Density(a) => StableSymbol::from_density(a, s),
            OperatorSpec::Atomic(mu) => StableSymbol::from_atomic(mu, s),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            OperatorSpec::Density(a) => format!("density[n_sphere={}]", a.n_sphere()),
            OperatorSpec::Atomic(mu) => format!("atomic[{} atoms]", mu.atoms().len()),
        }
    }

    /// Directional quadrature of the energy: pairs `(θ_k, c_k)` with angles
    /// folded into `[0, π)` so each line family appears once.
    fn directions(&self, n_dir: usize) -> Vec<(f64, f64)> {
        match self {
            OperatorSpec::Density(a) => match a.dim() {
                1 => vec![(0.0, 0.5 * (a.samples()[0] + a.samples()[1]))],
                _ => (0..n_dir)
                    .map(|k| {
                        let phi = PI * k as f64 / n_dir as f64;
                        (phi, a.eval_angle(phi) * PI / n_dir as f64)
                    })
                    .collect(),
            },
            OperatorSpec::Atomic(mu) => match mu.dim() {
                1 => vec![(0.0, 0.5 * mu.total_mass())],
                _ => mu
                    .atoms()
                    .iter()
                    .map(|&(angle, w)| (angle.rem_euclid(PI), 0.5 * w))
                    .collect(),
            },
        }
    }
}

/// Solver knobs (config keys mirror these names).
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub n_dir: usize,
    /// transverse line spacing as a fraction of `h` (2-D assembly)
    pub line_refine: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub picard_damping: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub node_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_dir: 64,
            line_refine: 1,
            cg_tol: 1e-10,
            cg_max_iter: 20_000,
            picard_damping: 0.5,
            picard_tol: 1e-8,
            picard_max_iter: 200,
            node_budget: crate::geometry::DEFAULT_NODE_BUDGET,
        }
    }
}

// ---------------------------------------------------------------------------
// 1-D fractional stiffness of hat functions
// ---------------------------------------------------------------------------

/// Gagliardo pairing of two unit-spacing hat functions `m` nodes apart:
/// `g_s(m) = ∫∫ (φ₀(x)−φ₀(y)) (φ_m(x)−φ_m(y)) |x−y|^{−1−2s} dx dy`.
///
/// Closed form: the Fourier pairing collapses to a fourth central
/// difference of `|β|^{3−2s}` (of `β² log|β|` at `s = 1/2`), and for large
/// separations the difference is replaced by its derivative expansion to
/// avoid catastrophic cancellation.
pub fn hat_line_kernel(s: f64, max_m: usize) -> Vec<f64> {
    let eps = 2.0 * s - 1.0;
    let kappa = 3.0 - 2.0 * s;
    // denominator with the (2s−1) factor removed for the s = 1/2 branch
    let d_full = (2.0 * s - 3.0) * (2.0 * s - 2.0) * (2.0 * s - 1.0) * (2.0 * s);
    let d_reduced = (2.0 * s - 3.0) * (2.0 * s - 2.0) * (2.0 * s);
    let log_branch = eps.abs() < 1e-6;

    let exact = |m: f64| -> f64 {
        let f = |b: f64| -> f64 {
            let ab = b.abs();
            if log_branch {
                if ab < 1e-300 { 0.0 } else { ab * ab * ab.ln() }
            } else {
                ab.powf(kappa)
            }
        };
        let d4 = f(m - 2.0) - 4.0 * f(m - 1.0) + 6.0 * f(m) - 4.0 * f(m + 1.0) + f(m + 2.0);
        if log_branch {
            // Δ⁴[β²] vanishes, so |β|^{3−2s} = β² e^{−ε log|β|} leaves
            // −ε Δ⁴[β² log|β|] + O(ε²) over D = ε · d_reduced
            2.0 * d4 / d_reduced
        } else {
            -2.0 * d4 / d_full
        }
    };

    let asymptotic = |m: f64| -> f64 {
        // Δ⁴F(m) = F⁗(m) + F⁽⁶⁾(m)/6 + F⁽⁸⁾(m)/80 + O(m^{κ−10})
        if log_branch {
            let t = -2.0 / (m * m) - 2.0 / m.powi(4) - 3.0 / m.powi(6);
            2.0 * t / d_reduced
        } else {
            let fall = |k: u32| -> f64 {
                (0..k).map(|j| kappa - j as f64).product::<f64>() * m.powf(kappa - k as f64)
            };
            let t = fall(4) + fall(6) / 6.0 + fall(8) / 80.0;
            -2.0 * t / d_full
        }
    };

    (0..=max_m)
        .map(|m| if m >= 256 { asymptotic(m as f64) } else { exact(m as f64) })
        .collect()
}

// ---------------------------------------------------------------------------
// energy form
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Sample {
    /// integer position along the line (spacing `h`)
    pos: i32,
    len: u8,
    idx: [u32; 4],
    w: [f64; 4],
}

struct Line {
    samples: Vec<Sample>,
    /// exact-pair corrections `(p, q, δ)` (`p ≤ q`, sample indices) for
    /// hats clipped at the true boundary crossing of the line
    corrections: Vec<(u32, u32, f64)>,
}

struct DirAssembly {
    /// direction coefficient times the transverse line measure
    coef: f64,
    lines: Vec<Line>,
}

/// Kink (second-derivative mass) representation of a piecewise-linear
/// basis function on the line: up to three `(position, strength)` pairs.
type Kinks = [(f64, f64); 3];

fn regular_kinks(t: f64, h: f64) -> Kinks {
    [(t - h, 1.0 / h), (t, -2.0 / h), (t + h, 1.0 / h)]
}

/// Hat peaked at `t` with left support `l_len` and right support `r_len`.
fn clipped_kinks(t: f64, l_len: f64, r_len: f64) -> Kinks {
    [
        (t - l_len, 1.0 / l_len),
        (t, -1.0 / l_len - 1.0 / r_len),
        (t + r_len, 1.0 / r_len),
    ]
}

/// Exact Gagliardo pairing of two piecewise-linear functions given their
/// kink masses: `−(2/D) Σ α_i β_j |t_i − t_j|^{3−2s}` (with the
/// `β² log|β|` limit at `s = 1/2`). Both functions must have zero total
/// kink mass and zero first kink moment, which every compactly supported
/// P1 function satisfies.
fn kink_pair_energy(a: &Kinks, b: &Kinks, s: f64) -> f64 {
    let eps = 2.0 * s - 1.0;
    let log_branch = eps.abs() < 1e-6;
    let kappa = 3.0 - 2.0 * s;
    let d_full = (2.0 * s - 3.0) * (2.0 * s - 2.0) * (2.0 * s - 1.0) * (2.0 * s);
    let d_reduced = (2.0 * s - 3.0) * (2.0 * s - 2.0) * (2.0 * s);
    let mut acc = 0.0;
    for &(ta, ma) in a {
        for &(tb, mb) in b {
            let d = (ta - tb).abs();
            if d < 1e-300 {
                continue;
            }
            let f = if log_branch { d * d * d.ln() } else { d.powf(kappa) };
            acc += ma * mb * f;
        }
    }
    if log_branch {
        2.0 * acc / d_reduced
    } else {
        -2.0 * acc / d_full
    }
}

/// Symmetric stiffness operator over the interior grid nodes, applied
/// matrix-free.
pub struct EnergyForm {
    scaffold: Arc<GridScaffold>,
    s: f64,
    h: f64,
    interior_nodes: Vec<usize>,
    dirs: Vec<DirAssembly>,
    kernel: Arc<Vec<f64>>,
    diag: Vec<f64>,
    operator_desc: String,
}

/// Assemble the energy form of the operator on the interior of `domain`.
pub fn assemble_energy(
    domain: &DomainGeometry,
    operator: &OperatorSpec,
    s: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<EnergyForm> {
    if operator.dim() != domain.dim() {
        return Err(Error::Argument("operator and domain dimensions differ".into()));
    }
    // validate ellipticity up front (also catches out-of-range s)
    operator.symbol(s)?;
    let scaffold = Arc::new(domain.interior_scaffold(h, opts.node_budget)?);
    EnergyForm::assemble(scaffold, domain, operator, s, opts)
}

impl EnergyForm {
    /// Assemble on an existing scaffold. The domain is consulted for the
    /// exact boundary crossings of the quadrature lines: the end hats of
    /// every line run are clipped at the crossing, which keeps the discrete
    /// Dirichlet wall on `∂Ω` instead of displacing it by up to one cell.
    pub fn assemble(
        scaffold: Arc<GridScaffold>,
        domain: &DomainGeometry,
        operator: &OperatorSpec,
        s: f64,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let grid = &scaffold.grid;
        let h = grid.h;
        let dim = grid.dim;
        let n_nodes = grid.node_count();

        let mut interior_nodes = Vec::with_capacity(scaffold.n_interior);
        let mut unknown_of_node = vec![u32::MAX; n_nodes];
        for idx in 0..n_nodes {
            if scaffold.inside[idx] {
                unknown_of_node[idx] = interior_nodes.len() as u32;
                interior_nodes.push(idx);
            }
        }
        if interior_nodes.is_empty() {
            return Err(Error::Validation("domain has no interior grid nodes".into()));
        }

        let lo = grid.lo;
        let hi = grid.hi();
        let corners: Vec<[f64; 2]> = if dim == 1 {
            vec![[lo[0], 0.0], [hi[0], 0.0]]
        } else {
            vec![[lo[0], lo[1]], [hi[0], lo[1]], [lo[0], hi[1]], [hi[0], hi[1]]]
        };

        let span_bound = corners
            .iter()
            .flat_map(|a| corners.iter().map(move |b| {
                (((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / h).ceil() as usize
            }))
            .max()
            .unwrap()
            + 3;
        let base_kernel = hat_line_kernel(s, span_bound);
        let directions = operator.directions(opts.n_dir);
        let mut max_span = 0usize;
        let mut dirs = Vec::with_capacity(directions.len());
        let mut stencil_buf: Vec<(usize, f64)> = Vec::with_capacity(4);
        for &(phi, coef) in &directions {
            let theta = [phi.cos(), phi.sin()];
            let perp = [-theta[1], theta[0]];
            let proj_t: Vec<f64> =
                corners.iter().map(|c| c[0] * theta[0] + c[1] * theta[1]).collect();
            let proj_c: Vec<f64> =
                corners.iter().map(|c| c[0] * perp[0] + c[1] * perp[1]).collect();
            let tmin = proj_t.iter().cloned().fold(f64::INFINITY, f64::min);
            let tmax = proj_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (cmin, cmax) = (
                proj_c.iter().cloned().fold(f64::INFINITY, f64::min),
                proj_c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
            let n_samples = ((tmax - tmin) / h).ceil() as usize + 1;
            let dc = h / opts.line_refine.max(1) as f64;
            let (n_lines, line_measure) = if dim == 1 {
                (1usize, 1.0)
            } else {
                (((cmax - cmin) / dc).floor() as usize + 1, dc)
            };

            let point_at = |c: f64, t: f64| -> [f64; 2] {
                [
                    t * theta[0] + c * perp[0],
                    if dim == 1 { 0.0 } else { t * theta[1] + c * perp[1] },
                ]
            };

            let mut lines = Vec::new();
            for j in 0..n_lines {
                let c = if dim == 1 { 0.0 } else { cmin + j as f64 * dc };
                let inside: Vec<bool> = (0..=n_samples)
                    .map(|m| domain.contains(point_at(c, tmin + m as f64 * h)))
                    .collect();

                let mut samples: Vec<Sample> = Vec::new();
                // (sample index, left support, right support) of clipped hats
                let mut clipped: Vec<(usize, f64, f64)> = Vec::new();
                let mut m = 0usize;
                while m <= n_samples {
                    if !inside[m] {
                        m += 1;
                        continue;
                    }
                    let start = m;
                    while m + 1 <= n_samples && inside[m + 1] {
                        m += 1;
                    }
                    let end = m;
                    m += 1;

                    // exact crossings just outside the run ends
                    let cross = |m_in: usize, m_out: f64| -> f64 {
                        let t_in = tmin + m_in as f64 * h;
                        let t_out = tmin + m_out * h;
                        let mut a = t_in;
                        let mut b = t_out;
                        for _ in 0..50 {
                            let mid = 0.5 * (a + b);
                            if domain.contains(point_at(c, mid)) {
                                a = mid;
                            } else {
                                b = mid;
                            }
                        }
                        0.5 * (a + b)
                    };
                    let min_len = 0.02 * h;
                    let left_len = if start == 0 {
                        h
                    } else {
                        ((tmin + start as f64 * h) - cross(start, start as f64 - 1.0))
                            .max(min_len)
                    };
                    let right_len = if end == n_samples {
                        h
                    } else {
                        (cross(end, end as f64 + 1.0) - (tmin + end as f64 * h)).max(min_len)
                    };

                    let run_first_stored = samples.len();
                    for mm in start..=end {
                        let t = tmin + mm as f64 * h;
                        grid.stencil(point_at(c, t), &mut stencil_buf);
                        let mut sample =
                            Sample { pos: mm as i32, len: 0, idx: [0; 4], w: [0.0; 4] };
                        for &(node, weight) in &stencil_buf {
                            let unk = unknown_of_node[node];
                            if unk != u32::MAX && weight != 0.0 {
                                sample.idx[sample.len as usize] = unk;
                                sample.w[sample.len as usize] = weight;
                                sample.len += 1;
                            }
                        }
                        if sample.len == 0 {
                            continue; // structural zero, identical to a dropped hat
                        }
                        let stored = samples.len();
                        samples.push(sample);
                        let is_left_end = mm == start && left_len < h * (1.0 - 1e-9);
                        let is_right_end = mm == end && right_len < h * (1.0 - 1e-9);
                        if is_left_end || is_right_end {
                            clipped.push((
                                stored,
                                if is_left_end { left_len } else { h },
                                if is_right_end { right_len } else { h },
                            ));
                        }
                    }
                    let _ = run_first_stored;
                }

                if samples.is_empty() {
                    continue;
                }
                let span = (samples.last().unwrap().pos - samples[0].pos) as usize;
                max_span = max_span.max(span);

                // exact-pair corrections for the clipped hats
                let kinks_of = |idx: usize| -> Kinks {
                    let t = samples[idx].pos as f64 * h;
                    match clipped.iter().find(|&&(i, _, _)| i == idx) {
                        Some(&(_, l, r)) => clipped_kinks(t, l, r),
                        None => regular_kinks(t, h),
                    }
                };
                let scale = h.powf(1.0 - 2.0 * s);
                let mut corrections = Vec::new();
                for &(q, _, _) in &clipped {
                    let kq = kinks_of(q);
                    for p in 0..samples.len() {
                        // count clipped-clipped pairs once
                        if p != q && clipped.iter().any(|&(i, _, _)| i == p) && p > q {
                            continue;
                        }
                        let exact = kink_pair_energy(&kinks_of(p), &kq, s);
                        let m_diff = (samples[p].pos - samples[q].pos).unsigned_abs() as usize;
                        let toeplitz = scale * base_kernel[m_diff];
                        let delta = exact - toeplitz;
                        if delta != 0.0 {
                            corrections.push((p.min(q) as u32, p.max(q) as u32, delta));
                        }
                    }
                }
                lines.push(Line { samples, corrections });
            }
            dirs.push(DirAssembly { coef: coef * line_measure, lines });
        }

        let _ = max_span;
        let scale = h.powf(1.0 - 2.0 * s);
        let kernel: Arc<Vec<f64>> =
            Arc::new(base_kernel.into_iter().map(|g| g * scale).collect());

        let mut form = Self {
            scaffold,
            s,
            h,
            interior_nodes,

            dirs,
            kernel,
            diag: Vec::new(),
            operator_desc: operator.describe(),
        };
        form.diag = form.compute_diagonal();
        let bad = form.diag.iter().position(|&d| !(d > 0.0));
        if let Some(i) = bad {
            return Err(Error::Validation(format!(
                "assembled form is not positive on unknown {i} (diag = {})",
                form.diag[i]
            )));
        }
        Ok(form)
    }

    pub fn n_unknowns(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn scaffold(&self) -> &Arc<GridScaffold> {
        &self.scaffold
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn operator_desc(&self) -> &str {
        &self.operator_desc
    }

    /// Directional quadrature angles and coefficients of the assembly.
    pub fn direction_count(&self) -> usize {
        self.dirs.len()
    }

    /// `y = E u` (matrix-free). Deterministic: the parallel partial results
    /// are reduced in direction order.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_unknowns());
        let partials: Vec<Vec<f64>> = self
            .dirs
            .par_iter()
            .map(|dir| {
                let mut out = vec![0.0; u.len()];
                let mut gather = Vec::new();
                let mut stiff = Vec::new();
                let kernel = self.kernel.as_slice();
                for line in &dir.lines {
                    apply_line(line, kernel, dir.coef, u, &mut out, &mut gather, &mut stiff);
                }
                out
            })
            .collect();
        let mut y = vec![0.0; u.len()];
        for part in partials {
            for (yi, pi) in y.iter_mut().zip(&part) {
                *yi += pi;
            }
        }
        y
    }

    /// Quadratic form `E(u, u)` on an unknown vector.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        dot(u, &self.apply(u))
    }

    /// Energy of a grid function (its interior values).
    pub fn quadratic_form_grid(&self, u: &GridFunction) -> f64 {
        let v = self.restrict(u);
        self.quadratic_form(&v)
    }

    /// Interior values of a grid function in unknown order.
    pub fn restrict(&self, u: &GridFunction) -> Vec<f64> {
        self.interior_nodes.iter().map(|&n| u.values()[n]).collect()
    }

    /// Grid function from unknown values (exterior zero).
    pub fn extend(&self, u: &[f64]) -> GridFunction {
        GridFunction::from_interior_values(self.scaffold.clone(), &self.interior_nodes, u)
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn compute_diagonal(&self) -> Vec<f64> {
        let n = self.n_unknowns();
        let partials: Vec<Vec<f64>> = self
            .dirs
            .par_iter()
            .map(|dir| {
                let mut out = vec![0.0; n];
                let kernel = self.kernel.as_slice();
                // per line, collect the few samples touching each unknown
                let mut touch: std::collections::HashMap<u32, Vec<(i32, f64)>> =
                    std::collections::HashMap::new();
                for line in &dir.lines {
                    touch.clear();
                    for s in &line.samples {
                        for k in 0..s.len as usize {
                            touch.entry(s.idx[k]).or_default().push((s.pos, s.w[k]));
                        }
                    }
                    for (&unk, list) in &touch {
                        let mut acc = 0.0;
                        for &(pi, wi) in list {
                            for &(pj, wj) in list {
                                acc += wi * wj * kernel[(pi - pj).unsigned_abs() as usize];
                            }
                        }
                        out[unk as usize] += dir.coef * acc;
                    }
                    for &(p, q, delta) in &line.corrections {
                        let (sp, sq) = (&line.samples[p as usize], &line.samples[q as usize]);
                        let count = if p == q { 1.0 } else { 2.0 };
                        for ka in 0..sp.len as usize {
                            for kb in 0..sq.len as usize {
                                if sp.idx[ka] == sq.idx[kb] {
                                    out[sp.idx[ka] as usize] +=
                                        dir.coef * count * delta * sp.w[ka] * sq.w[kb];
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let mut diag = vec![0.0; n];
        for part in partials {
            for (d, p) in diag.iter_mut().zip(&part) {
                *d += p;
            }
        }
        diag
    }

    /// Dense materialization for small problems (tests, spectral probes).
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n_unknowns();
        if n > 4000 {
            return Err(Error::Resource(format!(
                "dense materialization refused for {n} unknowns"
            )));
        }
        let mut mat = vec![vec![0.0; n]; n];
        for dir in &self.dirs {
            for line in &dir.lines {
                for a in &line.samples {
                    for b in &line.samples {
                        let g = dir.coef * self.kernel[(a.pos - b.pos).unsigned_abs() as usize];
                        if g == 0.0 {
                            continue;
                        }
                        for ka in 0..a.len as usize {
                            for kb in 0..b.len as usize {
                                let (i, j) =
                                    (a.idx[ka] as usize, b.idx[kb] as usize);
                                if i <= j {
                                    mat[i][j] += g * a.w[ka] * b.w[kb];
                                }
                            }
                        }
                    }
                }
                for &(p, q, delta) in &line.corrections {
                    let g = dir.coef * delta;
                    let pairs: &[(usize, usize)] = if p == q {
                        &[(p as usize, q as usize)]
                    } else {
                        &[(p as usize, q as usize), (q as usize, p as usize)]
                    };
                    for &(a_idx, b_idx) in pairs {
                        let (a, b) = (&line.samples[a_idx], &line.samples[b_idx]);
                        for ka in 0..a.len as usize {
                            for kb in 0..b.len as usize {
                                let (i, j) = (a.idx[ka] as usize, b.idx[kb] as usize);
                                if i <= j {
                                    mat[i][j] += g * a.w[ka] * b.w[kb];
                                }
                            }
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                mat[i][j] = mat[j][i];
            }
        }
        Ok(mat)
    }
}

fn apply_line(
    line: &Line,
    kernel: &[f64],
    coef: f64,
    u: &[f64],
    out: &mut [f64],
    gather: &mut Vec<f64>,
    stiff: &mut Vec<f64>,
) {
    gather.clear();
    for s in &line.samples {
        let mut acc = 0.0;
        for k in 0..s.len as usize {
            acc += s.w[k] * u[s.idx[k] as usize];
        }
        gather.push(acc);
    }
    // 1-D stiffness along the line
    stiff.clear();
    for sp in &line.samples {
        let mut acc = 0.0;
        for (q, &vq) in gather.iter().enumerate() {
            let m = (sp.pos - line.samples[q].pos).unsigned_abs() as usize;
            acc += kernel[m] * vq;
        }
        stiff.push(acc);
    }
    // boundary-clipping corrections
    for &(p, q, delta) in &line.corrections {
        let (p, q) = (p as usize, q as usize);
        stiff[p] += delta * gather[q];
        if p != q {
            stiff[q] += delta * gather[p];
        }
    }
    // scatter
    for (sp, &w) in line.samples.iter().zip(stiff.iter()) {
        let acc = coef * w;
        for k in 0..sp.len as usize {
            out[sp.idx[k] as usize] += sp.w[k] * acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// solvers
// ---------------------------------------------------------------------------

/// A solved Dirichlet problem.
pub struct DirichletSolution {
    pub u: GridFunction,
    /// CG relative-residual history (last entry is the final residual).
    pub residual_history: Vec<f64>,
    /// the load actually used in the last linear solve
    pub load: GridFunction,
    pub s: f64,
    pub h: f64,
    pub operator_desc: String,
    /// successive-iterate differences of the Picard loop, when applicable
    pub picard_history: Vec<f64>,
}

/// Conjugate gradients with Jacobi preconditioning on the assembled form.
/// The load vector is the mass-lumped quadrature of `f`.
pub fn solve_linear(
    form: &EnergyForm,
    f: &GridFunction,
    opts: &SolverOptions,
) -> Result<DirichletSolution> {
    let rhs = load_vector(form, f);
    let (u, history) = cg(form, &rhs, None, opts)?;
    Ok(DirichletSolution {
        u: form.extend(&u),
        residual_history: history,
        load: f.clone(),
        s: form.s,
        h: form.h,
        operator_desc: form.operator_desc.clone(),
        picard_history: Vec::new(),
    })
}

/// Damped Picard iteration for `Lu = f(x, u)`:
/// `u ← (1−ω) u + ω E⁻¹ load(f(·, u))`.
pub fn solve_semilinear(
    form: &EnergyForm,
    f: &(dyn Fn([f64; 2], f64) -> f64 + Sync),
    opts: &SolverOptions,
) -> Result<DirichletSolution> {
    let n = form.n_unknowns();
    let omega = opts.picard_damping;
    let mut u = vec![0.0; n];
    let mut picard_history = Vec::new();
    let mut first_scale = 0.0_f64;

    for _ in 0..opts.picard_max_iter {
        let load_field = current_load(form, f, &u)?;
        let rhs = load_vector(form, &load_field);
        let (next, residuals) = cg(form, &rhs, Some(&u), opts)?;
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            let blended = (1.0 - omega) * u[i] + omega * next[i];
            diff = diff.max((blended - u[i]).abs());
            scale = scale.max(blended.abs());
            u[i] = blended;
        }
        picard_history.push(diff);
        if first_scale == 0.0 {
            first_scale = scale;
        }
        if !diff.is_finite() || scale > 1e3 * first_scale.max(1e-300) {
            return Err(Error::Convergence(format!(
                "semilinear iteration diverged (scale {scale:.3e} from {first_scale:.3e})"
            )));
        }
        if diff <= opts.picard_tol * scale.max(1e-300) {
            // the load of the accepted iterate, for residual bookkeeping
            let final_load = current_load(form, f, &u)?;
            return Ok(DirichletSolution {
                u: form.extend(&u),
                residual_history: residuals,
                load: final_load,
                s: form.s,
                h: form.h,
                operator_desc: form.operator_desc.clone(),
                picard_history,
            });
        }
    }
    Err(Error::Convergence(format!(
        "semilinear iteration did not converge in {} steps (last diff {:.3e})",
        opts.picard_max_iter,
        picard_history.last().copied().unwrap_or(f64::NAN)
    )))
}

fn current_load(
    form: &EnergyForm,
    f: &(dyn Fn([f64; 2], f64) -> f64 + Sync),
    u: &[f64],
) -> Result<GridFunction> {
    let grid = form.scaffold.grid.clone();
    let mut load = GridFunction::zeros(form.scaffold.clone());
    for (unk, &node) in form.interior_nodes.iter().enumerate() {
        let j = node / grid.nodes[0];
        let i = node % grid.nodes[0];
        let v = f(grid.point(i, j), u[unk]);
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "nonlinearity returned a non-finite value at node {unk}"
            )));
        }
        load.set_interior(i, j, v);
    }
    Ok(load)
}

fn load_vector(form: &EnergyForm, f: &GridFunction) -> Vec<f64> {
    let cell = form.h.powi(form.scaffold.grid.dim as i32);
    form.interior_nodes.iter().map(|&n| f.values()[n] * cell).collect()
}

fn cg(
    form: &EnergyForm,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rhs.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let ax = form.apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], vec![0.0]));
    }
    let mut z: Vec<f64> = r.iter().zip(&form.diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![dot(&r, &r).sqrt() / rhs_norm];

    for _ in 0..opts.cg_max_iter {
        let ap = form.apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Convergence(format!(
                "CG met a non-positive curvature direction (pᵀAp = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / rhs_norm;
        history.push(res);
        if res <= opts.cg_tol {
            return Ok((x, history));
        }
        for i in 0..n {
            z[i] = r[i] / form.diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence(format!(
        "CG did not reach {:.1e} in {} iterations (residual {:.3e})",
        opts.cg_tol,
        opts.cg_max_iter,
        history.last().unwrap()
    )))
}

/// Energy norm squared of a grid function under the given operator:
/// the quadratic form of the assembled stiffness.
pub fn hs_mu_norm(form: &EnergyForm, u: &GridFunction) -> f64 {
    form.quadratic_form_grid(u)
}

/// Max observed ratio of `|a_T^β a − b_T^β b|²` to
/// `(β+1)² (a−b)(a_T^{2β} a − b_T^{2β} b)` over the sample tuples
/// `(a, b, T, β)`. The inequality holds with constant `(β+1)²`, so the
/// returned ratio is ≤ 1 up to rounding; degenerate `a = b` pairs are
/// skipped.
pub fn truncation_inequality_check(samples: &[(f64, f64, f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(a, b, t, beta) in samples {
        if a == b {
            continue;
        }
        let at = a.abs().min(t);
        let bt = b.abs().min(t);
        let lhs = (at.powf(beta) * a - bt.powf(beta) * b).powi(2);
        let rhs = (beta + 1.0).powi(2)
            * (a - b)
            * (at.powf(2.0 * beta) * a - bt.powf(2.0 * beta) * b);
        if rhs <= 0.0 {
            // the bracket is nonnegative whenever a ≠ b; rounding can make
            // it vanish when both sides are ~0
            if lhs > 1e-30 {
                return f64::INFINITY;
            }
            continue;
        }
        worst = worst.max(lhs / rhs);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainKind;
    use crate::numeric::quad;
    use crate::numeric::rng::SplitMix64;

    fn interval_form(s: f64, h: f64) -> EnergyForm {
        let dom = DomainGeometry::new(DomainKind::Interval { a: -1.0, b: 1.0 }).unwrap();
        let a = SpectralDensity::isotropic_normalized(1, s, 2).unwrap();
        assemble_energy(&dom, &OperatorSpec::Density(a), s, h, &SolverOptions::default())
            .unwrap()
    }

    /// Exact Gagliardo pairing of two P1 grid functions on the line:
    /// inner x-integral in closed form per breakpoint interval, adaptive
    /// outer integral in r, analytic tail. Independent of the kernel route.
    fn gagliardo_1d_oracle(nodes_u: &[f64], nodes_v: &[f64], h: f64, s: f64, x0: f64) -> f64 {
        let n = nodes_u.len();
        let span = (n as f64 + 2.0) * h;
        let eval = |vals: &[f64], x: f64| -> f64 {
            let t = (x - x0) / h;
            if t <= -1.0 || t >= n as f64 {
                return 0.0;
            }
            let i = t.floor();
            let frac = t - i;
            let left = if i < 0.0 || i >= n as f64 { 0.0 } else { vals[i as usize] };
            let right = {
                let j = i + 1.0;
                if j < 0.0 || j >= n as f64 { 0.0 } else { vals[j as usize] }
            };
            left * (1.0 - frac) + right * frac
        };
        // C(r) = ∫ (u(x)−u(x+r)) (v(x)−v(x+r)) dx, exact via Simpson on the
        // union breakpoint grid (integrand piecewise quadratic)
        let c_of_r = |r: f64| -> f64 {
            let mut brk: Vec<f64> = Vec::new();
            for k in -1..=(n as i32) {
                brk.push(x0 + k as f64 * h);
                brk.push(x0 + k as f64 * h - r);
            }
            brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
            brk.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            let g = |x: f64| {
                (eval(nodes_u, x) - eval(nodes_u, x + r))
                    * (eval(nodes_v, x) - eval(nodes_v, x + r))
            };
            let mut acc = 0.0;
            for w in brk.windows(2) {
                let (a, b) = (w[0], w[1]);
                let m = 0.5 * (a + b);
                acc += (b - a) / 6.0 * (g(a) + 4.0 * g(m) + g(b));
            }
            acc
        };
        let breaks: Vec<f64> = (1..=(n + 2)).map(|k| k as f64 * h).collect();
        let r_min = 1e-7;
        let resolved = quad::adaptive_split(
            &|r: f64| c_of_r(r) * r.powf(-1.0 - 2.0 * s),
            r_min,
            span,
            &breaks,
            1e-11,
        );
        // C(r) = r² ⟨u', v'⟩ + O(r³) near zero; integrate the leading term
        // over [0, r_min] in closed form
        let grad_pair: f64 = {
            let mut acc = 0.0;
            for k in 0..=n {
                let su = if k < n { nodes_u[k] } else { 0.0 }
                    - if k > 0 { nodes_u[k - 1] } else { 0.0 };
                let sv = if k < n { nodes_v[k] } else { 0.0 }
                    - if k > 0 { nodes_v[k - 1] } else { 0.0 };
                acc += (su / h) * (sv / h) * h;
            }
            acc
        };
        let inner = grad_pair * r_min.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        // beyond the span the translates are disjoint: C(r) = 2 ∫ u v
        let mut uv = 0.0;
        let c_inf = {
            for w in 0..(n + 1) {
                let a = x0 + (w as f64 - 1.0) * h;
                let b = a + h;
                let m = 0.5 * (a + b);
                let g = |x: f64| eval(nodes_u, x) * eval(nodes_v, x);
                uv += (b - a) / 6.0 * (g(a) + 4.0 * g(m) + g(b));
            }
            2.0 * uv
        };
        let tail = c_inf * span.powf(-2.0 * s) / (2.0 * s);
        // both half-lines contribute equally
        2.0 * (inner + resolved + tail)
    }

    #[test]
    fn line_kernel_matches_gagliardo_oracle() {
        // hat pairs on a tiny grid vs the exact double integral
        for &s in &[0.3, 0.5, 0.75] {
            let h = 0.25_f64;
            let kernel = hat_line_kernel(s, 8);
            let scale = h.powf(1.0 - 2.0 * s);
            for m in 0..4usize {
                let mut u = vec![0.0; 9];
                let mut v = vec![0.0; 9];
                u[2] = 1.0;
                v[2 + m] = 1.0;
                let oracle = gagliardo_1d_oracle(&u, &v, h, s, -1.0);
                let got = scale * kernel[m];
                assert!(
                    (got - oracle).abs() < 1e-6 * oracle.abs().max(1.0),
                    "s = {s}, m = {m}: kernel {got} vs oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn line_kernel_asymptotic_crossover_is_smooth() {
        for &s in &[0.2, 0.5, 0.9] {
            let kernel = hat_line_kernel(s, 300);
            // recompute m = 256..300 with the exact difference path by
            // shifting: compare against a kernel built with a lower switch
            let kappa = 3.0 - 2.0 * s;
            let d_full = (2.0 * s - 3.0) * (2.0 * s - 2.0) * (2.0 * s - 1.0) * (2.0 * s);
            for m in 256..260usize {
                let f = |b: f64| b.abs().powf(kappa);
                let mf = m as f64;
                let exact = if (2.0 * s - 1.0).abs() < 1e-6 {
                    let g = |b: f64| b * b * b.abs().ln();
                    (g(mf - 2.0) - 4.0 * g(mf - 1.0) + 6.0 * g(mf) - 4.0 * g(mf + 1.0)
                        + g(mf + 2.0))
                        * 1.0
                } else {
                    -2.0 * (f(mf - 2.0) - 4.0 * f(mf - 1.0) + 6.0 * f(mf) - 4.0 * f(mf + 1.0)
                        + f(mf + 2.0))
                        / d_full
                };
                assert!(
                    (kernel[m] - exact).abs() < 2e-5 * exact.abs(),
                    "s = {s}, m = {m}: {} vs {exact}",
                    kernel[m]
                );
            }
        }
    }

    #[test]
    fn dense_matrix_is_bitwise_symmetric_and_positive() {
        let form = interval_form(0.5, 0.125);
        let mat = form.to_dense().unwrap();
        let n = form.n_unknowns();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(mat[i][j].to_bits(), mat[j][i].to_bits());
            }
        }
        let mut rng = SplitMix64::new(11);
        for _ in 0..5 {
            let v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            assert!(form.quadratic_form(&v) > 0.0);
        }
        // matrix-free apply agrees with the dense materialization
        let v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let y = form.apply(&v);
        for i in 0..n {
            let yi: f64 = (0..n).map(|j| mat[i][j] * v[j]).sum();
            assert!((y[i] - yi).abs() < 1e-12 * yi.abs().max(1.0));
        }
    }

    #[test]
    fn assembled_matrix_matches_double_sum_oracle() {
        // isotropic constant density, tiny 1-D grid: entries of the energy
        // against the exact Gagliardo double integral of hat pairs
        let s = 0.5;
        let h = 0.125;
        let dom = DomainGeometry::new(DomainKind::Interval { a: -1.0, b: 1.0 }).unwrap();
        let a = SpectralDensity::new(1, vec![1.0, 1.0]).unwrap();
        let form = assemble_energy(
            &dom,
            &OperatorSpec::Density(a),
            s,
            h,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(form.n_unknowns() <= 30);
        let dense = form.to_dense().unwrap();
        // E = (1/2)(a₊ + a₋) B = B for a ≡ 1
        let n = form.n_unknowns();
        for &(i, j) in &[(0usize, 0usize), (3, 3), (3, 4), (2, 6), (0, n - 1)] {
            let mut u = vec![0.0; n];
            let mut v = vec![0.0; n];
            u[i] = 1.0;
            v[j] = 1.0;
            let oracle = gagliardo_1d_oracle(&u, &v, h, s, -1.0 + h);
            assert!(
                (dense[i][j] - oracle).abs() < 1e-6 * oracle.abs().max(1.0),
                "entry ({i},{j}): {} vs {oracle}",
                dense[i][j]
            );
        }
    }

    #[test]
    fn stiffness_row_sums_positive_for_dirichlet() {
        // constants are not harmonic with exterior zero: E·1 has positive entries
        let form = interval_form(0.5, 1.0 / 32.0);
        let ones = vec![1.0; form.n_unknowns()];
        let y = form.apply(&ones);
        assert!(y.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn one_d_reference_solution() {
        // s = 1/2, f ≡ 1 on (−1, 1): u = √(1−x²)
        let s = 0.5;
        let h = 1.0 / 128.0;
        let form = interval_form(s, h);
        let f = GridFunction::from_fn(form.scaffold().clone(), |_| 1.0).unwrap();
        let sol = solve_linear(&form, &f, &SolverOptions::default()).unwrap();
        assert!(*sol.residual_history.last().unwrap() <= 1e-10);
        let grid = sol.u.grid().clone();
        let mut worst = 0.0_f64;
        for i in 0..grid.nodes[0] {
            let x = grid.point(i, 0);
            let exact = (1.0 - x[0] * x[0]).max(0.0).sqrt();
            worst = worst.max((sol.u.node_value(i, 0) - exact).abs());
        }
        assert!(worst <= 0.03, "max nodal error {worst}");

        // Galerkin orthogonality: the discrete residual vanishes on every
        // basis function after the solve
        let load = load_vector(&form, &f);
        let eu = form.apply(&form.restrict(&sol.u));
        let scale = load.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res_inf = eu
            .iter()
            .zip(&load)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(res_inf <= 1e-9 * scale, "residual {res_inf} vs scale {scale}");
    }

    #[test]
    fn atomic_assembly_matches_its_density_quadrature() {
        // an atomic measure sampled from a smooth density assembles an
        // energy close to the density's own
        let s = 0.5;
        let h = 1.0 / 16.0;
        let dom = DomainGeometry::new(DomainKind::Ball { center: [0.0, 0.0], radius: 1.0 })
            .unwrap();
        let profile =
            |phi: f64| crate::numeric::special::fractional_laplacian_density(2, 0.5)
                * (1.0 + 0.5 * (2.0 * phi).cos());
        let n = 32;
        let a = SpectralDensity::from_fn(n, profile).unwrap();
        let atoms: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                (phi, profile(phi) * 2.0 * std::f64::consts::PI / n as f64)
            })
            .collect();
        let mu = AtomicSpectralMeasure::new(2, atoms).unwrap();
        let opts = SolverOptions { n_dir: n, ..SolverOptions::default() };
        let dense_form =
            assemble_energy(&dom, &OperatorSpec::Density(a), s, h, &opts).unwrap();
        let atomic_form =
            assemble_energy(&dom, &OperatorSpec::Atomic(mu), s, h, &opts).unwrap();
        let bump = GridFunction::from_fn(dense_form.scaffold().clone(), |p| {
            (-(p[0] * p[0] + p[1] * p[1]) / 0.1).exp()
        })
        .unwrap();
        let e1 = dense_form.quadratic_form_grid(&bump);
        let e2 = atomic_form.quadratic_form_grid(&bump);
        assert!(e1 > 0.0 && e2 > 0.0);
        assert!(
            (e1 - e2).abs() <= 0.02 * e1,
            "density energy {e1} vs atomic energy {e2}"
        );
    }

    #[test]
    fn two_d_ball_reference_coarse() {
        // normalized isotropic operator on the unit disc, f ≡ 1:
        // u = γ (1−|x|²)^s with γ = Γ(n/2)/(4^s Γ(n/2+s) Γ(1+s));
        // coarse grid, so these bounds are loose; a normalization error
        // would show up at O(1)
        let dom = DomainGeometry::new(DomainKind::Ball { center: [0.0, 0.0], radius: 1.0 })
            .unwrap();
        let errors = |s: f64, h: f64| -> (f64, f64) {
            let a = SpectralDensity::isotropic_normalized(2, s, 128).unwrap();
            let form = assemble_energy(
                &dom,
                &OperatorSpec::Density(a),
                s,
                h,
                &SolverOptions::default(),
            )
            .unwrap();
            let f = GridFunction::from_fn(form.scaffold().clone(), |_| 1.0).unwrap();
            let sol = solve_linear(&form, &f, &SolverOptions::default()).unwrap();
            let gamma = crate::numeric::special::gamma(1.0)
                / (4.0_f64.powf(s)
                    * crate::numeric::special::gamma(1.0 + s)
                    * crate::numeric::special::gamma(1.0 + s));
            let grid = sol.u.grid().clone();
            let mut worst = 0.0_f64;
            let mut worst_resolved = 0.0_f64;
            for j in 0..grid.nodes[1] {
                for i in 0..grid.nodes[0] {
                    let p = grid.point(i, j);
                    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    let exact = gamma * (1.0 - r * r).max(0.0).powf(s);
                    let e = (sol.u.node_value(i, j) - exact).abs();
                    worst = worst.max(e);
                    if 1.0 - r > 2.0 * h {
                        worst_resolved = worst_resolved.max(e);
                    }
                }
            }
            (worst / gamma, worst_resolved / gamma)
        };
        // s = 3/4: the boundary profile is mild enough for nodal accuracy
        // right up to the wall
        let (all, _) = errors(0.75, 1.0 / 16.0);
        assert!(all < 0.02, "s = 3/4 relative L∞ {all}");
        // s = 1/2: nodes inside the unresolved 2h collar see the sub-cell
        // d^{1/2} cusp; the resolved region must still be accurate
        let (all, resolved) = errors(0.5, 1.0 / 16.0);
        assert!(resolved < 0.015, "s = 1/2 resolved-region error {resolved}");
        assert!(all < 0.2, "s = 1/2 all-nodes error {all}");
    }

    #[test]
    fn one_d_unaligned_boundary() {
        // endpoints off the grid: the clipped end hats must keep the
        // Dirichlet wall at the true boundary
        let s = 0.5;
        let h = 1.0 / 16.0;
        let (aa, bb) = (-1.0, 1.03);
        let dom = DomainGeometry::new(DomainKind::Interval { a: aa, b: bb }).unwrap();
        let dens = SpectralDensity::isotropic_normalized(1, s, 2).unwrap();
        let form = assemble_energy(
            &dom,
            &OperatorSpec::Density(dens),
            s,
            h,
            &SolverOptions::default(),
        )
        .unwrap();
        let f = GridFunction::from_fn(form.scaffold().clone(), |_| 1.0).unwrap();
        let sol = solve_linear(&form, &f, &SolverOptions::default()).unwrap();
        let c = 0.5 * (aa + bb);
        let r = 0.5 * (bb - aa);
        let grid = sol.u.grid().clone();
        let mut worst = 0.0_f64;
        for i in 0..grid.nodes[0] {
            let x = grid.point(i, 0)[0];
            let exact = (r * r - (x - c) * (x - c)).max(0.0).sqrt();
            let e = (sol.u.node_value(i, 0) - exact).abs();
            if e > worst {
                worst = e;
            }
        }
        eprintln!("1-D unaligned worst abs error {worst} (r = {r})");
        assert!(worst / r < 0.05, "relative error {}", worst / r);
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let form = interval_form(0.4, 0.125);
        let f = GridFunction::zeros(form.scaffold().clone());
        let sol = solve_linear(&form, &f, &SolverOptions::default()).unwrap();
        assert!(sol.u.max_abs() == 0.0);
    }

    #[test]
    fn semilinear_fixed_point() {
        // f(x, u) = 1 − u converges and the fixed point solves Lu + u = 1
        let s = 0.5;
        let h = 1.0 / 64.0;
        let form = interval_form(s, h);
        let opts = SolverOptions::default();
        let sol = solve_semilinear(&form, &|_, u| 1.0 - u, &opts).unwrap();
        assert!(!sol.picard_history.is_empty());
        // residual check via the assembled operator: E u = load(1 − u)
        let uvec = form.restrict(&sol.u);
        let eu = form.apply(&uvec);
        let load = load_vector(&form, &sol.load);
        let mut worst = 0.0_f64;
        for i in 0..uvec.len() {
            worst = worst.max((eu[i] - load[i]).abs());
        }
        let scale = load.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        assert!(worst <= 1e-6 * scale, "galerkin residual {worst} vs {scale}");

        // f independent of u reproduces the linear solve in one outer step
        let lin = solve_semilinear(&form, &|_, _| 1.0, &opts).unwrap();
        let direct = solve_linear(
            &form,
            &GridFunction::from_fn(form.scaffold().clone(), |_| 1.0).unwrap(),
            &opts,
        )
        .unwrap();
        let mut diff = 0.0_f64;
        for (a, b) in lin.u.values().iter().zip(direct.u.values()) {
            diff = diff.max((a - b).abs());
        }
        assert!(diff <= 1e-7, "picard vs direct linear: {diff}");
    }

    #[test]
    fn semilinear_subcritical_power_converges() {
        // f(u) = u³ + ½ on the disc, subcritical for s = 3/4 in 2-D:
        // the damped iteration converges from the zero initial guess
        let s = 0.75;
        let h = 1.0 / 16.0;
        let dom = DomainGeometry::new(DomainKind::Ball { center: [0.0, 0.0], radius: 1.0 })
            .unwrap();
        let a = SpectralDensity::isotropic_normalized(2, s, 64).unwrap();
        let opts = SolverOptions::default();
        let form = assemble_energy(&dom, &OperatorSpec::Density(a), s, h, &opts).unwrap();
        let sol = solve_semilinear(&form, &|_, u| u * u * u + 0.5, &opts).unwrap();
        let steps = sol.picard_history.len();
        assert!(steps > 1 && steps < opts.picard_max_iter, "picard steps {steps}");
        // the recorded final load is f(x, u) of the accepted iterate
        let uvec = form.restrict(&sol.u);
        let eu = form.apply(&uvec);
        let load = load_vector(&form, &sol.load);
        let scale = load.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let worst = eu
            .iter()
            .zip(&load)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst <= 1e-5 * scale, "fixed-point residual {worst} vs {scale}");
    }

    #[test]
    fn energy_norm_scaling_and_equivalence() {
        let s = 0.6;
        let h = 1.0 / 32.0;
        let dom = DomainGeometry::new(DomainKind::Interval { a: -1.0, b: 1.0 }).unwrap();
        let aniso = SpectralDensity::new(1, vec![0.8, 0.8]).unwrap();
        let iso = SpectralDensity::isotropic_normalized(1, s, 2).unwrap();
        let opts = SolverOptions::default();
        let form = assemble_energy(&dom, &OperatorSpec::Density(aniso), s, h, &opts).unwrap();
        let reference = assemble_energy(&dom, &OperatorSpec::Density(iso), s, h, &opts).unwrap();

        let mut rng = SplitMix64::new(99);
        let mut ratios = Vec::new();
        for _ in 0..50 {
            let c = rng.uniform(-0.6, 0.6);
            let w = rng.uniform(0.05, 0.3);
            let bump = GridFunction::from_fn(form.scaffold().clone(), |p| {
                (-((p[0] - c) / w).powi(2)).exp()
            })
            .unwrap();
            let e = hs_mu_norm(&form, &bump);
            let r = hs_mu_norm(&reference, &bump);
            assert!(e > 0.0 && r > 0.0);
            ratios.push(e / r);

            // quadratic scaling: u ↦ 2u multiplies the norm by 4
            let mut doubled = bump.clone();
            doubled.scale(2.0);
            let e4 = hs_mu_norm(&form, &doubled);
            assert!((e4 - 4.0 * e).abs() < 1e-10 * e4.abs());
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0_f64, f64::max);
        assert!(lo > 0.0 && hi.is_finite());
        assert!(hi / lo < 4.0, "equivalence ratios spread too far: [{lo}, {hi}]");
    }

    #[test]
    fn truncation_inequality_bounds() {
        let mut rng = SplitMix64::new(4);
        let mut samples = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let a = rng.uniform(-5.0, 5.0);
            let b = rng.uniform(-5.0, 5.0);
            let t = rng.uniform(1e-3, 10.0);
            let beta = rng.uniform(0.0, 4.0);
            samples.push((a, b, t, beta));
        }
        let worst = truncation_inequality_check(&samples);
        assert!(worst <= 1.0 + 1e-12, "ratio {worst}");

        // β = 0 attains the constant exactly
        let eq = truncation_inequality_check(&[(2.0, -1.0, 5.0, 0.0)]);
        assert!((eq - 1.0).abs() < 1e-14);
        // a = b degenerates to 0 = 0
        assert_eq!(truncation_inequality_check(&[(1.0, 1.0, 1.0, 2.0)]), 0.0);
    }

    #[test]
    fn maximum_principle_smoke() {
        let s = 0.5;
        let dom = DomainGeometry::new(DomainKind::Interval { a: -1.0, b: 1.0 }).unwrap();
        let a = SpectralDensity::isotropic_normalized(1, s, 2).unwrap();
        let opts = SolverOptions::default();
        let mut floors = Vec::new();
        for &h in &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
            let form =
                assemble_energy(&dom, &OperatorSpec::Density(a.clone()), s, h, &opts).unwrap();
            let f = GridFunction::from_fn(form.scaffold().clone(), |p| {
                1.0 + 0.5 * (3.0 * p[0]).sin()
            })
            .unwrap();
            let sol = solve_linear(&form, &f, &opts).unwrap();
            let min = sol.u.values().iter().cloned().fold(f64::INFINITY, f64::min);
            floors.push((-min).max(0.0));
        }
        // any undershoot must shrink under refinement
        assert!(floors[2] <= floors[0].max(1e-12), "floors {floors:?}");
        assert!(floors[2] < 1e-3);
    }
}
