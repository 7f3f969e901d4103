//! Shared numeric utilities: special functions, adaptive quadrature, a
//! deterministic RNG and a tiny dense least-squares solver.

pub mod lsq;
pub mod quad;
pub mod rng;
pub mod special;

/// Relative-defect helper used by reports: `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_defect(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
