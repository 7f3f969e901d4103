//! Gamma function and the analytic constants of the symbol calculus.

use std::f64::consts::PI;

/// Lanczos coefficients (g = 7, n = 9), good to ~1e-14 relative on the
/// positive axis.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (poles return ±inf).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x) Γ(1−x) = π / sin(πx).
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Normalization constant of the Fourier symbol,
/// `c_s = π / (sin(πs) Γ(1+2s))`.
///
/// With this constant the raw second-difference quadrature of the kernel
/// `a(y/|y|) |y|^{−n−2s}` acts on plane waves with multiplier exactly
/// `c_s ∫ |ξ·θ|^{2s} a(θ) dθ`, in every dimension.
pub fn symbol_constant(s: f64, range: (f64, f64)) -> crate::Result<f64> {
    if !(s > range.0 && s < range.1) {
        return Err(crate::Error::Domain(format!(
            "order s = {s} outside the accepted range ({}, {})",
            range.0, range.1
        )));
    }
    Ok(PI / ((PI * s).sin() * gamma(1.0 + 2.0 * s)))
}

/// Default accepted range for the order `s`; the constant `c_s` and the
/// sphere quadratures degenerate at the endpoints of `(0, 1)`.
pub const DEFAULT_S_RANGE: (f64, f64) = (0.05, 0.95);

/// Scale applied by the half-operator evaluator so that its Fourier
/// multiplier is `√A(ξ)` when the kernel density `b` is normalized to
/// reproduce `√A` under the sphere pairing `∫ |ν·θ|^s b(θ) dθ`.
///
/// Derivation: a second-difference quadrature with radial exponent `1+s`
/// multiplies plane waves by `C(s) ∫ |ξ·θ|^s b(θ) dθ` with
/// `C(s) = π / (2 Γ(1+s) sin(πs/2))`; the evaluator divides this out.
pub fn half_eval_scale(s: f64) -> f64 {
    2.0 * (PI * s / 2.0).sin() * gamma(1.0 + s) / PI
}

/// Isotropic density level that normalizes the operator to the fractional
/// Laplacian of order `2s`: with `a ≡ fractional_laplacian_density(n, s)`
/// the symbol is identically `|ξ|^{2s}`.
pub fn fractional_laplacian_density(dim: usize, s: f64) -> f64 {
    // c_{n,s} = 4^s s Γ(n/2 + s) / (π^{n/2} Γ(1 − s)); the kernel form used
    // here carries the full second difference, hence the extra 1/2.
    let n = dim as f64;
    let c_ns =
        4.0_f64.powf(s) * s * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(1.0 - s));
    c_ns / 2.0
}

/// `∫_0^{2π} |cos ψ|^p cos(kψ) dψ` in closed form (zero for odd `k`).
///
/// Used as an oracle for the adaptively computed zonal multipliers.
pub fn zonal_multiplier_closed_form(p: f64, k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let j = (k / 2) as f64;
    let down = gamma(1.0 + p / 2.0 + j) * gamma(1.0 + p / 2.0 - j);
    2.0 * PI * gamma(p + 1.0) / (2.0_f64.powf(p) * down)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_reference_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(2.0) - 1.0).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-14);
        // negative argument through reflection
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gamma_duplication_identity() {
        // Γ(2z) = 2^{2z-1} Γ(z) Γ(z+1/2) / √π
        for &z in &[0.3, 0.7, 1.1, 2.6] {
            let lhs = gamma(2.0 * z);
            let rhs = 2.0_f64.powf(2.0 * z - 1.0) * gamma(z) * gamma(z + 0.5) / PI.sqrt();
            assert!((lhs - rhs).abs() / rhs.abs() < 1e-12);
        }
    }

    #[test]
    fn symbol_constant_reference() {
        // s = 1/2: sin(π/2) = 1, Γ(2) = 1.
        assert!((symbol_constant(0.5, DEFAULT_S_RANGE).unwrap() - PI).abs() < 1e-14);
        // s = 1/4: c = π/(sin(π/4) Γ(3/2)) = 2 √(2π).
        let c = symbol_constant(0.25, DEFAULT_S_RANGE).unwrap();
        assert!((c - 2.0 * (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!(symbol_constant(0.01, DEFAULT_S_RANGE).is_err());
        assert!(symbol_constant(0.99, DEFAULT_S_RANGE).is_err());
        assert!(symbol_constant(-0.3, DEFAULT_S_RANGE).is_err());
    }

    #[test]
    fn symbol_constant_reflection_route() {
        // π/(sin(πs) Γ(1+2s)) = Γ(s) Γ(1−s) / Γ(1+2s): two gamma routes agree.
        for i in 0..20 {
            let s = 0.06 + 0.044 * i as f64;
            let a = symbol_constant(s, DEFAULT_S_RANGE).unwrap();
            let b = gamma(s) * gamma(1.0 - s) / gamma(1.0 + 2.0 * s);
            assert!((a - b).abs() / b.abs() < 1e-13, "s = {s}: {a} vs {b}");
        }
    }

    #[test]
    fn zonal_multiplier_reference() {
        // p = 1: ∫|cos| = 4, ∫|cos ψ| cos 2ψ = 4/3.
        assert!((zonal_multiplier_closed_form(1.0, 0) - 4.0).abs() < 1e-12);
        assert!((zonal_multiplier_closed_form(1.0, 2) - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(zonal_multiplier_closed_form(1.0, 3), 0.0);
    }
}
