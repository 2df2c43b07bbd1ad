//! Stationary points of the distortion as roots of a quartic in `y1`.
//!
//! Writing each distortion term as `f_i / g_i^2` (quadratic over squared
//! linear), the derivative numerator reduces to
//! `m4 (m2 y + m1)(y + m3)^3 + m8 (m6 y + m5)(y + m7)^3`, whose expansion gives
//! the coefficients below. The roots are computed with the radical formula
//! in complex arithmetic, then polished with Newton's method.

use num_complex::Complex64;

use crate::distortion::DistortionOperands;
use crate::error::{Error, Result};

/// Intermediates and coefficients of `a y^4 + b y^3 + c y^2 + d y + e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticProblem {
    pub m: [f64; 8],
    /// `[a, b, c, d, e]`.
    pub coeffs: [f64; 5],
    /// Both cameras contribute identical terms: the stationarity condition
    /// collapses to the linear factor `m2 y + m1`.
    pub degenerate: bool,
}

impl QuarticProblem {
    /// Closed-form minimiser `-m1 / m2` of the identical-camera case.
    pub fn linear_solution(&self) -> f64 {
        -self.m[0] / self.m[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub y: f64,
    /// `|P(y)| / max(|a| y^4, |b y^3|, |c| y^2, |d y|, |e|, 1)`.
    pub residual: f64,
    /// Distortion at `y`, once evaluated; `None` inside a pole-exclusion zone.
    pub distortion: Option<f64>,
}

/// Real roots, ascending and deduplicated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RootSet {
    pub roots: Vec<Root>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.y).collect()
    }

    /// Fill in the distortion of every admissible root.
    pub fn evaluate(&mut self, ops: &DistortionOperands) {
        for root in &mut self.roots {
            root.distortion = ops.distortion_of_y(root.y).ok();
        }
    }
}

pub fn quartic_coefficients(ops: &DistortionOperands) -> Result<QuarticProblem> {
    let (m1, c1, m2, c2) = (&ops.m1, &ops.c1, &ops.m2, &ops.c2);
    // C_i = g g^T, so [C_i]_22 = g_2^2: test the factor g_2 against |g|.
    // The m_k only divide by [C_i]_22, which costs no relative precision.
    if !(c1[(1, 1)].abs() > 1e-28 * c1.trace().abs()) {
        return Err(Error::DegenerateC(1));
    }
    if !(c2[(1, 1)].abs() > 1e-28 * c2.trace().abs()) {
        return Err(Error::DegenerateC(2));
    }
    let m = [
        m1[(1, 2)] * c1[(1, 2)] - m1[(2, 2)] * c1[(1, 1)],
        m1[(1, 1)] * c1[(1, 2)] - m1[(1, 2)] * c1[(1, 1)],
        c2[(1, 2)] / c2[(1, 1)],
        c2[(1, 1)] / c1[(1, 1)],
        m2[(1, 2)] * c2[(1, 2)] - m2[(2, 2)] * c2[(1, 1)],
        m2[(1, 1)] * c2[(1, 2)] - m2[(1, 2)] * c2[(1, 1)],
        c1[(1, 2)] / c1[(1, 1)],
        c1[(1, 1)] / c2[(1, 1)],
    ];
    let [m1, m2, m3, m4, m5, m6, m7, m8] = m;
    let coeffs = [
        m2 * m4 + m6 * m8,
        m1 * m4 + 3.0 * m2 * m3 * m4 + m5 * m8 + 3.0 * m6 * m7 * m8,
        3.0 * m1 * m3 * m4 + 3.0 * m2 * m3 * m3 * m4 + 3.0 * m5 * m7 * m8 + 3.0 * m6 * m7 * m7 * m8,
        3.0 * m1 * m3 * m3 * m4 + m2 * m3.powi(3) * m4 + 3.0 * m5 * m7 * m7 * m8 + m6 * m7.powi(3) * m8,
        m1 * m3.powi(3) * m4 + m5 * m7.powi(3) * m8,
    ];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteCoefficients);
    }
    let close =
        |a: &nalgebra::Matrix3<f64>, b: &nalgebra::Matrix3<f64>| (a - b).norm() <= 1e-12 * a.norm().max(b.norm());
    let degenerate = close(&ops.m1, &ops.m2) && close(&ops.c1, &ops.c2);
    Ok(QuarticProblem { m, coeffs, degenerate })
}

/// Real roots of the stationarity quartic. Away from the identical-camera
/// case, roots are further polished on the unexpanded product form, which is
/// better conditioned near the poles than the expanded coefficients.
pub fn solve_quartic(problem: &QuarticProblem) -> Result<RootSet> {
    let roots = real_roots(problem.coeffs)?;
    if problem.degenerate {
        return Ok(roots);
    }
    let polished = roots.roots.iter().map(|r| polish_factored(&problem.m, r.y)).collect();
    Ok(deduplicate(problem.coeffs, polished))
}

/// Real roots of `c[0] y^4 + ... + c[4]`, polished and deduplicated.
pub fn real_roots(coeffs: [f64; 5]) -> Result<RootSet> {
    let (poly, s) = normalize(coeffs)?;
    let candidates: Vec<f64> = complex_roots_normalized(&poly)
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
        .map(|z| s * polish_real(&poly, z.re))
        .collect();
    Ok(deduplicate(coeffs, candidates))
}

fn relative_residual(coeffs: [f64; 5], y: f64) -> f64 {
    let terms: Vec<f64> = coeffs.iter().enumerate().map(|(k, c)| c * y.powi(4 - k as i32)).collect();
    let scale = terms.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
    terms.iter().sum::<f64>().abs() / scale
}

/// Sort ascending and merge roots within `1e-8 (1 + |y|)`, keeping the one
/// with the smaller residual.
fn deduplicate(coeffs: [f64; 5], mut candidates: Vec<f64>) -> RootSet {
    candidates.sort_by(|a, b| a.total_cmp(b));
    let mut roots: Vec<Root> = Vec::with_capacity(candidates.len());
    for y in candidates {
        let residual = relative_residual(coeffs, y);
        match roots.last_mut() {
            Some(last) if (y - last.y).abs() <= 1e-8 * (1.0 + last.y.abs()) => {
                if residual < last.residual {
                    *last = Root { y, residual, distortion: None };
                }
            }
            _ => roots.push(Root { y, residual, distortion: None }),
        }
    }
    RootSet { roots }
}

/// `m4 (m2 y + m1)(y + m3)^3 + m8 (m6 y + m5)(y + m7)^3` and its derivative.
fn eval_factored(m: &[f64; 8], y: f64) -> (f64, f64) {
    let [m1, m2, m3, m4, m5, m6, m7, m8] = *m;
    let (u, v) = (m2 * y + m1, y + m3);
    let (s, r) = (m6 * y + m5, y + m7);
    let p = m4 * u * v.powi(3) + m8 * s * r.powi(3);
    let dp = m4 * (m2 * v.powi(3) + 3.0 * u * v * v) + m8 * (m6 * r.powi(3) + 3.0 * s * r * r);
    (p, dp)
}

fn polish_factored(m: &[f64; 8], mut y: f64) -> f64 {
    let (mut py, _) = eval_factored(m, y);
    for _ in 0..NEWTON_ITERATIONS {
        let (_, dp) = eval_factored(m, y);
        if dp == 0.0 || py == 0.0 || !dp.is_finite() {
            break;
        }
        let step = py / dp;
        let next = y - step;
        let (pn, _) = eval_factored(m, next);
        if !(pn.abs() < py.abs()) {
            break;
        }
        y = next;
        py = pn;
        if step.abs() <= NEWTON_TOLERANCE * y.abs().max(1.0) {
            break;
        }
    }
    y
}

/// All complex roots (with multiplicity) of the polynomial after dropping
/// negligible leading coefficients.
pub fn complex_roots(coeffs: [f64; 5]) -> Result<Vec<Complex64>> {
    let (poly, s) = normalize(coeffs)?;
    Ok(complex_roots_normalized(&poly).into_iter().map(|z| z * s).collect())
}

/// Substitute `y = s t` with `s` a power of two balancing the outermost
/// nonzero coefficients, divide by the largest magnitude and strip leading
/// coefficients below `1e-13`. Returns coefficients in `t`, highest degree
/// first, and `s`.
fn normalize(coeffs: [f64; 5]) -> Result<(Vec<f64>, f64)> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteCoefficients);
    }
    let first = coeffs.iter().position(|&c| c != 0.0).ok_or(Error::AllCoefficientsZero)?;
    let last = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(first);
    let s = if last > first {
        let ratio = (coeffs[last] / coeffs[first]).abs();
        2f64.powi((ratio.log2() / (last - first) as f64).round() as i32)
    } else {
        1.0
    };
    let scaled: Vec<f64> = coeffs.iter().enumerate().map(|(k, c)| c * s.powi(4 - k as i32)).collect();
    let scale = scaled.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonFiniteCoefficients);
    }
    let lead = scaled.iter().position(|c| c.abs() / scale > 1e-13).unwrap_or(4);
    Ok((scaled[lead..].iter().map(|c| c / scale).collect(), s))
}

fn complex_roots_normalized(poly: &[f64]) -> Vec<Complex64> {
    let raw = match poly.len() {
        5 => quartic_radicals(poly[0], poly[1], poly[2], poly[3], poly[4]),
        4 => cubic_radicals(poly[0], poly[1], poly[2], poly[3]).to_vec(),
        3 => quadratic_roots(c(poly[0]), c(poly[1]), c(poly[2])).to_vec(),
        2 => vec![c(-poly[1] / poly[0])],
        _ => Vec::new(),
    };
    raw.into_iter().map(|z| polish_complex(poly, z)).collect()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Radical formula for the quartic. With `Q` the half square root of the
/// resolvent, the roots are `-b/4a - Q ± sqrt(-4Q^2 - 2p + S/Q)/2` and
/// `-b/4a + Q ± sqrt(-4Q^2 - 2p - S/Q)/2`.
fn quartic_radicals(a: f64, b: f64, cc: f64, d: f64, e: f64) -> Vec<Complex64> {
    let p = (8.0 * a * cc - 3.0 * b * b) / (8.0 * a * a);
    let s_dep = (8.0 * a * a * d - 4.0 * a * b * cc + b.powi(3)) / (8.0 * a.powi(3));
    let q = 12.0 * a * e - 3.0 * b * d + cc * cc;
    let s = 27.0 * a * d * d - 72.0 * a * cc * e + 27.0 * b * b * e - 9.0 * b * cc * d + 2.0 * cc.powi(3);
    let shift = c(-b / (4.0 * a));

    let disc = c(s * s - 4.0 * q.powi(3)).sqrt();
    // Larger-magnitude branch of s ± sqrt(.).
    let inner = if (c(s) + disc).norm() >= (c(s) - disc).norm() { c(s) + disc } else { c(s) - disc };
    let delta0 = (inner / 2.0).powf(1.0 / 3.0);

    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut best_q = c(0.0);
    for k in 0..3 {
        let d0 = delta0 * omega.powu(k);
        let resolvent = if d0.norm() == 0.0 { c(0.0) } else { d0 + c(q) / d0 };
        let big_q = 0.5 * (c(-2.0 / 3.0 * p) + resolvent / (3.0 * a)).sqrt();
        if big_q.norm() > best_q.norm() {
            best_q = big_q;
        }
    }

    let r =
        (-3.0 * b.powi(4) + 256.0 * a.powi(3) * e - 64.0 * a * a * b * d + 16.0 * a * b * b * cc) / (256.0 * a.powi(4));
    let depressed_scale = p.abs().max(s_dep.abs().powf(2.0 / 3.0)).max(r.abs().sqrt());
    if best_q.norm_sqr() <= 1e-12 * depressed_scale {
        // Q = 0 means S = 0: the depressed quartic t^4 + p t^2 + r factors as
        // (t^2 - u1)(t^2 - u2).
        let [u1, u2] = quadratic_roots(c(1.0), c(p), c(r));
        let (t1, t2) = (u1.sqrt(), u2.sqrt());
        return vec![shift + t1, shift - t1, shift + t2, shift - t2];
    }
    let big_q = best_q;
    let base = -4.0 * big_q * big_q - 2.0 * p;
    let minus = (base + s_dep / big_q).sqrt() * 0.5;
    let plus = (base - s_dep / big_q).sqrt() * 0.5;
    vec![shift - big_q + minus, shift - big_q - minus, shift + big_q + plus, shift + big_q - plus]
}

fn cubic_radicals(a: f64, b: f64, cc: f64, d: f64) -> [Complex64; 3] {
    let d0 = b * b - 3.0 * a * cc;
    let d1 = 2.0 * b.powi(3) - 9.0 * a * b * cc + 27.0 * a * a * d;
    let disc = c(d1 * d1 - 4.0 * d0.powi(3)).sqrt();
    let inner = if (c(d1) + disc).norm() >= (c(d1) - disc).norm() { c(d1) + disc } else { c(d1) - disc };
    let big_c = (inner / 2.0).powf(1.0 / 3.0);
    let shift = c(-b / (3.0 * a));
    if big_c.norm() == 0.0 {
        return [shift; 3];
    }
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut out = [c(0.0); 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let ck = big_c * omega.powu(k as u32);
        *slot = shift - (ck + c(d0) / ck) / (3.0 * a);
    }
    out
}

fn quadratic_roots(a: Complex64, b: Complex64, cc: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * a * cc).sqrt();
    let q = if (b + disc).norm() >= (b - disc).norm() { -(b + disc) / 2.0 } else { -(b - disc) / 2.0 };
    if q.norm() == 0.0 {
        return [c(0.0), c(0.0)];
    }
    [q / a, cc / q]
}

fn eval_complex(poly: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = c(0.0);
    let mut dp = c(0.0);
    for &k in poly {
        dp = dp * z + p;
        p = p * z + k;
    }
    (p, dp)
}

fn eval_real(poly: &[f64], y: f64) -> f64 {
    poly.iter().fold(0.0, |acc, k| acc * y + k)
}

fn eval_real_with_derivative(poly: &[f64], y: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &k in poly {
        dp = dp * y + p;
        p = p * y + k;
    }
    (p, dp)
}

const NEWTON_ITERATIONS: usize = 20;
const NEWTON_TOLERANCE: f64 = 1e-13;

fn polish_complex(poly: &[f64], mut z: Complex64) -> Complex64 {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return z;
    }
    let (mut pz, _) = eval_complex(poly, z);
    for _ in 0..NEWTON_ITERATIONS {
        let (_, dp) = eval_complex(poly, z);
        if dp.norm() == 0.0 || pz.norm() == 0.0 {
            break;
        }
        let step = pz / dp;
        let next = z - step;
        let (pn, _) = eval_complex(poly, next);
        if !(pn.norm() < pz.norm()) {
            break;
        }
        z = next;
        pz = pn;
        if step.norm() <= NEWTON_TOLERANCE * z.norm().max(1.0) {
            break;
        }
    }
    z
}

fn polish_real(poly: &[f64], mut y: f64) -> f64 {
    let mut py = eval_real(poly, y);
    for _ in 0..NEWTON_ITERATIONS {
        let (_, dp) = eval_real_with_derivative(poly, y);
        if dp == 0.0 || py == 0.0 {
            break;
        }
        let step = py / dp;
        let next = y - step;
        let pn = eval_real(poly, next);
        if !(pn.abs() < py.abs()) {
            break;
        }
        y = next;
        py = pn;
        if step.abs() <= NEWTON_TOLERANCE * y.abs().max(1.0) {
            break;
        }
    }
    y
}

/// The stationary point of least distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub y1: f64,
    pub distortion: f64,
}

/// Compare the distortion at every admissible root; ties go to smaller `|y1|`.
pub fn select_minimum(ops: &DistortionOperands, problem: &QuarticProblem, roots: &RootSet) -> Result<Minimum> {
    if problem.degenerate {
        let y1 = problem.linear_solution();
        let distortion = ops.distortion_of_y(y1).map_err(|_| Error::NoAdmissibleRoot)?;
        return Ok(Minimum { y1, distortion });
    }
    let mut best: Option<Minimum> = None;
    for root in &roots.roots {
        let Ok(distortion) = ops.distortion_of_y(root.y) else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let tie = (distortion - b.distortion).abs() <= 1e-15 * distortion.abs().max(b.distortion.abs());
                if tie {
                    root.y.abs() < b.y1.abs()
                } else {
                    distortion < b.distortion
                }
            }
        };
        if better {
            best = Some(Minimum { y1: root.y, distortion });
        }
    }
    best.ok_or(Error::NoAdmissibleRoot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::operand_matrices;
    use crate::samples;
    use nalgebra::{Matrix3, Matrix4, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_roots(coeffs: [f64; 5], expected: &[f64]) {
        let got = real_roots(coeffs).unwrap().values();
        assert_eq!(got.len(), expected.len(), "{coeffs:?} -> {got:?}");
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() <= 1e-10, "{coeffs:?}: {g} vs {e}");
        }
    }

    #[test]
    fn factorable_quartics() {
        assert_roots([1.0, -10.0, 35.0, -50.0, 24.0], &[1.0, 2.0, 3.0, 4.0]);
        assert_roots([1.0, 0.0, -5.0, 0.0, 4.0], &[-2.0, -1.0, 1.0, 2.0]);
        assert_roots([1.0, 0.0, 0.0, 0.0, 1.0], &[]);
        assert_roots([0.0, 1.0, -6.0, 11.0, -6.0], &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn lower_degree_fallbacks() {
        assert_roots([0.0, 0.0, 1.0, 0.0, -4.0], &[-2.0, 2.0]);
        assert_roots([0.0, 0.0, 0.0, 2.0, -3.0], &[1.5]);
        assert_roots([1e-15, 0.0, 1.0, -3.0, 2.0], &[1.0, 2.0]);
        assert_eq!(real_roots([0.0; 5]), Err(Error::AllCoefficientsZero));
        assert_eq!(real_roots([f64::NAN, 0.0, 0.0, 0.0, 1.0]), Err(Error::NonFiniteCoefficients));
    }

    #[test]
    fn depressed_biquadratic_branch() {
        // (y - 1)^4 shifted: depressed form has S = 0 and a degenerate resolvent.
        assert_roots([1.0, -4.0, 6.0, -4.0, 1.0 - 1e-4], &[0.9, 1.1]);
        assert_roots([1.0, 0.0, -13.0, 0.0, 36.0], &[-3.0, -2.0, 2.0, 3.0]);
    }

    fn companion_roots(coeffs: [f64; 5]) -> Vec<Complex64> {
        let a = coeffs[0];
        let mut m = Matrix4::<f64>::zeros();
        for j in 0..4 {
            m[(0, j)] = -coeffs[j + 1] / a;
        }
        for i in 1..4 {
            m[(i, i - 1)] = 1.0;
        }
        m.complex_eigenvalues().iter().copied().collect()
    }

    fn best_pairing_error(a: &[Complex64], b: &[Complex64]) -> f64 {
        let mut idx = [0usize, 1, 2, 3];
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |perm| {
            let err = (0..4).map(|i| (a[i] - b[perm[i]]).norm() / b[perm[i]].norm().max(1.0)).fold(0.0, f64::max);
            best = best.min(err);
        });
        best
    }

    fn permute(idx: &mut [usize; 4], k: usize, visit: &mut impl FnMut(&[usize; 4])) {
        if k == idx.len() {
            visit(idx);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute(idx, k + 1, visit);
            idx.swap(k, i);
        }
    }

    #[test]
    fn agrees_with_companion_matrix_on_random_monic_quartics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut coeffs = [1.0; 5];
            for c in coeffs.iter_mut().skip(1) {
                *c = rng.random_range(-1e3..1e3);
            }
            let ours = complex_roots(coeffs).unwrap();
            let oracle = companion_roots(coeffs);
            let err = best_pairing_error(&ours, &oracle);
            assert!(err <= 1e-7, "{coeffs:?}: {ours:?} vs {oracle:?}");
        }
    }

    proptest! {
        #[test]
        fn roots_satisfy_residual_bound(
            a in -1e3f64..1e3, b in -1e3f64..1e3, cc in -1e3f64..1e3, d in -1e3f64..1e3, e in -1e3f64..1e3
        ) {
            prop_assume!(a.abs() > 1e-3);
            let set = real_roots([a, b, cc, d, e]).unwrap();
            let scale = [a, b, cc, d, e].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let n = [a, b, cc, d, e].map(|v| v / scale);
            for r in &set.roots {
                let y = r.y;
                let terms = [n[0].abs() * y.powi(4), n[1].abs() * y.abs().powi(3), n[2].abs() * y * y, n[3].abs() * y.abs(), n[4].abs(), 1.0];
                let bound = terms.iter().fold(0.0f64, |m, v| m.max(*v));
                let value = (((n[0] * y + n[1]) * y + n[2]) * y + n[3]) * y + n[4];
                prop_assert!(value.abs() <= 1e-6 * bound);
            }
            for pair in set.roots.windows(2) {
                prop_assert!(pair[1].y - pair[0].y > 1e-8 * (1.0 + pair[0].y.abs()));
            }
        }
    }

    #[test]
    fn identical_cameras_reduce_to_linear_factor() {
        let k = samples::default_intrinsics();
        let r = crate::geometry::axis_angle(&Vector3::new(0.3, -1.0, 0.2), 0.4);
        let rig = samples::identical_rig(&k, r, Vector3::new(1.0, 0.2, -0.1));
        let ops = operand_matrices(&rig).unwrap();
        let problem = quartic_coefficients(&ops).unwrap();
        assert!(problem.degenerate);
        // The quartic is 2 m4 (m2 y + m1)(y + m3)^3 with m4 = 1: the triple root
        // sits on the pole and only the linear factor yields a minimum.
        let [m1, m2, m3, ..] = problem.m;
        let expected = [
            2.0 * m2,
            2.0 * (m1 + 3.0 * m2 * m3),
            6.0 * m3 * (m1 + m2 * m3),
            2.0 * m3 * m3 * (3.0 * m1 + m2 * m3),
            2.0 * m1 * m3.powi(3),
        ];
        let scale = problem.coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (got, want) in problem.coeffs.iter().zip(expected) {
            assert!((got - want).abs() <= 1e-9 * scale);
        }
        assert!((ops.poles()[0] + m3).abs() <= 1e-9 * (1.0 + m3.abs()));
        let min = select_minimum(&ops, &problem, &RootSet::default()).unwrap();
        assert_eq!(min.y1, -m1 / m2);
    }

    fn derivative_zeros(ops: &DistortionOperands, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let h = 1e-4;
        let deriv = |y: f64| -> Option<f64> {
            Some((ops.distortion_of_y(y + h).ok()? - ops.distortion_of_y(y - h).ok()?) / (2.0 * h))
        };
        let mut zeros = Vec::new();
        let step = (hi - lo) / n as f64;
        for i in 0..n {
            let (mut a, mut b) = (lo + step * i as f64, lo + step * (i + 1) as f64);
            let (Some(da), Some(db)) = (deriv(a), deriv(b)) else { continue };
            if da.signum() == db.signum() {
                continue;
            }
            let pole_inside = ops.poles().iter().any(|p| *p >= a - 1.0 && *p <= b + 1.0);
            if pole_inside {
                continue;
            }
            let mut fa = da;
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                let Some(fm) = deriv(mid) else { break };
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            zeros.push(0.5 * (a + b));
        }
        zeros
    }

    #[test]
    fn roots_match_numerical_derivative_zeros() {
        let ops = operand_matrices(&samples::verging_rig()).unwrap();
        let problem = quartic_coefficients(&ops).unwrap();
        let roots = solve_quartic(&problem).unwrap().values();
        let lo = -2e5;
        let hi = 2e5;
        let numeric = derivative_zeros(&ops, lo, hi, 400_000);
        let in_range: Vec<f64> = roots.iter().copied().filter(|y| *y > lo && *y < hi).collect();
        assert_eq!(numeric.len(), in_range.len(), "{numeric:?} vs {roots:?}");
        for (n, r) in numeric.iter().zip(&in_range) {
            assert!((n - r).abs() <= 1e-5 * (1.0 + r.abs()), "{n} vs {r}");
        }
    }

    #[test]
    fn quartic_sign_matches_quotient_rule_derivative() {
        let ops = operand_matrices(&samples::verging_rig()).unwrap();
        let problem = quartic_coefficients(&ops).unwrap();
        let [a, b, cc, d, e] = problem.coeffs;
        // f_i and G_i = g_i^2 expanded directly from the operand entries.
        let poly = |q: &Matrix3<f64>| [q[(1, 1)], 2.0 * q[(1, 2)], q[(2, 2)]];
        let (f1, g1, f2, g2) = (poly(&ops.m1), poly(&ops.c1), poly(&ops.m2), poly(&ops.c2));
        let val = |p: &[f64; 3], y: f64| p[0] * y * y + p[1] * y + p[2];
        let der = |p: &[f64; 3], y: f64| 2.0 * p[0] * y + p[1];
        let poles = ops.poles();
        let mut checked = 0;
        for i in 0..20 {
            let y = -3000.0 + 311.7 * f64::from(i);
            let term = |f: &[f64; 3], g: &[f64; 3]| (der(f, y) * val(g, y) - val(f, y) * der(g, y)) / val(g, y).powi(2);
            let derivative = term(&f1, &g1) + term(&f2, &g2);
            let quartic = (((a * y + b) * y + cc) * y + d) * y + e;
            let expected = derivative.signum() * ((y - poles[0]) * (y - poles[1])).signum();
            if derivative.abs() > 1e-12 * (term(&f1, &g1).abs() + term(&f2, &g2).abs()) {
                assert_eq!(quartic.signum(), expected, "y={y}");
                checked += 1;
            }
        }
        assert!(checked >= 18);
    }

    #[test]
    fn minimum_beats_dense_scan() {
        let ops = operand_matrices(&samples::verging_rig()).unwrap();
        let problem = quartic_coefficients(&ops).unwrap();
        let roots = solve_quartic(&problem).unwrap();
        let best = select_minimum(&ops, &problem, &roots).unwrap();
        let n = 200_001;
        let (lo, hi) = (-4800.0, 4800.0);
        let scan_min = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .filter_map(|y| ops.distortion_of_y(y).ok())
            .fold(f64::INFINITY, f64::min);
        assert!(best.distortion <= scan_min + 1e-9 * (1.0 + scan_min));
        let step = 1e-3 * (1.0 + best.y1.abs());
        for y in [best.y1 - step, best.y1 + step] {
            assert!(ops.distortion_of_y(y).unwrap() >= best.distortion - 1e-12);
        }
    }

    #[test]
    fn no_admissible_root_is_reported() {
        let ops = operand_matrices(&samples::verging_rig()).unwrap();
        let mut problem = quartic_coefficients(&ops).unwrap();
        problem.degenerate = false;
        let poles = ops.poles();
        let set = RootSet { roots: poles.iter().map(|p| Root { y: *p, residual: 0.0, distortion: None }).collect() };
        assert_eq!(select_minimum(&ops, &problem, &set), Err(Error::NoAdmissibleRoot));
    }
}
