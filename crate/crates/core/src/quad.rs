//! One-dimensional quadrature: adaptive Simpson with error control, the
//! spherical-Bessel moment integral used by the rest-frame partition
//! function, and a fixed-Talbot numerical inverse Laplace transform.

use crate::rng::Kahan;
use crate::special::j1_over_x;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Result of a quadrature: value plus an error bound estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

fn simpson_slice(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fa, fm, fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err_acc: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err_acc += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err_acc)
        + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err_acc)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0 };
    }
    let (whole, fa, fm, fb) = simpson_slice(&mut f, a, b);
    let mut err = 0.0;
    let value = adaptive_step(&mut f, a, b, fa, fm, fb, whole, tol, 48, &mut err);
    QuadResult { value, error: err }
}

/// Adaptive Simpson with an initial split into `panels` sub-intervals, so
/// localized features cannot hide from the first coarse samples.
pub fn adaptive_simpson_panels(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
) -> QuadResult {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let q = adaptive_simpson(&mut f, lo, lo + h, tol / panels as f64);
        value += q.value;
        error += q.error;
    }
    QuadResult { value, error }
}

/// Semi-infinite integral of a decaying integrand: integrates `[a, a+L]`,
/// doubling `L` until the last panel contributes less than `tol`.
pub fn integrate_to_infinity(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    first_len: f64,
    tol: f64,
) -> Result<QuadResult> {
    let mut total = 0.0;
    let mut err = 0.0;
    let mut lo = a;
    let mut len = first_len;
    for _ in 0..60 {
        let q = adaptive_simpson(&mut f, lo, lo + len, tol * 0.5);
        total += q.value;
        err += q.error;
        if q.value.abs() < tol && q.error < tol {
            return Ok(QuadResult { value: total, error: err + q.value.abs() });
        }
        lo += len;
        len *= 2.0;
    }
    Err(Error::Numerics(
        "semi-infinite quadrature did not converge (integrand decays too slowly)".into(),
    ))
}

/// `int_X^inf x^{-p} e^{i j x} dx` by the integration-by-parts asymptotic
/// series; requires `X` comfortably larger than `p` so the terms decay.
fn oscillatory_tail(p: f64, j: f64, x_cut: f64) -> Complex64 {
    let ij = Complex64::new(0.0, j);
    let phase = Complex64::new(0.0, j * x_cut).exp();
    let mut coef = -phase / ij; // -e^{ijX}/(ij)
    let mut xpow = x_cut.powf(-p);
    let mut total = Complex64::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 0..60 {
        let term = coef * xpow;
        if term.norm() >= last {
            break; // asymptotic series bottomed out
        }
        total += term;
        last = term.norm();
        if last < 1e-18 {
            break;
        }
        coef = coef * ((p + k as f64) / ij);
        xpow /= x_cut;
    }
    total
}

/// Analytic value of `int_X^inf x^2 (j_1(x)/x)^N dx`.
///
/// Expands `(sin x - x cos x)^N x^{2-3N}` into pure harmonics `e^{ijx}` with
/// power-law prefactors; the DC parts integrate in closed form and the
/// oscillatory parts via [`oscillatory_tail`].
fn bessel_moment_tail(n_power: u32, x_cut: f64) -> f64 {
    let n = n_power as usize;
    // binomial expansion over m = number of sin factors
    let mut total = Complex64::new(0.0, 0.0);
    let mut binom = 1.0f64;
    for m in 0..=n {
        if m > 0 {
            binom = binom * (n - m + 1) as f64 / m as f64;
        }
        let sign = if (n - m) % 2 == 0 { 1.0 } else { -1.0 };
        // harmonic coefficients of sin^m(x) cos^{n-m}(x): polynomial in e^{ix}
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n + 1]; // exponent j at index j + n
        coeffs[n] = Complex64::new(1.0, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let half_over_i = Complex64::new(0.0, -0.5); // 1/(2i)
        for _ in 0..m {
            coeffs = shift_convolve(&coeffs, half_over_i, -half_over_i);
        }
        for _ in 0..(n - m) {
            coeffs = shift_convolve(&coeffs, half, half);
        }
        let p = (2 * n + m) as f64 - 2.0; // x^{-p} prefactor of this term
        let mut term = Complex64::new(0.0, 0.0);
        for (idx, &c) in coeffs.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let j = idx as f64 - n as f64;
            if j == 0.0 {
                term += c * x_cut.powf(1.0 - p) / (p - 1.0);
            } else {
                term += c * oscillatory_tail(p, j, x_cut);
            }
        }
        total += sign * binom * term;
    }
    total.re
}

/// Multiplies a harmonic polynomial by `a e^{ix} + b e^{-ix}`.
fn shift_convolve(coeffs: &[Complex64], a: Complex64, b: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for (idx, &c) in coeffs.iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        if idx + 1 < out.len() {
            out[idx + 1] += a * c;
        }
        if idx >= 1 {
            out[idx - 1] += b * c;
        }
    }
    out
}

fn bessel_moment_cut(n_power: u32) -> f64 {
    // tail series needs x_cut > p + margin; p_max = 3N - 2
    (3.0 * n_power as f64 + 40.0).max(50.0)
}

/// `I_N = int_0^inf x^2 (j_1(x)/x)^N dx`, adaptive Simpson on the head plus
/// the analytic harmonic tail. Only integrable for `N >= 2`.
pub fn spherical_bessel_moment(n_power: u32, tol: f64) -> Result<QuadResult> {
    if n_power < 2 {
        return Err(Error::InvalidParam("I_N requires N >= 2".into()));
    }
    let f = |x: f64| x * x * j1_over_x(x).powi(n_power as i32);
    let x_cut = bessel_moment_cut(n_power);
    let head = adaptive_simpson_panels(f, 0.0, x_cut, tol * 0.5, (x_cut / 1.5) as usize);
    let tail = bessel_moment_tail(n_power, x_cut);
    Ok(QuadResult { value: head.value + tail, error: head.error + 1e-14 * tail.abs() })
}

/// High-resolution trapezoid oracle for the same moment integral: different
/// rule and different cutoff from the adaptive path, same analytic tail.
pub fn spherical_bessel_moment_trapezoid(n_power: u32, steps: usize) -> f64 {
    let x_max = bessel_moment_cut(n_power) + 8.0 * std::f64::consts::PI;
    let h = x_max / steps as f64;
    let mut sum = Kahan::default();
    for k in 0..=steps {
        let x = h * k as f64;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        sum.add(w * x * x * j1_over_x(x).powi(n_power as i32));
    }
    sum.value() * h + bessel_moment_tail(n_power, x_max)
}


/// Fixed-Talbot numerical inverse Laplace transform.
///
/// `ln_f` must return `ln F(s)` for complex `s`; working in the log domain
/// keeps the widely different magnitudes on the contour under control.
/// `m_nodes` is the node count (the contour parameter is `r = 2M/(5t)`).
pub fn talbot_inverse_laplace(
    ln_f: impl Fn(Complex64) -> Complex64,
    t: f64,
    m_nodes: usize,
) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidParam("talbot requires t > 0".into()));
    }
    let m = m_nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    // theta = 0 endpoint: s = r, weight 1/2
    let mut acc = 0.5 * (ln_f(Complex64::new(r, 0.0)) + Complex64::new(r * t, 0.0)).exp().re;
    for k in 1..m_nodes {
        let theta = k as f64 * PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let val = (ln_f(s) + s * t).exp() * Complex64::new(1.0, sigma);
        acc += val.re;
    }
    Ok(acc * r / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_exact() {
        let q = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12);
        assert!((q.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_oscillatory() {
        let q = adaptive_simpson(|x| (10.0 * x).sin(), 0.0, PI, 1e-12);
        let exact = (1.0 - (10.0 * PI).cos()) / 10.0;
        assert!((q.value - exact).abs() < 1e-10);
    }

    #[test]
    fn tail_formula_matches_brute_force_n2() {
        // int_X^Y j1(x)^2 dx by brute force vs tail(X) - tail(Y)
        let f = |x: f64| x * x * j1_over_x(x).powi(2);
        let x0 = 50.0;
        let x1 = 50.0 + 16.0 * PI;
        let direct = adaptive_simpson(f, x0, x1, 1e-13).value;
        let via_tail = bessel_moment_tail(2, x0) - bessel_moment_tail(2, x1);
        assert!(
            (direct - via_tail).abs() < 1e-11,
            "direct {direct} vs tail-difference {via_tail}"
        );
    }

    #[test]
    fn bessel_moment_two_routes_agree() {
        // Adaptive-Simpson and trapezoid routes must agree to 1e-8; for
        // N = 2 the Parseval identity for the ball indicator gives pi/6.
        let adaptive = spherical_bessel_moment(2, 1e-11).unwrap();
        let trap = spherical_bessel_moment_trapezoid(2, 2_000_000);
        assert!(
            (adaptive.value - trap).abs() < 1e-8,
            "adaptive {} vs trapezoid {}",
            adaptive.value,
            trap
        );
        assert!((adaptive.value - PI / 6.0).abs() < 1e-9);

        for n in [3u32, 4, 6] {
            let a = spherical_bessel_moment(n, 1e-11).unwrap();
            let t = spherical_bessel_moment_trapezoid(n, 2_000_000);
            assert!((a.value - t).abs() < 1e-8, "N={n}: {} vs {}", a.value, t);
        }
        // external reference values (40-digit chunked quadrature)
        let i3 = spherical_bessel_moment(3, 1e-11).unwrap().value;
        let i4 = spherical_bessel_moment(4, 1e-11).unwrap().value;
        assert!((i3 - 0.081_812_308_687_181_6).abs() < 1e-10);
        assert!((i4 - 0.018_838_474_465_970_54).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_quadrature_converges() {
        let q = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn talbot_inverts_simple_transforms() {
        // F(s) = 1/s^2  ->  f(t) = t
        let f = |s: Complex64| -2.0 * s.ln();
        let v = talbot_inverse_laplace(f, 3.0, 32).unwrap();
        assert!((v - 3.0).abs() < 1e-9, "got {v}");
        // F(s) = 1/(s+1) -> f(t) = exp(-t)
        let g = |s: Complex64| -(s + 1.0).ln();
        let v = talbot_inverse_laplace(g, 1.5, 32).unwrap();
        assert!((v - (-1.5f64).exp()).abs() < 1e-10, "got {v}");
        // F(s) = s^{-1/2} -> f(t) = 1/sqrt(pi t)
        let h = |s: Complex64| -0.5 * s.ln();
        let v = talbot_inverse_laplace(h, 2.0, 32).unwrap();
        assert!((v - 1.0 / (PI * 2.0).sqrt()).abs() < 1e-10, "got {v}");
    }
}
