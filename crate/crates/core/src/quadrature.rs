//! Gauss–Legendre rules and an adaptive Gauss–Kronrod integrator.

use num_complex::Complex64;

use crate::error::{FloquetError, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre on [a, b] with `panels` equal panels.
pub fn composite_gl<F>(f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = Complex64::new(0.0, 0.0);
        for (xi, wi) in rule.0.iter().zip(&rule.1) {
            s += f(mid + 0.5 * h * xi) * *wi;
        }
        acc += s * (0.5 * h);
    }
    acc
}

/// composite_gl for a fallible integrand.
pub fn try_composite_gl<F>(f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> crate::error::Result<Complex64>
where
    F: Fn(f64) -> crate::error::Result<Complex64>,
{
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let mut s = Complex64::new(0.0, 0.0);
        for (xi, wi) in rule.0.iter().zip(&rule.1) {
            s += f(mid + 0.5 * h * xi)? * *wi;
        }
        acc += s * (0.5 * h);
    }
    Ok(acc)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

/// Adaptive Gauss–Kronrod (7/15) with absolute tolerance and an evaluation cap.
pub fn adaptive<F>(f: F, a: f64, b: f64, abs_tol: f64, max_evals: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut stack = vec![(a, b, abs_tol)];
    let mut total = Complex64::new(0.0, 0.0);
    let mut evals = 0usize;
    while let Some((lo, hi, tol)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        evals += 15;
        if err <= tol || (hi - lo).abs() < 1e-14 * (1.0 + lo.abs()) {
            total += val;
        } else {
            if evals > max_evals {
                return Err(FloquetError::Quadrature(format!(
                    "adaptive quadrature exceeded {max_evals} evaluations on [{a}, {b}]"
                )));
            }
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol));
            stack.push((mid, hi, 0.5 * tol));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials() {
        for n in [1usize, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            let sw: f64 = w.iter().sum();
            assert!((sw - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn adaptive_oscillatory() {
        let v = adaptive(|x| Complex64::new(0.0, 30.0 * x).exp(), 0.0, 1.0, 1e-13, 100_000).unwrap();
        let exact = (Complex64::new(0.0, 30.0).exp() - 1.0) / Complex64::new(0.0, 30.0);
        assert!((v - exact).norm() < 1e-12);
    }
}
