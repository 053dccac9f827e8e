//! Tridiagonal solves with partial pivoting (the LAPACK gtsv scheme).

use num_complex::Complex64;

/// Outcome of a banded solve: the solution and the smallest pivot met.
#[derive(Debug, Clone)]
pub struct TridiagSolution {
    pub x: Vec<Complex64>,
    pub min_pivot: f64,
}

/// Solve A x = b where A has sub-diagonal `dl`, diagonal `d`, super-diagonal `du`.
///
/// The inputs are consumed as workspace. Returns `None` on an exactly zero pivot.
pub fn solve(
    mut dl: Vec<Complex64>,
    mut d: Vec<Complex64>,
    mut du: Vec<Complex64>,
    mut b: Vec<Complex64>,
) -> Option<TridiagSolution> {
    let n = d.len();
    assert!(dl.len() + 1 == n.max(1) && du.len() + 1 == n.max(1) && b.len() == n);
    if n == 0 {
        return Some(TridiagSolution { x: b, min_pivot: f64::INFINITY });
    }
    let cabs1 = |z: Complex64| z.re.abs() + z.im.abs();
    // second super-diagonal fill-in lives in dl[k] after an interchange
    for k in 0..n - 1 {
        if cabs1(dl[k]) == 0.0 {
            if cabs1(d[k]) == 0.0 {
                return None;
            }
            // keep dl[k] = 0 as the (absent) fill-in
        } else if cabs1(d[k]) >= cabs1(dl[k]) {
            let mult = dl[k] / d[k];
            d[k + 1] -= mult * du[k];
            b[k + 1] = b[k + 1] - mult * b[k];
            dl[k] = Complex64::new(0.0, 0.0);
        } else {
            let mult = d[k] / dl[k];
            d[k] = dl[k];
            let temp = d[k + 1];
            d[k + 1] = du[k] - mult * temp;
            if k + 1 < n - 1 {
                dl[k] = du[k + 1];
                du[k + 1] = -mult * dl[k];
            } else {
                dl[k] = Complex64::new(0.0, 0.0);
            }
            du[k] = temp;
            let tb = b[k];
            b[k] = b[k + 1];
            b[k + 1] = tb - mult * b[k + 1];
        }
    }
    let min_pivot = d.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if d[n - 1].norm() == 0.0 {
        return None;
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for j in (0..n.saturating_sub(2)).rev() {
        b[j] = (b[j] - du[j] * b[j + 1] - dl[j] * b[j + 2]) / d[j];
    }
    Some(TridiagSolution { x: b, min_pivot })
}

/// Factor-once solver for a fixed matrix, no pivoting (diagonally dominant use only).
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    sub: Vec<Complex64>,
    inv_piv: Vec<Complex64>,
    sup_scaled: Vec<Complex64>,
}

impl ThomasFactor {
    pub fn new(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64]) -> Self {
        let n = diag.len();
        let mut inv_piv = vec![Complex64::new(0.0, 0.0); n];
        let mut sup_scaled = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
        let mut piv = diag[0];
        for i in 0..n {
            if i > 0 {
                piv = diag[i] - sub[i - 1] * sup_scaled[i - 1];
            }
            inv_piv[i] = 1.0 / piv;
            if i + 1 < n {
                sup_scaled[i] = sup[i] * inv_piv[i];
            }
        }
        ThomasFactor {
            sub: sub.to_vec(),
            inv_piv,
            sup_scaled,
        }
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = b.len();
        b[0] *= self.inv_piv[0];
        for i in 1..n {
            b[i] = (b[i] - self.sub[i - 1] * b[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            let next = b[i + 1];
            b[i] -= self.sup_scaled[i] * next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn matvec(dl: &[Complex64], d: &[Complex64], du: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let n = d.len();
        (0..n)
            .map(|i| {
                let mut s = d[i] * x[i];
                if i > 0 {
                    s += dl[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += du[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let dl = vec![c(1.0, 0.0), c(2.0, 1.0), c(0.5, 0.0)];
        let d = vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 1.0), c(3.0, 0.0)];
        let du = vec![c(1.0, -1.0), c(4.0, 0.0), c(0.0, 2.0)];
        let x_true = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0), c(2.0, -2.0)];
        let b = matvec(&dl, &d, &du, &x_true);
        let sol = solve(dl, d, du, b).unwrap();
        for (a, e) in sol.x.iter().zip(&x_true) {
            assert!((a - e).norm() < 1e-13);
        }
    }

    #[test]
    fn singular_detected() {
        let r = solve(vec![c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0)], vec![c(1.0, 0.0); 2]);
        assert!(r.is_none());
    }

    #[test]
    fn thomas_matches_gtsv() {
        let n = 50;
        let dl: Vec<_> = (0..n - 1).map(|i| c(-1.0, 0.01 * i as f64)).collect();
        let du = dl.clone();
        let d: Vec<_> = (0..n).map(|i| c(2.5, 0.3 + 0.02 * i as f64)).collect();
        let b: Vec<_> = (0..n).map(|i| c((i as f64).sin(), 1.0)).collect();
        let f = ThomasFactor::new(&dl, &d, &du);
        let mut x1 = b.clone();
        f.solve_in_place(&mut x1);
        let x2 = solve(dl, d, du, b).unwrap().x;
        for (a, e) in x1.iter().zip(&x2) {
            assert!((a - e).norm() < 1e-13);
        }
    }
}
