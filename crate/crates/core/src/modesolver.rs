//! Truncated solves of the inhomogeneous mode recurrence and assembly of psi^(x, p).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::barriermap::{to_well_frame, WellFrame};
use crate::branchcut::{h_from_root, mode_point, sqrt_on_sheet, ModelParams, SheetConfig, I_THREE_HALVES};
use crate::error::{FloquetError, Result};
use crate::forcing::{f_with_root, InitialWavefunction};
use crate::tridiag;

pub const DEFAULT_MODES: usize = 128;
pub const MAX_MODES: usize = 1024;
const PIVOT_FLOOR: f64 = 1e-13;

/// Finite window {y_n : n_min <= n <= n_max} of a mode sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    pub n_min: i64,
    pub values: Vec<Complex64>,
}

impl ModeVector {
    pub fn zeros(n_min: i64, n_max: i64) -> Self {
        ModeVector {
            n_min,
            values: vec![Complex64::new(0.0, 0.0); (n_max - n_min + 1).max(0) as usize],
        }
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.values.len() as i64 - 1
    }

    /// y_n, zero outside the window.
    pub fn get(&self, n: i64) -> Complex64 {
        if n < self.n_min || n > self.n_max() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(n - self.n_min) as usize]
        }
    }

    pub fn set(&mut self, n: i64, v: Complex64) {
        let i = (n - self.n_min) as usize;
        self.values[i] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (self.n_min + i as i64, *v))
    }

    /// (sum (1 + |n|^{3/2}) |y_n|^2)^{1/2}.
    pub fn weighted_norm(&self) -> f64 {
        self.iter()
            .map(|(n, v)| (1.0 + (n.unsigned_abs() as f64).powf(1.5)) * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub truncation: usize,
    pub residual_inf: f64,
    pub tail_ratio: f64,
    pub min_pivot: f64,
}

/// Result of one truncated solve.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub z: Complex64,
    /// psi~(i + i n omega + z) for |n| <= N.
    pub y: ModeVector,
    /// Physical sqrt(i + i n omega + z) for |n| <= N + 1.
    pub roots: ModeVector,
    pub diagnostics: SolveDiagnostics,
}

impl ModeSolution {
    /// kappa = i^{3/2} sqrt(p_n) with the physical root.
    pub fn kappa(&self, n: i64) -> Complex64 {
        I_THREE_HALVES * self.roots.get(n)
    }
}

/// Frame roots, h_n and (optionally) physical F_n at z, for |n| <= n_max.
pub(crate) struct Coefficients {
    pub frame_roots: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub big_f: Option<Vec<Complex64>>,
    pub n_max: i64,
}

impl Coefficients {
    pub fn idx(&self, n: i64) -> usize {
        (n + self.n_max) as usize
    }
}

pub(crate) fn coefficients(
    z: Complex64,
    w0: Complex64,
    frame: &WellFrame,
    psi0: Option<&InitialWavefunction>,
    n_max: i64,
) -> Result<Coefficients> {
    let omega = frame.params.omega;
    let len = (2 * n_max + 1) as usize;
    let mut frame_roots = Vec::with_capacity(len);
    let mut h = Vec::with_capacity(len);
    for n in -n_max..=n_max {
        let w = w0 + Complex64::new(0.0, n as f64 * omega);
        if w.norm() == 0.0 {
            return Err(FloquetError::SingularPoint(w));
        }
        let root = sqrt_on_sheet(w, &frame.sheet, n);
        frame_roots.push(root);
        h.push(h_from_root(root, z, n, omega));
    }
    let big_f = match psi0 {
        Some(psi0) => {
            let sign = frame.transform.root_sign();
            let mut out = Vec::with_capacity(len);
            for root in &frame_roots {
                out.push(f_with_root(0.0, *root * sign, psi0)?);
            }
            Some(out)
        }
        None => None,
    };
    Ok(Coefficients {
        frame_roots,
        h,
        big_f,
        n_max,
    })
}

/// Solve h_n y_n - r y_{n-1} - r y_{n+1} = f_n for |n| <= N with y_{+-(N+1)} = 0.
pub fn solve_modes(
    z: Complex64,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
    n_modes: usize,
) -> Result<ModeSolution> {
    let frame = to_well_frame(params, cfg);
    solve_in_frame(z, &frame, psi0, n_modes)
}

/// Solve at z = w0 - i with the roots chosen from the radicands w0 + i n omega
/// as given, so points exactly on the cut from the n = 0 branch point keep
/// their side.
pub fn solve_modes_at_radicand(
    w0: Complex64,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
    n_modes: usize,
) -> Result<ModeSolution> {
    let frame = to_well_frame(params, cfg);
    solve_with_radicand(w0 - Complex64::new(0.0, 1.0), w0, &frame, psi0, n_modes)
}

pub(crate) fn solve_in_frame(
    z: Complex64,
    frame: &WellFrame,
    psi0: &InitialWavefunction,
    n_modes: usize,
) -> Result<ModeSolution> {
    solve_with_radicand(z, mode_point(z, 0, frame.params.omega), frame, psi0, n_modes)
}

fn solve_with_radicand(
    z: Complex64,
    w0: Complex64,
    frame: &WellFrame,
    psi0: &InitialWavefunction,
    n_modes: usize,
) -> Result<ModeSolution> {
    let n = n_modes as i64;
    let co = coefficients(z, w0, frame, Some(psi0), n + 1)?;
    let big_f = co.big_f.as_ref().expect("source requested");
    let r_frame = frame.params.r;
    let r_phys = r_frame * frame.transform.r_sign as f64;
    let t = frame.transform;

    let dim = (2 * n + 1) as usize;
    let mut d = Vec::with_capacity(dim);
    let mut b = Vec::with_capacity(dim);
    for m in -n..=n {
        let i = co.idx(m);
        d.push(co.h[i]);
        let g = big_f[i] + r_phys * (big_f[i - 1] + big_f[i + 1]);
        b.push(g * t.mode_sign(m));
    }
    let off = vec![Complex64::new(-r_frame, 0.0); dim - 1];
    let scale = d.iter().map(|v| v.norm()).fold(r_frame.abs(), f64::max).max(1.0);
    let sol = tridiag::solve(off.clone(), d.clone(), off, b.clone())
        .ok_or(FloquetError::NearPole { z, pivot: 0.0 })?;
    if sol.min_pivot < PIVOT_FLOOR * scale {
        return Err(FloquetError::NearPole { z, pivot: sol.min_pivot });
    }
    let x = sol.x;

    // residual of the frame system
    let mut residual = 0.0f64;
    let mut fmax = 0.0f64;
    for i in 0..dim {
        let left = if i > 0 { x[i - 1] } else { Complex64::new(0.0, 0.0) };
        let right = if i + 1 < dim { x[i + 1] } else { Complex64::new(0.0, 0.0) };
        let res = d[i] * x[i] - r_frame * (left + right) - b[i];
        residual = residual.max(res.norm());
        fmax = fmax.max(b[i].norm());
    }

    let mut y = ModeVector::zeros(-n, n);
    for (i, m) in (-n..=n).enumerate() {
        y.values[i] = x[i] * t.mode_sign(m);
    }
    let mut roots = ModeVector::zeros(-n - 1, n + 1);
    let sign = t.root_sign();
    for m in -n - 1..=n + 1 {
        roots.set(m, co.frame_roots[co.idx(m)] * sign);
    }
    let ymax = y.max_abs();
    let tail = y.get(-n).norm().max(y.get(n).norm());
    Ok(ModeSolution {
        z,
        diagnostics: SolveDiagnostics {
            truncation: n_modes,
            residual_inf: if fmax > 0.0 { residual / fmax } else { residual },
            tail_ratio: if ymax > 0.0 { tail / ymax } else { 0.0 },
            min_pivot: sol.min_pivot,
        },
        y,
        roots,
    })
}

/// Solve with N doubled until the central half is stable to `tol` (relative).
pub fn solve_modes_converged(
    z: Complex64,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
    tol: f64,
) -> Result<ModeSolution> {
    let mut n = DEFAULT_MODES;
    let mut prev = solve_modes(z, params, psi0, cfg, n)?;
    while n < MAX_MODES {
        n *= 2;
        let next = solve_modes(z, params, psi0, cfg, n)?;
        let half = (prev.diagnostics.truncation / 2) as i64;
        let scale = prev.y.max_abs().max(1e-300);
        let change = (-half..=half)
            .map(|m| (next.y.get(m) - prev.y.get(m)).norm())
            .fold(0.0, f64::max);
        prev = next;
        if change <= tol * scale {
            return Ok(prev);
        }
    }
    Ok(prev)
}

/// Fundamental-strip coordinates of p: p = i + i n omega + z.
pub fn strip_coordinates(p: Complex64, omega: f64) -> (i64, Complex64) {
    let t = (p.im - 1.0) / omega;
    let mut n = t.round() as i64;
    // ties go to the smaller |Im z|; a tie is equidistant so either n is
    // acceptable, keep the one with the smaller index for determinism
    if (t - t.floor() - 0.5).abs() < 1e-15 {
        n = t.floor() as i64;
    }
    (n, p - Complex64::new(0.0, 1.0 + n as f64 * omega))
}

/// max_n |y_n(z) - y_{n+1}(z - i omega)| on the common window.
pub fn periodicity_check(
    y: &ModeSolution,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
) -> Result<f64> {
    let shifted_cfg = cfg.shifted(1);
    if shifted_cfg.cut_angle() != cfg.cut_angle() {
        return Err(FloquetError::SheetMismatch("cut angle changed under transport".into()));
    }
    let z2 = y.z - Complex64::new(0.0, params.omega);
    let other = solve_modes(z2, params, psi0, &shifted_cfg, y.diagnostics.truncation)?;
    let half = (y.diagnostics.truncation / 2) as i64;
    Ok((-half..=half)
        .map(|n| (y.y.get(n) - other.y.get(n + 1)).norm())
        .fold(0.0, f64::max))
}

/// psi^(x, p) = e^{kappa |x|} psi~(p) + f(x, p).
pub fn psi_hat(
    x: f64,
    p: Complex64,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
    n_modes: usize,
) -> Result<Complex64> {
    let (n, z) = strip_coordinates(p, params.omega);
    let sol = solve_modes(z, params, psi0, cfg, n_modes.max(n.unsigned_abs() as usize + 8))?;
    let root = sol.roots.get(n);
    let kappa = I_THREE_HALVES * root;
    Ok((kappa * x.abs()).exp() * sol.y.get(n) + f_with_root(x, root, psi0)?)
}
