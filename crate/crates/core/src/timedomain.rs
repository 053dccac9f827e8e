//! psi(x, t) from the deformed Bromwich contour: Gamow terms from the poles,
//! ray integrals of the sheet jumps along the cuts, and the free part.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branchcut::{mode_point, sqrt_on_sheet, ModelParams, SheetConfig, I_THREE_HALVES};
use crate::error::{FloquetError, Result};
use crate::forcing::{f_with_root, InitialWavefunction};
use crate::modesolver::solve_modes_at_radicand;
use crate::quadrature::{adaptive, gauss_legendre, try_composite_gl};
use crate::resonances::{find_resonances, is_physical_sheet, with_residues, FindOptions, Resonance};

const GL_ORDER: usize = 16;
/// Integrands are cut where their envelope falls below e^{-37}.
const ENVELOPE_FLOOR: f64 = 37.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainOptions {
    /// Cuts run along e^{i (pi + theta)}.
    pub theta: f64,
    /// Modes |n| <= n_cut in the cut sum.
    pub n_cut: usize,
    /// Extra modes carried by the truncated solves beyond n_cut.
    pub n_pad: usize,
    /// Modes kept in each Gamow sum (and residue vector).
    pub n_gamow: usize,
    /// Relative stability demanded under node doubling.
    pub tol: f64,
    pub max_panels: usize,
    /// Largest tolerated log of (peak integrand / envelope) on a ray.
    pub max_cancellation: f64,
}

impl Default for TimeDomainOptions {
    fn default() -> Self {
        TimeDomainOptions {
            theta: 0.1,
            n_cut: 32,
            n_pad: 16,
            n_gamow: 64,
            tol: 1e-8,
            max_panels: 4096,
            max_cancellation: 23.0,
        }
    }
}

/// Truncation actually used for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Truncation {
    pub n_modes: usize,
    pub q_max: f64,
    pub quad_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiDecomposition {
    pub x: f64,
    pub t: f64,
    pub gamow: Complex64,
    pub cut_sum: Complex64,
    pub f_term: Complex64,
    pub total: Complex64,
    pub truncation: Truncation,
}

/// Value of a ray integral with its truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayValue {
    pub value: Complex64,
    pub truncation: Truncation,
}

fn check_t(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(FloquetError::InvalidParameter(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// Ray sheet for angle theta, keeping the selectors of `cfg`.
pub fn ray_sheet(cfg: &SheetConfig, theta: f64) -> Result<SheetConfig> {
    cfg.with_cut_angle(PI + theta)
}

/// sum_{|n| <= N} e^{kappa_n |x|} A_n e^{p_n t}.
pub fn gamow_term(x: f64, t: f64, res: &Resonance, params: &ModelParams, n: usize) -> Result<Complex64> {
    let a = res
        .residues
        .as_ref()
        .ok_or_else(|| FloquetError::InvalidParameter("resonance has no residues".into()))?;
    let n = (n as i64).min(a.n_max()).min(-a.n_min);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in -n..=n {
        let am = a.get(m);
        if am == Complex64::new(0.0, 0.0) {
            continue;
        }
        let w = mode_point(res.z_star, m, params.omega);
        let kappa = I_THREE_HALVES * sqrt_on_sheet(w, &res.sheet, m);
        acc += (kappa * x.abs() + w * t).exp() * am;
    }
    Ok(acc)
}

/// Growth rate in s = sqrt(q) of the flipped-sheet integrands.
fn growth_rate(x: f64, psi0: &InitialWavefunction) -> f64 {
    (psi0.support + x.abs()) / 2f64.sqrt() + 1.0
}

/// Smallest s with a s - s^2 t cos(theta) < -ENVELOPE_FLOOR beyond it.
fn s_cutoff(a: f64, t: f64, cos: f64) -> f64 {
    let c = t * cos;
    (a + (a * a + 4.0 * c * ENVELOPE_FLOOR).sqrt()) / (2.0 * c)
}

fn cancellation(a: f64, t: f64, cos: f64) -> f64 {
    a * a / (4.0 * t * cos)
}

/// Composite Gauss–Legendre in s on [0, s_max], doubling panels to `tol`.
fn doubled<F>(f: F, s_max: f64, start: usize, opts: &TimeDomainOptions) -> Result<(Complex64, usize)>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let rule = gauss_legendre(GL_ORDER);
    let mut panels = start.max(4);
    let mut prev = try_composite_gl(&f, 0.0, s_max, panels, &rule)?;
    loop {
        let next_panels = panels * 2;
        if next_panels > opts.max_panels {
            return Err(FloquetError::Quadrature(format!(
                "ray quadrature not stable at {panels} panels"
            )));
        }
        // panels are independent; split the work
        let h = s_max / next_panels as f64;
        let parts: Result<Vec<Complex64>> = (0..next_panels)
            .into_par_iter()
            .map(|k| try_composite_gl(&f, k as f64 * h, (k + 1) as f64 * h, 1, &rule))
            .collect();
        let next: Complex64 = parts?.into_iter().sum();
        let change = (next - prev).norm();
        panels = next_panels;
        if change <= opts.tol * next.norm() + 1e-15 {
            return Ok((next, panels * GL_ORDER));
        }
        prev = next;
    }
}

/// Sum over |n| <= N of the ray integrals of the sheet jumps of psi^(x, .)
/// along the cuts e^{i (pi + theta)} from each branch point.
pub fn cut_integrals(
    x: f64,
    t: f64,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
    opts: &TimeDomainOptions,
) -> Result<RayValue> {
    check_t(t)?;
    let sheet = ray_sheet(cfg, opts.theta)?;
    let flipped = sheet.with_flip(0);
    let d = sheet.cut_direction();
    let cos = -d.re;
    let a = growth_rate(x, psi0);
    let e = cancellation(a, t, cos);
    if e > opts.max_cancellation {
        return Err(FloquetError::Unstable(format!(
            "cut integrals at t = {t} cancel over e^{e:.0}; use t >= {:.3}",
            a * a / (4.0 * cos * opts.max_cancellation)
        )));
    }
    let s_max = s_cutoff(a, t, cos);
    let n = opts.n_cut as i64;
    let modes = opts.n_cut + opts.n_pad;
    let omega = params.omega;
    let pref = d / Complex64::new(0.0, 2.0 * PI);
    let integrand = |s: f64| -> Result<Complex64> {
        let q = s * s;
        let w0 = d * q;
        let tie = solve_modes_at_radicand(w0, params, psi0, &sheet, modes).map_err(ray_error)?;
        let other = solve_modes_at_radicand(w0, params, psi0, &flipped, modes).map_err(ray_error)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in -n..=n {
            let jump = (tie.kappa(m) * x.abs()).exp() * tie.y.get(m) - (other.kappa(m) * x.abs()).exp() * other.y.get(m);
            let p = d * q + Complex64::new(0.0, m as f64 * omega);
            acc += (p * t).exp() * jump;
        }
        Ok(acc * pref * (2.0 * s))
    };
    let start = 8 + (s_max * a).ceil() as usize;
    let (value, nodes) = doubled(integrand, s_max, start, opts)?;
    Ok(RayValue {
        value,
        truncation: Truncation { n_modes: opts.n_cut, q_max: s_max * s_max, quad_nodes: nodes },
    })
}

fn ray_error(e: FloquetError) -> FloquetError {
    match e {
        FloquetError::NearPole { z, .. } => FloquetError::NearPole { z, pivot: 0.0 },
        other => other,
    }
}

/// Ray integral of the jump f(x, rho) - f(x, -rho) across the cut from p = 0.
///
/// Falls back to the free propagator e^{i t d^2/dx^2} psi0, which is the same
/// integral done in closed form, when the ray would cancel too much.
pub fn f_term_integral(x: f64, t: f64, psi0: &InitialWavefunction, theta: f64, opts: &TimeDomainOptions) -> Result<RayValue> {
    check_t(t)?;
    let big_theta = PI + theta;
    let d = Complex64::from_polar(1.0, big_theta);
    let half = Complex64::from_polar(1.0, big_theta / 2.0);
    let cos = -d.re;
    if cos <= 1e-12 {
        return Err(FloquetError::VerticalCut(big_theta));
    }
    let a = growth_rate(x, psi0);
    if cancellation(a, t, cos) > opts.max_cancellation {
        return Ok(RayValue {
            value: free_propagation(x, t, psi0)?,
            truncation: Truncation::default(),
        });
    }
    let s_max = s_cutoff(a, t, cos);
    let pref = d / Complex64::new(0.0, 2.0 * PI);
    let integrand = |s: f64| -> Result<Complex64> {
        let rho = half * s;
        let jump = f_with_root(x, rho, psi0)? - f_with_root(x, -rho, psi0)?;
        Ok((d * (s * s * t)).exp() * jump * pref * (2.0 * s))
    };
    let start = 8 + (s_max * a).ceil() as usize;
    let (value, nodes) = doubled(integrand, s_max, start, opts)?;
    Ok(RayValue {
        value,
        truncation: Truncation { n_modes: 0, q_max: s_max * s_max, quad_nodes: nodes },
    })
}

/// int (4 pi i t)^{-1/2} e^{i (x - s)^2 / (4 t)} psi0(s) ds.
pub fn free_propagation(x: f64, t: f64, psi0: &InitialWavefunction) -> Result<Complex64> {
    check_t(t)?;
    let norm = (Complex64::new(0.0, 4.0 * PI * t)).sqrt();
    let kernel = |s: f64| Complex64::new(0.0, (x - s).powi(2) / (4.0 * t)).exp() * psi0.eval(s) / norm;
    let mut cuts = psi0.breakpoints();
    if x > cuts[0] && x < cuts[cuts.len() - 1] {
        cuts.push(x);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        acc += adaptive(kernel, w[0], w[1], 1e-13, 2_000_000)?;
    }
    Ok(acc)
}

/// Leading Borel coefficient i^{3/2} r int psi0 of the t^{-1/2} tail.
pub fn leading_tail_coefficient(params: &ModelParams, psi0: &InitialWavefunction) -> Complex64 {
    I_THREE_HALVES * params.r * psi0.integral()
}

/// Resonances and residues cached for repeated psi(x, t) evaluations.
#[derive(Debug, Clone)]
pub struct PsiEvaluator {
    pub params: ModelParams,
    pub psi0: InitialWavefunction,
    pub sheet: SheetConfig,
    pub opts: TimeDomainOptions,
    pub resonances: Vec<Resonance>,
}

impl PsiEvaluator {
    /// `cfg` must be the physical sheet; its cuts are tilted by opts.theta.
    pub fn new(params: &ModelParams, psi0: &InitialWavefunction, cfg: &SheetConfig, opts: &TimeDomainOptions) -> Result<Self> {
        if !is_physical_sheet(cfg) {
            return Err(FloquetError::SheetMismatch(format!(
                "psi(x, t) needs the physical sheet, got {}",
                cfg.id()
            )));
        }
        let sheet = ray_sheet(cfg, opts.theta)?;
        let found = find_resonances(params, &sheet, &FindOptions::default())?;
        if !found.consistent {
            return Err(FloquetError::NotFound(format!(
                "zero count {} but {} refined",
                found.count,
                found.resonances.len()
            )));
        }
        let resonances = found
            .resonances
            .into_iter()
            .map(|r| with_residues(r, params, psi0, opts.n_gamow))
            .collect::<Result<Vec<_>>>()?;
        Ok(PsiEvaluator {
            params: *params,
            psi0: psi0.clone(),
            sheet,
            opts: *opts,
            resonances,
        })
    }

    pub fn gamow(&self, x: f64, t: f64) -> Result<Complex64> {
        self.resonances
            .iter()
            .map(|r| gamow_term(x, t, r, &self.params, self.opts.n_gamow))
            .sum()
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<PsiDecomposition> {
        check_t(t)?;
        let gamow = self.gamow(x, t)?;
        let cut = cut_integrals(x, t, &self.params, &self.psi0, &self.sheet, &self.opts)?;
        let f = f_term_integral(x, t, &self.psi0, self.opts.theta, &self.opts)?;
        Ok(PsiDecomposition {
            x,
            t,
            gamow,
            cut_sum: cut.value,
            f_term: f.value,
            total: gamow + cut.value + f.value,
            truncation: Truncation {
                n_modes: cut.truncation.n_modes,
                q_max: cut.truncation.q_max.max(f.truncation.q_max),
                quad_nodes: cut.truncation.quad_nodes + f.truncation.quad_nodes,
            },
        })
    }

    /// Every (x, t) pair, in row-major order of (xs, ts).
    pub fn eval_grid(&self, xs: &[f64], ts: &[f64]) -> Vec<Result<PsiDecomposition>> {
        let pts: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ts.iter().map(move |&t| (x, t))).collect();
        pts.par_iter().map(|&(x, t)| self.eval(x, t)).collect()
    }
}

/// One-shot psi(x, t); builds the resonance cache each call.
pub fn psi_xt(
    x: f64,
    t: f64,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
) -> Result<PsiDecomposition> {
    PsiEvaluator::new(params, psi0, cfg, &TimeDomainOptions::default())?.eval(x, t)
}
