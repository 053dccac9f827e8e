//! Zeros of W: counting, refinement, residues, sweeps and small-r laws.

pub mod contour;
pub mod sweep;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::barriermap::to_well_frame;
use crate::branchcut::{
    branch_point, distance_to_branch_points, distance_to_cuts, h_n, mode_point, nearest_branch_point,
    sqrt_on_sheet, ModelParams, SheetConfig, SQRT_I,
};
use crate::error::{FloquetError, Result};
use crate::forcing::InitialWavefunction;
use crate::modesolver::{solve_modes, ModeVector};
use crate::wronskian::WronskianEvaluator;

pub use contour::{winding_number, Contour, Region, WindingOptions};
pub use sweep::{default_sheet_set, sweep, visibility_transitions, SweepOptions, SweepRecord};

/// Sign of the n = -1 term in a0, fixed by matching the W-zero at r = 0.01
/// (see `a0_sign_regression`).
pub const A0_SECOND_TERM_SIGN: f64 = 1.0;

/// Gap kept between search regions and the cuts bounding the strip.
pub const CUT_GAP: f64 = 1e-4;

const NEWTON_MAX_ITER: usize = 60;

/// A refined zero of W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub z_star: Complex64,
    pub sheet: SheetConfig,
    pub p_star: Complex64,
    /// Decay rate of |e^{p t}|, -Re p_star.
    pub gamma: f64,
    pub visible: bool,
    pub residues: Option<ModeVector>,
    /// |W(z_star)| / scale.
    pub newton_residual: f64,
    pub iterations: usize,
}

impl Resonance {
    pub fn new(z_star: Complex64, params: &ModelParams, sheet: &SheetConfig, newton_residual: f64, iterations: usize) -> Self {
        let (n0, _) = nearest_branch_point(params.omega);
        let p_star = mode_point(z_star, n0, params.omega);
        Resonance {
            z_star,
            sheet: sheet.clone(),
            p_star,
            gamma: -p_star.re,
            visible: is_physical_sheet(sheet),
            residues: None,
            newton_residual,
            iterations,
        }
    }

    /// Decay exponent in the sign convention of the decomposition theorem
    /// (psi ~ e^{-lambda t}), i.e. -p_star.
    pub fn decay_exponent(&self) -> Complex64 {
        -self.p_star
    }
}

/// Principal roots everywhere (any cut angle): the sheet reached from Re p > 0.
pub fn is_physical_sheet(cfg: &SheetConfig) -> bool {
    cfg.overrides().is_empty() && cfg.default_sheet() == crate::branchcut::Sheet::Principal
}

/// Indices of the branch points bounding the strip that contains z = 0.
///
/// Returns (n_lo, n_hi) with Im b(n_lo) <= 0 < Im b(n_hi) = Im b(n_lo) + omega.
pub fn strip_bounds(omega: f64) -> (i64, i64) {
    let n_lo = (-1.0 / omega).ceil() as i64;
    (n_lo, n_lo - 1)
}

/// Strip between consecutive cuts, from +0.5 past the branch points out to
/// (2|r| + 2)^2 along the cut direction.
pub fn default_region(params: &ModelParams, cfg: &SheetConfig) -> Region {
    let (n_lo, _) = strip_bounds(params.omega);
    let d = cfg.cut_direction();
    let cos = d.re.abs();
    let reach = (2.0 * params.r.abs() + 2.0).powi(2) / cos;
    Region {
        origin: branch_point(n_lo, params.omega) + Complex64::new(0.0, CUT_GAP),
        dir: d,
        u: (-0.5 / cos, reach),
        v: (0.0, params.omega - 2.0 * CUT_GAP),
    }
}

fn evaluator_for(region: &Region, params: &ModelParams, cfg: &SheetConfig) -> Result<WronskianEvaluator> {
    let mut pts = region.grid(6, 6);
    // the most demanding points sit next to the branch points
    pts.extend(region.corners());
    WronskianEvaluator::covering(params, cfg, &pts)
}

/// Zeros of the decoupled problem (r = 0) inside `region`: h_n(z) = 0 at
/// z = -i n omega when the sheet gives sqrt(i) its principal value there.
fn decoupled_zeros(region: &Region, params: &ModelParams, cfg: &SheetConfig) -> Vec<Complex64> {
    let frame = to_well_frame(params, cfg);
    let corners = region.corners();
    let (lo, hi) = corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| (a.min(z.im), b.max(z.im)));
    let n_min = (-hi / params.omega).floor() as i64 - 1;
    let n_max = (-lo / params.omega).ceil() as i64 + 1;
    (n_min..=n_max)
        .filter_map(|n| {
            let z = Complex64::new(0.0, -(n as f64) * params.omega);
            let root = sqrt_on_sheet(mode_point(z, n, params.omega), &frame.sheet, n);
            ((root - SQRT_I).norm() < 1e-12 && region.contains(z, 0.0)).then_some(z)
        })
        .collect()
}

/// Number of zeros of W inside `region` (argument principle).
pub fn count_zeros(region: &Region, params: &ModelParams, cfg: &SheetConfig) -> Result<i64> {
    if params.r == 0.0 {
        return Ok(decoupled_zeros(region, params, cfg).len() as i64);
    }
    let ev = evaluator_for(region, params, cfg)?;
    count_with(&ev, region, params.omega)
}

fn count_with(ev: &WronskianEvaluator, region: &Region, omega: f64) -> Result<i64> {
    let f = |z: Complex64| ev.eval(z).map(|w| (w.w, w.scale));
    winding_number(&f, &Contour::of_region(region), omega, &WindingOptions::default())
}

fn count_disk(ev: &WronskianEvaluator, centre: Complex64, radius: f64, omega: f64) -> Result<i64> {
    let f = |z: Complex64| ev.eval(z).map(|w| (w.w, w.scale));
    winding_number(&f, &Contour::Circle { centre, radius }, omega, &WindingOptions::default())
}

/// Newton on W with a central-difference derivative.
fn newton(ev: &WronskianEvaluator, guess: Complex64, omega: f64) -> Result<(Complex64, f64, usize)> {
    let mut z = guess;
    let mut val = ev.eval(z)?;
    for it in 1..=NEWTON_MAX_ITER {
        let hstep = 1e-7 * z.norm().max(1e-2);
        let dp = ev.w(z + hstep)?;
        let dm = ev.w(z - hstep)?;
        let di = ev.w(z + Complex64::new(0.0, hstep))?;
        let dmi = ev.w(z - Complex64::new(0.0, hstep))?;
        // average the real- and imaginary-direction differences
        let deriv = 0.5 * ((dp - dm) / (2.0 * hstep) + (di - dmi) / Complex64::new(0.0, 2.0 * hstep));
        if deriv.norm() == 0.0 || !deriv.is_finite() {
            return Err(FloquetError::Divergence(format!("flat W at {z}")));
        }
        let mut step = -val.w / deriv;
        // backtrack while |W| grows
        let mut next = z + step;
        let mut next_val = ev.eval(next);
        for _ in 0..12 {
            match &next_val {
                Ok(v) if v.w.norm() <= val.w.norm() * 1.5 || v.w.norm() <= 1e-12 * v.scale => break,
                _ => {
                    step *= 0.5;
                    next = z + step;
                    next_val = ev.eval(next);
                }
            }
        }
        let next_val = next_val?;
        z = next;
        val = next_val;
        if distance_to_branch_points(z, omega) < 1e-8 {
            return Err(FloquetError::Divergence(format!("collapsed onto a branch point near {z}")));
        }
        if !z.is_finite() || z.norm() > 1e6 {
            return Err(FloquetError::Divergence(format!("newton left the plane from guess {guess}")));
        }
        if step.norm() <= 1e-12 * z.norm().max(1.0) && val.w.norm() <= 1e-12 * val.scale {
            return Ok((z, val.w.norm() / val.scale, it));
        }
    }
    if val.w.norm() <= 1e-12 * val.scale {
        return Ok((z, val.w.norm() / val.scale, NEWTON_MAX_ITER));
    }
    Err(FloquetError::Divergence(format!("no convergence after {NEWTON_MAX_ITER} iterations from {guess}")))
}

/// Refine a zero of W from `guess` and check it is simple.
pub fn refine_zero(guess: Complex64, params: &ModelParams, cfg: &SheetConfig) -> Result<Resonance> {
    if params.r == 0.0 {
        let region = Region::rect(guess.re - 1.0, guess.re + 1.0, guess.im - 1.0, guess.im + 1.0);
        return decoupled_zeros(&region, params, cfg)
            .into_iter()
            .min_by(|a, b| (a - guess).norm().partial_cmp(&(b - guess).norm()).unwrap())
            .map(|z| Resonance::new(z, params, cfg, 0.0, 0))
            .ok_or_else(|| FloquetError::NotFound(format!("no decoupled zero near {guess}")));
    }
    let spread = 0.05f64.max(guess.norm() * 0.5);
    let pts: Vec<Complex64> = (0..8)
        .map(|k| guess + Complex64::from_polar(spread, k as f64 * PI / 4.0))
        .chain(std::iter::once(guess))
        .collect();
    let ev = WronskianEvaluator::covering(params, cfg, &pts)?;
    refine_with(&ev, guess, params, cfg)
}

fn refine_with(ev: &WronskianEvaluator, guess: Complex64, params: &ModelParams, cfg: &SheetConfig) -> Result<Resonance> {
    let (z, residual, iters) = newton(ev, guess, params.omega)?;
    let radius = 1e-4f64
        .min(0.5 * distance_to_cuts(z, params.omega, cfg))
        .min(0.5 * distance_to_branch_points(z, params.omega));
    if radius > 1e-9 {
        let k = count_disk(ev, z, radius, params.omega)?;
        if k != 1 {
            return Err(FloquetError::Divergence(format!("zero at {z} is not simple (disk count {k})")));
        }
    }
    Ok(Resonance::new(z, params, cfg, residual, iters))
}

/// Search options for [`find_resonances`].
#[derive(Debug, Clone, Copy)]
pub struct FindOptions {
    pub region: Option<Region>,
    pub max_depth: u32,
}

impl Default for FindOptions {
    fn default() -> Self {
        FindOptions { region: None, max_depth: 24 }
    }
}

/// All zeros found in a region, with the argument-principle total.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub resonances: Vec<Resonance>,
    pub count: i64,
    pub consistent: bool,
}

/// Count, subdivide and refine every zero of W in the search region.
pub fn find_resonances(params: &ModelParams, cfg: &SheetConfig, opts: &FindOptions) -> Result<SearchResult> {
    let region = opts.region.unwrap_or_else(|| default_region(params, cfg));
    if params.r == 0.0 {
        let zs = decoupled_zeros(&region, params, cfg);
        let count = zs.len() as i64;
        return Ok(SearchResult {
            resonances: zs.into_iter().map(|z| Resonance::new(z, params, cfg, 0.0, 0)).collect(),
            count,
            consistent: true,
        });
    }
    let ev = evaluator_for(&region, params, cfg)?;
    let count = count_with(&ev, &region, params.omega)?;
    let mut found: Vec<Resonance> = Vec::new();
    if count > 0 {
        search(&ev, &region, count, params, cfg, 0, opts.max_depth, &mut found)?;
    }
    found.sort_by(|a, b| a.z_star.im.partial_cmp(&b.z_star.im).unwrap().then(a.z_star.re.partial_cmp(&b.z_star.re).unwrap()));
    let consistent = found.len() as i64 == count;
    Ok(SearchResult { resonances: found, count, consistent })
}

#[allow(clippy::too_many_arguments)]
fn search(
    ev: &WronskianEvaluator,
    region: &Region,
    count: i64,
    params: &ModelParams,
    cfg: &SheetConfig,
    depth: u32,
    max_depth: u32,
    found: &mut Vec<Resonance>,
) -> Result<()> {
    if count <= 0 {
        return Ok(());
    }
    if count == 1 {
        // try Newton from the centre before splitting further
        if let Ok(res) = refine_with(ev, region.centre(), params, cfg) {
            if region.contains(res.z_star, 1e-12) {
                if !found.iter().any(|f| (f.z_star - res.z_star).norm() < 1e-9) {
                    found.push(res);
                }
                return Ok(());
            }
        }
    }
    if depth >= max_depth {
        return Err(FloquetError::NotFound(format!(
            "subdivision limit reached with {count} zero(s) near {}",
            region.centre()
        )));
    }
    // split; nudge the split lines if a child contour runs into a zero
    let mut last_err = None;
    for (a, b) in [(0.5, 0.5), (0.47, 0.53), (0.53, 0.46), (0.41, 0.57), (0.6, 0.38)] {
        let kids = region.quarter(a, b);
        let counts: Result<Vec<i64>> = kids.iter().map(|k| count_with(ev, k, params.omega)).collect();
        match counts {
            Ok(cs) => {
                if cs.iter().sum::<i64>() != count {
                    last_err = Some(FloquetError::PhaseAmbiguity(region.centre()));
                    continue;
                }
                for (kid, c) in kids.iter().zip(cs) {
                    search(ev, kid, c, params, cfg, depth + 1, max_depth, found)?;
                }
                return Ok(());
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(FloquetError::PhaseAmbiguity(region.centre())))
}

/// Residues A_n = (1/2 pi i) oint y_n dz on a circle of radius eps around z_star.
pub fn residues(
    res: &Resonance,
    params: &ModelParams,
    psi0: &InitialWavefunction,
    cfg: &SheetConfig,
    eps: f64,
    quad_points: usize,
    n_modes: usize,
) -> Result<ModeVector> {
    let z0 = res.z_star;
    if distance_to_branch_points(z0, params.omega) <= eps || distance_to_cuts(z0, params.omega, cfg) <= eps {
        return Err(FloquetError::InvalidParameter(format!(
            "residue disk of radius {eps} around {z0} touches a cut or branch point"
        )));
    }
    let ring = |q: usize| -> Result<ModeVector> {
        let mut acc = ModeVector::zeros(-(n_modes as i64), n_modes as i64);
        for k in 0..q {
            let dz = Complex64::from_polar(eps, 2.0 * PI * (k as f64 + 0.5) / q as f64);
            let sol = solve_modes(z0 + dz, params, psi0, cfg, n_modes)?;
            for (i, v) in sol.y.values.iter().enumerate() {
                acc.values[i] += v * dz / q as f64;
            }
        }
        Ok(acc)
    };
    let a = ring(quad_points)?;
    let b = ring(2 * quad_points)?;
    let scale = b.max_abs();
    let change = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 && change > 1e-9 * scale {
        return Err(FloquetError::Quadrature(format!(
            "residues changed by {:.2e} (relative) under Q-doubling",
            change / scale
        )));
    }
    Ok(b)
}

/// Default residue radius: well inside the cut-free disk around z_star.
pub fn residue_radius(res: &Resonance, params: &ModelParams, cfg: &SheetConfig) -> f64 {
    0.05f64
        .min(0.25 * distance_to_cuts(res.z_star, params.omega, cfg))
        .min(0.25 * distance_to_branch_points(res.z_star, params.omega))
}

/// Attach residues computed with the default radius and Q = 64.
pub fn with_residues(mut res: Resonance, params: &ModelParams, psi0: &InitialWavefunction, n_modes: usize) -> Result<Resonance> {
    let cfg = res.sheet.clone();
    let eps = residue_radius(&res, params, &cfg);
    res.residues = Some(residues(&res, params, psi0, &cfg, eps, 64, n_modes)?);
    Ok(res)
}

/// max_n |h_n A_n - r A_{n-1} - r A_{n+1}| / max_n |A_n| over interior modes.
pub fn residue_recurrence_residual(res: &Resonance, params: &ModelParams) -> Option<f64> {
    let a = res.residues.as_ref()?;
    let frame = to_well_frame(params, &res.sheet);
    let t = frame.transform;
    let scale = a.max_abs();
    if scale == 0.0 {
        return Some(0.0);
    }
    let worst = (a.n_min + 1..a.n_max())
        .map(|n| {
            // frame variables carry the odd-mode gauge sign
            let g = |m: i64| a.get(m) * t.mode_sign(m);
            let h = h_n(res.z_star, n, params.omega, &frame.sheet);
            (h * g(n) - frame.params.r * (g(n - 1) + g(n + 1))).norm()
        })
        .fold(0.0, f64::max);
    Some(worst / scale)
}

/// a0 in z_star ~ a0 r^2 for small r.
pub fn small_r_asymptote(params: &ModelParams) -> Result<Complex64> {
    let omega = params.omega;
    if (omega - 1.0).abs() < 1e-12 {
        return Err(FloquetError::InvalidParameter("a0 is singular at omega = 1".into()));
    }
    let cfg = SheetConfig::usual();
    let i2 = Complex64::new(0.0, 2.0);
    let zero = Complex64::new(0.0, 0.0);
    Ok(i2 / h_n(zero, 1, omega, &cfg) + A0_SECOND_TERM_SIGN * i2 / h_n(zero, -1, omega, &cfg))
}

/// The zero paired with res: near -conj(z_star) on the reflected sheet.
pub fn paired_sheet(cfg: &SheetConfig) -> SheetConfig {
    // S'(w') = i conj(S(w)) for w' = -conj(w): argument window (pi - theta, 3 pi - theta]
    cfg.with_cut_angle(3.0 * PI - cfg.cut_angle()).expect("reflected cut keeps cos != 0")
}

/// |z_pair + conj(z_star)| for the zero refined on the paired sheet.
pub fn conjugate_pair_check(res: &Resonance, params: &ModelParams) -> Result<f64> {
    let pair = refine_zero(-res.z_star.conj(), params, &paired_sheet(&res.sheet))?;
    Ok((pair.z_star + res.z_star.conj()).norm())
}

/// Same refinement on an arbitrary sheet (negative controls).
pub fn pair_distance_on(res: &Resonance, params: &ModelParams, cfg: &SheetConfig) -> Result<f64> {
    let pair = refine_zero(-res.z_star.conj(), params, cfg)?;
    Ok((pair.z_star + res.z_star.conj()).norm())
}

/// Slope fit of log|Re z_star| against log r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiphotonFit {
    pub slope: f64,
    pub intercept: f64,
    pub expected: f64,
    pub points: Vec<(f64, Complex64)>,
}

/// Photon order m with 1/(m+1) < omega <= 1/m (m = 0 for omega > 1).
pub fn photon_order(omega: f64) -> i64 {
    if omega > 1.0 {
        0
    } else {
        ((1.0 / omega).ceil() as i64 - 1).max(0)
    }
}

/// Track the bound-state-born zero over r_grid and fit the slope.
pub fn multiphoton_order(omega: f64, r_grid: &[f64]) -> Result<MultiphotonFit> {
    let mut grid: Vec<f64> = r_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cfg = SheetConfig::usual();
    let mut points = Vec::new();
    let mut prev: Option<(f64, Complex64)> = None;
    for &r in &grid {
        let params = ModelParams::well(omega, r)?;
        let guess = match prev {
            Some((r0, z0)) => z0 * (r / r0).powi(2),
            None => small_r_asymptote(&params).unwrap_or(Complex64::new(0.0, 1.0)) * r * r,
        };
        let z = match refine_zero(guess, &params, &cfg) {
            Ok(res) => res.z_star,
            Err(_) => {
                let found = find_resonances(&params, &cfg, &FindOptions::default())?;
                found
                    .resonances
                    .iter()
                    .min_by(|a, b| (a.z_star - guess).norm().partial_cmp(&(b.z_star - guess).norm()).unwrap())
                    .ok_or_else(|| FloquetError::NotFound(format!("no zero at omega = {omega}, r = {r}")))?
                    .z_star
            }
        };
        if z.re.abs() < 1e-14 {
            return Err(FloquetError::InvalidParameter(format!(
                "|Re z| = {:.1e} at r = {r} is below resolution; raise r",
                z.re.abs()
            )));
        }
        points.push((r, z));
        prev = Some((r, z));
    }
    let xs: Vec<f64> = points.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, z)| z.re.abs().ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    Ok(MultiphotonFit {
        slope,
        intercept,
        expected: (2 * photon_order(omega) + 2) as f64,
        points,
    })
}

/// Ordinary least-squares line y = a x + b.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}
