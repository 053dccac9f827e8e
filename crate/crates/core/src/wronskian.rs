//! One-sided minimal solutions of the homogeneous recurrence and their Wronskian.
//!
//! u decays as n -> +inf and is normalised by u_{n1-1} = 1; v decays as
//! n -> -inf with v_{n2+1} = 1. With the anchors held fixed, W(z) is analytic
//! away from cuts, which is what the zero finder relies on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::barriermap::{to_well_frame, WellFrame};
use crate::branchcut::{h_from_root, mode_point, sqrt_on_sheet, ModelParams, SheetConfig};
use crate::error::{FloquetError, Result};
use crate::modesolver::ModeVector;

const ANCHOR_MARGIN: f64 = 0.5;
const TAIL_PRODUCT: f64 = 1e-20;
const MAX_ITER: usize = 10_000;
const MIN_WINDOW: i64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// decays as n -> +inf
    Upward,
    /// decays as n -> -inf
    Downward,
}

impl Direction {
    fn step(self) -> i64 {
        match self {
            Direction::Upward => 1,
            Direction::Downward => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionMethod {
    Iteration,
    ContinuedFraction,
}

/// n1 >= 1 and n2 <= -1 used for the normalisation of u and v.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchors {
    pub upper: i64,
    pub lower: i64,
}

impl Anchors {
    pub fn merge(self, other: Anchors) -> Anchors {
        Anchors {
            upper: self.upper.max(other.upper),
            lower: self.lower.min(other.lower),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedSolution {
    pub direction: Direction,
    pub anchor: i64,
    pub method: SolutionMethod,
    pub values: ModeVector,
    /// Iterations (or final continued-fraction depth) spent on the tail.
    pub work: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianValue {
    pub w: Complex64,
    /// max over the window of |W_n - W_0|.
    pub n_spread: f64,
    /// max(|u_0 v_1|, |v_0 u_1|): size of the terms that cancel in W.
    pub scale: f64,
    pub anchors: Anchors,
    pub sheet: SheetConfig,
}

impl WronskianValue {
    pub fn relative_spread(&self) -> f64 {
        self.n_spread / self.w.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WronskianOptions {
    pub method: SolutionMethod,
    pub tol: f64,
    pub anchors: Option<Anchors>,
}

impl Default for WronskianOptions {
    fn default() -> Self {
        WronskianOptions {
            method: SolutionMethod::ContinuedFraction,
            tol: 1e-14,
            anchors: None,
        }
    }
}

/// h_n(z) in a given frame.
#[inline]
fn h_at(z: Complex64, n: i64, frame: &WellFrame) -> Complex64 {
    let omega = frame.params.omega;
    let root = sqrt_on_sheet(mode_point(z, n, omega), &frame.sheet, n);
    h_from_root(root, z, n, omega)
}

fn check_r(frame: &WellFrame) -> Result<f64> {
    let r = frame.params.r;
    if r == 0.0 {
        return Err(FloquetError::Degenerate(
            "r = 0 decouples the modes; use the closed-form h_n zeros".into(),
        ));
    }
    Ok(r)
}

/// Smallest n1 >= 1 (largest n2 <= -1) beyond which |h_n| > 2|r| + margin.
pub fn select_anchors(z: Complex64, params: &ModelParams, cfg: &SheetConfig) -> Anchors {
    anchors_in_frame(z, &to_well_frame(params, cfg))
}

pub(crate) fn anchors_in_frame(z: Complex64, frame: &WellFrame) -> Anchors {
    let r = frame.params.r.abs();
    let omega = frame.params.omega;
    let bound = 2.0 * r + ANCHOR_MARGIN;
    // |h_n| >= sqrt|i + i n omega + z| - 1 >= sqrt(|1 + n omega + Im z|) - 1
    let need = (bound + 1.0).powi(2);
    let up_stop = (((need - 1.0 - z.im) / omega).ceil() as i64).max(1) + 1;
    let mut upper = 1;
    for n in 1..=up_stop {
        if h_at(z, n, frame).norm() <= bound {
            upper = n + 1;
        }
    }
    let down_stop = (((need + 1.0 + z.im) / omega).ceil() as i64).max(1) + 1;
    let mut lower = -1;
    for m in 1..=down_stop {
        if h_at(z, -m, frame).norm() <= bound {
            lower = -m - 1;
        }
    }
    Anchors { upper, lower }
}

/// Anchors valid at every point of `points`.
pub fn anchors_covering(points: &[Complex64], params: &ModelParams, cfg: &SheetConfig) -> Anchors {
    let frame = to_well_frame(params, cfg);
    points
        .iter()
        .map(|&z| anchors_in_frame(z, &frame))
        .reduce(Anchors::merge)
        .unwrap_or(Anchors { upper: 1, lower: -1 })
}

/// Minimal solution beyond `anchor` in direction `dir`, returned as
/// t_k = x_{anchor + dir k} for k = 0..len with x_{anchor - dir} = 1.
fn tail(
    z: Complex64,
    frame: &WellFrame,
    anchor: i64,
    dir: i64,
    method: SolutionMethod,
    tol: f64,
    keep: usize,
) -> Result<(Vec<Complex64>, usize)> {
    let r = frame.params.r;
    let h = |k: usize| h_at(z, anchor + dir * k as i64, frame);
    match method {
        SolutionMethod::Iteration => {
            // truncate once prod r/(|h| - r) is negligible
            let mut hs = Vec::new();
            let mut prod = 1.0;
            loop {
                let hk = h(hs.len());
                let mag = hk.norm();
                if mag <= 2.0 * r.abs() {
                    return Err(FloquetError::NoConvergence(format!(
                        "non-contraction: |h| = {mag:.3} <= 2|r| at n = {}",
                        anchor + dir * hs.len() as i64
                    )));
                }
                prod *= r.abs() / (mag - r.abs());
                hs.push(hk);
                if hs.len() >= keep && prod < TAIL_PRODUCT {
                    break;
                }
                if hs.len() > 100_000 {
                    return Err(FloquetError::NoConvergence("tail does not decay".into()));
                }
            }
            let len = hs.len();
            let coef: Vec<Complex64> = hs.iter().map(|hk| r / hk).collect();
            let mut cur = vec![Complex64::new(0.0, 0.0); len];
            let mut next = cur.clone();
            for it in 1..=MAX_ITER {
                let mut diff = 0.0f64;
                let mut size = 0.0f64;
                for k in 0..len {
                    let left = if k == 0 { Complex64::new(1.0, 0.0) } else { cur[k - 1] };
                    let right = if k + 1 < len { cur[k + 1] } else { Complex64::new(0.0, 0.0) };
                    next[k] = coef[k] * (left + right);
                    diff = diff.max((next[k] - cur[k]).norm());
                    size = size.max(next[k].norm());
                }
                std::mem::swap(&mut cur, &mut next);
                if diff <= tol * size {
                    cur.truncate(keep);
                    return Ok((cur, it));
                }
            }
            Err(FloquetError::NoConvergence(format!("contraction iteration hit {MAX_ITER} steps")))
        }
        SolutionMethod::ContinuedFraction => {
            let eval = |depth: usize| -> Vec<Complex64> {
                // rho_k = t_k / t_{k-1} = r / (h_k - r rho_{k+1})
                let mut rho = vec![Complex64::new(0.0, 0.0); depth + 1];
                for k in (0..depth).rev() {
                    rho[k] = r / (h(k) - r * rho[k + 1]);
                }
                let mut out = Vec::with_capacity(keep);
                let mut prev = Complex64::new(1.0, 0.0);
                for &rk in rho.iter().take(keep) {
                    prev *= rk;
                    out.push(prev);
                }
                out
            };
            let mut depth = (2 * anchor.unsigned_abs() as usize + 40).max(keep + 8);
            let mut prev = eval(depth);
            loop {
                depth *= 2;
                let next = eval(depth);
                let diff = prev.iter().zip(&next).map(|(a, b)| (a - b).norm() / b.norm().max(1e-300)).fold(0.0, f64::max);
                prev = next;
                if diff <= 1e-12 || depth > 1 << 20 {
                    return Ok((prev, depth));
                }
            }
        }
    }
}

/// The solution decaying toward +inf, on modes [lo, hi].
fn one_sided(
    z: Complex64,
    frame: &WellFrame,
    dir: Direction,
    anchor: i64,
    lo: i64,
    hi: i64,
    opts: &WronskianOptions,
) -> Result<OneSidedSolution> {
    let r = check_r(frame)?;
    let step = dir.step();
    // modes from the anchor outward that fall inside [lo, hi]
    let beyond = match dir {
        Direction::Upward => (hi - anchor + 1).max(0),
        Direction::Downward => (anchor - lo + 1).max(0),
    } as usize;
    let (t, work) = tail(z, frame, anchor, step, opts.method, opts.tol, beyond.max(2))?;
    let mut values = ModeVector::zeros(lo, hi);
    let get_t = |k: i64| -> Complex64 {
        if k == -1 {
            Complex64::new(1.0, 0.0)
        } else {
            t[k as usize]
        }
    };
    // k-index relative to the anchor: n = anchor + step * k
    let k_of = |n: i64| (n - anchor) * step;
    let k_min = k_of(if step > 0 { lo } else { hi });
    // recursion inward: x_{n - step} = (h_n / r) x_n - x_{n + step}
    let mut inner: Vec<Complex64> = Vec::new(); // values for k = -2, -3, ...
    if k_min < -1 {
        let mut a = get_t(0); // k = 0
        let mut b = get_t(-1); // k = -1
        let mut k = -1;
        while k > k_min {
            let n = anchor + step * k;
            let c = (h_at(z, n, frame) / r) * b - a;
            inner.push(c);
            a = b;
            b = c;
            k -= 1;
        }
    }
    for n in lo..=hi {
        let k = k_of(n);
        let v = if k >= -1 { get_t(k) } else { inner[(-k - 2) as usize] };
        values.set(n, v);
    }
    Ok(OneSidedSolution {
        direction: dir,
        anchor,
        method: opts.method,
        values,
        work,
    })
}

/// u on [lo, hi] (decaying upward).
pub fn build_u(
    z: Complex64,
    params: &ModelParams,
    cfg: &SheetConfig,
    opts: &WronskianOptions,
    lo: i64,
    hi: i64,
) -> Result<OneSidedSolution> {
    let frame = to_well_frame(params, cfg);
    let anchor = opts.anchors.unwrap_or_else(|| anchors_in_frame(z, &frame)).upper;
    one_sided(z, &frame, Direction::Upward, anchor, lo, hi, opts)
}

/// v on [lo, hi] (decaying downward).
pub fn build_v(
    z: Complex64,
    params: &ModelParams,
    cfg: &SheetConfig,
    opts: &WronskianOptions,
    lo: i64,
    hi: i64,
) -> Result<OneSidedSolution> {
    let frame = to_well_frame(params, cfg);
    let anchor = opts.anchors.unwrap_or_else(|| anchors_in_frame(z, &frame)).lower;
    one_sided(z, &frame, Direction::Downward, anchor, lo, hi, opts)
}

/// W = u_n v_{n+1} - v_n u_{n+1}, reported at n = 0.
pub fn wronskian(z: Complex64, params: &ModelParams, cfg: &SheetConfig) -> Result<WronskianValue> {
    wronskian_with(z, params, cfg, &WronskianOptions::default())
}

pub fn wronskian_with(
    z: Complex64,
    params: &ModelParams,
    cfg: &SheetConfig,
    opts: &WronskianOptions,
) -> Result<WronskianValue> {
    let frame = to_well_frame(params, cfg);
    let mut value = wronskian_in_frame(z, &frame, opts)?;
    value.sheet = cfg.clone();
    Ok(value)
}

pub(crate) fn wronskian_in_frame(z: Complex64, frame: &WellFrame, opts: &WronskianOptions) -> Result<WronskianValue> {
    check_r(frame)?;
    let mut anchors = opts.anchors.unwrap_or_else(|| anchors_in_frame(z, frame));
    for _ in 0..8 {
        match wronskian_fixed(z, frame, opts, anchors) {
            Err(FloquetError::NoConvergence(_)) => {
                // push the anchors outward (only reachable with caller-fixed anchors)
                anchors = anchors.merge(anchors_in_frame(z, frame));
                anchors.upper += 2;
                anchors.lower -= 2;
            }
            other => return other,
        }
    }
    wronskian_fixed(z, frame, opts, anchors)
}

fn wronskian_fixed(z: Complex64, frame: &WellFrame, opts: &WronskianOptions, anchors: Anchors) -> Result<WronskianValue> {
    let (mut w_lo, mut w_hi) = (anchors.lower, anchors.upper - 1);
    while w_hi - w_lo + 1 < MIN_WINDOW {
        w_lo -= 1;
        w_hi += 1;
    }
    let u = one_sided(z, frame, Direction::Upward, anchors.upper, w_lo, w_hi + 1, opts)?;
    let v = one_sided(z, frame, Direction::Downward, anchors.lower, w_lo, w_hi + 1, opts)?;
    let wn = |n: i64| u.values.get(n) * v.values.get(n + 1) - v.values.get(n) * u.values.get(n + 1);
    let w0 = wn(0);
    let n_spread = (w_lo..=w_hi).map(|n| (wn(n) - w0).norm()).fold(0.0, f64::max);
    let scale = (u.values.get(0) * v.values.get(1))
        .norm()
        .max((v.values.get(0) * u.values.get(1)).norm());
    if !w0.is_finite() {
        return Err(FloquetError::NoConvergence(format!("non-finite Wronskian at z = {z}")));
    }
    Ok(WronskianValue {
        w: w0,
        n_spread,
        scale,
        anchors,
        sheet: frame.sheet.clone(),
    })
}

/// Pointwise W with anchors fixed once, for contour and Newton work.
#[derive(Debug, Clone)]
pub struct WronskianEvaluator {
    frame: WellFrame,
    opts: WronskianOptions,
}

impl WronskianEvaluator {
    pub fn new(params: &ModelParams, cfg: &SheetConfig, anchors: Anchors) -> Result<Self> {
        let frame = to_well_frame(params, cfg);
        check_r(&frame)?;
        Ok(WronskianEvaluator {
            frame,
            opts: WronskianOptions {
                anchors: Some(anchors),
                ..WronskianOptions::default()
            },
        })
    }

    /// Anchors fitted to a set of sample points.
    pub fn covering(params: &ModelParams, cfg: &SheetConfig, points: &[Complex64]) -> Result<Self> {
        let anchors = anchors_covering(points, params, cfg);
        Self::new(params, cfg, anchors)
    }

    pub fn anchors(&self) -> Anchors {
        self.opts.anchors.expect("fixed anchors")
    }

    pub fn eval(&self, z: Complex64) -> Result<WronskianValue> {
        let v = wronskian_fixed(z, &self.frame, &self.opts, self.anchors());
        match v {
            Err(FloquetError::NoConvergence(_)) => wronskian_in_frame(z, &self.frame, &self.opts),
            other => other,
        }
    }

    pub fn w(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.eval(z)?.w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branchcut::h_n;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn degenerate_r() {
        let p = ModelParams::well(2.0, 0.0).unwrap();
        assert!(matches!(wronskian(c(-0.1, 0.1), &p, &SheetConfig::usual()), Err(FloquetError::Degenerate(_))));
    }

    #[test]
    fn small_r_leading_terms() {
        let p = ModelParams::well(2.0, 1e-3).unwrap();
        let cfg = SheetConfig::usual();
        let z = c(-0.2, 0.3);
        let opts = WronskianOptions::default();
        let u = build_u(z, &p, &cfg, &opts, -2, 4).unwrap();
        assert_eq!(u.anchor, 1);
        let r = p.r;
        let h1 = h_n(z, 1, 2.0, &cfg);
        let h2 = h_n(z, 2, 2.0, &cfg);
        // a + T a: u_1 ~ r/h_1, u_2 ~ r^2/(h_1 h_2)
        assert!((u.values.get(1) - r / h1).norm() < 3.0 * r.powi(3));
        assert!((u.values.get(2) - r * r / (h1 * h2)).norm() < 3.0 * r.powi(4));
        let w = wronskian(z, &p, &cfg).unwrap();
        let h0 = h_n(z, 0, 2.0, &cfg);
        let hm = h_n(z, -1, 2.0, &cfg);
        let approx = h0 - r * r / h1 - r * r / hm;
        assert!((w.w * r - approx).norm() < 10.0 * r.powi(4));
    }

    #[test]
    fn methods_agree_and_spread_small() {
        let p = ModelParams::well(1.3, 0.7).unwrap();
        let cfg = SheetConfig::usual();
        for z in [c(-0.5, 0.2), c(0.3, -0.4), c(-2.0, 0.6)] {
            let a = wronskian_with(z, &p, &cfg, &WronskianOptions { method: SolutionMethod::Iteration, ..Default::default() }).unwrap();
            let b = wronskian(z, &p, &cfg).unwrap();
            assert_eq!(a.anchors, b.anchors);
            assert!((a.w - b.w).norm() <= 1e-10 * b.w.norm(), "{} vs {}", a.w, b.w);
            assert!(b.relative_spread() <= 1e-8);
        }
    }

    #[test]
    fn homogeneous_residual() {
        let p = ModelParams::well(2.0, 0.9).unwrap();
        let cfg = SheetConfig::usual();
        let z = c(-0.3, 0.5);
        let u = build_u(z, &p, &cfg, &WronskianOptions::default(), -6, 10).unwrap();
        for n in -5..=9 {
            let res = h_n(z, n, 2.0, &cfg) * u.values.get(n) - p.r * (u.values.get(n - 1) + u.values.get(n + 1));
            let scale = u.values.get(n - 1).norm().max(u.values.get(n).norm()).max(1e-300);
            assert!(res.norm() <= 1e-10 * scale, "n={n}");
        }
        let v = build_v(z, &p, &cfg, &WronskianOptions::default(), -10, 6).unwrap();
        assert_eq!(v.values.get(v.anchor + 1), c(1.0, 0.0));
        for n in -9..=5 {
            let res = h_n(z, n, 2.0, &cfg) * v.values.get(n) - p.r * (v.values.get(n - 1) + v.values.get(n + 1));
            let scale = v.values.get(n + 1).norm().max(v.values.get(n).norm()).max(1e-300);
            assert!(res.norm() <= 1e-10 * scale, "n={n}");
        }
    }

    #[test]
    fn barrier_frame_negates_r() {
        // W zeros do not care about the sign of r; the frame W is finite
        let p = ModelParams::barrier(2.0, 0.4).unwrap();
        let w = wronskian(c(-0.2, 0.1), &p, &SheetConfig::usual()).unwrap();
        assert!(w.w.is_finite() && w.relative_spread() < 1e-8);
    }
}
