//! Initial data psi0 and the Laplace-domain source f(x, p).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::branchcut::{mode_point, sqrt_on_default_sheet, sqrt_on_sheet, ModelParams, SheetConfig, I_THREE_HALVES};
use crate::error::{FloquetError, Result};
use crate::quadrature;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Profile families for psi0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// sum_k c_k x^k on [-M, M].
    PolyBump { coefficients: Vec<Complex64> },
    /// e^{-rate |x|} on [-M, M].
    TruncatedExponential { rate: f64 },
    /// Natural cubic spline through (knots, values), zero outside.
    PiecewiseCubic { knots: Vec<f64>, values: Vec<Complex64> },
}

/// How the source integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMethod {
    ClosedForm,
    Quadrature,
}

/// value(x) = e^{beta (x - origin)} * sum_j coeffs[j] (x - origin)^j on [lo, hi].
#[derive(Debug, Clone, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    origin: f64,
    beta: f64,
    coeffs: Vec<Complex64>,
}

impl Piece {
    fn eval(&self, x: f64, deriv: usize) -> Complex64 {
        let u = x - self.origin;
        // derivatives of e^{beta u} P(u) via Leibniz
        let poly_deriv = |k: usize| -> Complex64 {
            let mut s = ZERO;
            let mut pow = 1.0;
            for j in k..self.coeffs.len() {
                let falling: f64 = (j - k + 1..=j).map(|v| v as f64).product();
                s += self.coeffs[j] * (falling * pow);
                pow *= u;
            }
            s
        };
        let e = (self.beta * u).exp();
        let mut total = ZERO;
        let mut binom = 1.0;
        for k in 0..=deriv {
            if k > 0 {
                binom = binom * (deriv - k + 1) as f64 / k as f64;
            }
            total += poly_deriv(k) * (binom * self.beta.powi((deriv - k) as i32));
        }
        total * e
    }

    /// Coefficients of the polynomial re-expanded about `new_origin`.
    fn shifted_coeffs(&self, new_origin: f64) -> Vec<Complex64> {
        let d = new_origin - self.origin;
        let mut c = self.coeffs.clone();
        let n = c.len();
        // repeated synthetic division (Taylor shift)
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let next = c[j + 1];
                c[j] += next * d;
            }
        }
        c
    }
}

/// int_0^L e^{K w} T(w) dw for a polynomial T given by coefficients.
fn exp_poly_integral(k: Complex64, len: f64, t: &[Complex64]) -> Complex64 {
    if len <= 0.0 {
        return ZERO;
    }
    if k.norm() * len <= 3.0 {
        // power series in K
        let mut total = ZERO;
        let mut km = Complex64::new(1.0, 0.0); // K^m / m!
        for m in 0..80 {
            let mut inner = ZERO;
            let mut lp = len.powi(m as i32 + 1);
            for (j, tj) in t.iter().enumerate() {
                inner += tj * (lp / (m + j + 1) as f64);
                lp *= len;
            }
            let term = km * inner;
            total += term;
            if m > 4 && term.norm() <= 1e-18 * total.norm().max(1e-300) {
                break;
            }
            km = km * k / (m + 1) as f64;
        }
        return total;
    }
    // antiderivative e^{Kw} sum_j (-1)^j T^{(j)}(w) / K^{j+1}
    let deg = t.len();
    let eval_anti = |w: f64| -> Complex64 {
        let mut s = ZERO;
        let mut kpow = k;
        for j in 0..deg {
            let mut dj = ZERO;
            let mut pow = 1.0;
            for i in j..deg {
                let falling: f64 = (i - j + 1..=i).map(|v| v as f64).product();
                dj += t[i] * (falling * pow);
                pow *= w;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += dj * sign / kpow;
            kpow *= k;
        }
        s
    };
    (k * len).exp() * eval_anti(len) - eval_anti(0.0)
}

/// Compactly supported initial wave function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialWavefunction {
    pub support: f64,
    pub profile: Profile,
    pub method: SourceMethod,
    #[serde(skip)]
    pieces: Vec<Piece>,
}

impl InitialWavefunction {
    fn build(support: f64, profile: Profile) -> Result<Self> {
        if !(support.is_finite() && support > 0.0) {
            return Err(FloquetError::InvalidParameter(format!("support must be positive, got {support}")));
        }
        let pieces = match &profile {
            Profile::PolyBump { coefficients } => vec![Piece {
                lo: -support,
                hi: support,
                origin: 0.0,
                beta: 0.0,
                coeffs: coefficients.clone(),
            }],
            Profile::TruncatedExponential { rate } => {
                if !rate.is_finite() {
                    return Err(FloquetError::InvalidParameter("rate must be finite".into()));
                }
                vec![
                    Piece {
                        lo: -support,
                        hi: 0.0,
                        origin: 0.0,
                        beta: *rate,
                        coeffs: vec![Complex64::new(1.0, 0.0)],
                    },
                    Piece {
                        lo: 0.0,
                        hi: support,
                        origin: 0.0,
                        beta: -*rate,
                        coeffs: vec![Complex64::new(1.0, 0.0)],
                    },
                ]
            }
            Profile::PiecewiseCubic { knots, values } => spline_pieces(knots, values)?,
        };
        Ok(InitialWavefunction {
            support,
            profile,
            method: SourceMethod::ClosedForm,
            pieces,
        })
    }

    /// (1 - (x/M)^2)^2 on [-M, M].
    pub fn poly_bump(support: f64) -> Result<Self> {
        let m2 = support * support;
        let c = |v: f64| Complex64::new(v, 0.0);
        Self::build(
            support,
            Profile::PolyBump {
                coefficients: vec![c(1.0), c(0.0), c(-2.0 / m2), c(0.0), c(1.0 / (m2 * m2))],
            },
        )
    }

    pub fn polynomial(coefficients: Vec<Complex64>, support: f64) -> Result<Self> {
        Self::build(support, Profile::PolyBump { coefficients })
    }

    pub fn truncated_exponential(rate: f64, support: f64) -> Result<Self> {
        Self::build(support, Profile::TruncatedExponential { rate })
    }

    pub fn piecewise_cubic(knots: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(FloquetError::InvalidParameter(
                "piecewise_cubic needs at least two knots and one value per knot".into(),
            ));
        }
        let support = knots.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Self::build(support, Profile::PiecewiseCubic { knots, values })
    }

    /// Knot file with columns x, re, im (header optional).
    pub fn piecewise_cubic_from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| FloquetError::Io(e.to_string()))?;
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| FloquetError::Io(e.to_string()))?;
            let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
            match (parse(0), parse(1), parse(2)) {
                (Some(x), Some(re), im) => {
                    knots.push(x);
                    values.push(Complex64::new(re, im.unwrap_or(0.0)));
                }
                _ if knots.is_empty() => continue, // header line
                _ => return Err(FloquetError::Io(format!("bad knot row in {}", path.display()))),
            }
        }
        Self::piecewise_cubic(knots, values)
    }

    /// psi0 identically zero.
    pub fn zero(support: f64) -> Result<Self> {
        Self::polynomial(vec![ZERO], support)
    }

    /// Rebuild the piece table (needed after deserialization).
    pub fn rebuilt(&self) -> Result<Self> {
        let mut out = Self::build(self.support, self.profile.clone())?;
        out.method = self.method;
        Ok(out)
    }

    pub fn with_method(mut self, method: SourceMethod) -> Self {
        self.method = method;
        self
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.eval_deriv(x, 0)
    }

    /// d^k psi0 / dx^k at x (one-sided at piece boundaries, left piece wins).
    pub fn eval_deriv(&self, x: f64, k: usize) -> Complex64 {
        for p in &self.pieces {
            if x >= p.lo && x <= p.hi {
                return p.eval(x, k);
            }
        }
        ZERO
    }

    /// Ends of the smooth pieces, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// int psi0 dx.
    pub fn integral(&self) -> Complex64 {
        self.pieces
            .iter()
            .map(|p| {
                let t = p.shifted_coeffs(p.lo);
                exp_poly_integral(Complex64::new(p.beta, 0.0), p.hi - p.lo, &t)
                    * (p.beta * (p.lo - p.origin)).exp()
            })
            .sum()
    }

    /// int_{-M}^{M} |psi0|^2 dx by Gauss–Legendre on each piece.
    pub fn norm_sqr(&self) -> f64 {
        let rule = quadrature::gauss_legendre(32);
        self.pieces
            .iter()
            .map(|p| {
                quadrature::composite_gl(|x| Complex64::new(p.eval(x, 0).norm_sqr(), 0.0), p.lo, p.hi, 8, &rule).re
            })
            .sum()
    }

    /// int e^{kappa |x - s|} psi0(s) ds.
    pub fn green_integral(&self, x: f64, kappa: Complex64) -> Result<Complex64> {
        match self.method {
            SourceMethod::ClosedForm => Ok(self.green_closed(x, kappa)),
            SourceMethod::Quadrature => self.green_quadrature(x, kappa),
        }
    }

    fn green_closed(&self, x: f64, kappa: Complex64) -> Complex64 {
        let mut total = ZERO;
        for p in &self.pieces {
            // s >= x: e^{kappa (s - x)}
            let lo = p.lo.max(x);
            if p.hi > lo {
                let t = p.shifted_coeffs(lo);
                let k = kappa + p.beta;
                let pre = (kappa * (lo - x) + p.beta * (lo - p.origin)).exp();
                total += pre * exp_poly_integral(k, p.hi - lo, &t);
            }
            // s <= x: e^{kappa (x - s)}, integrate from the top end down
            let hi = p.hi.min(x);
            if hi > p.lo {
                // substitute s = hi - w: e^{kappa (x - hi) + kappa w} e^{beta (hi - w - origin)}
                let t = reflect(&p.shifted_coeffs(hi));
                let k = kappa - p.beta;
                let pre = (kappa * (x - hi) + p.beta * (hi - p.origin)).exp();
                total += pre * exp_poly_integral(k, hi - p.lo, &t);
            }
        }
        total
    }

    fn green_quadrature(&self, x: f64, kappa: Complex64) -> Result<Complex64> {
        let mut total = ZERO;
        for p in &self.pieces {
            let f = |s: f64| (kappa * (x - s).abs()).exp() * p.eval(s, 0);
            if x > p.lo && x < p.hi {
                total += quadrature::adaptive(f, p.lo, x, 0.5e-12, 1_000_000)?;
                total += quadrature::adaptive(f, x, p.hi, 0.5e-12, 1_000_000)?;
            } else {
                total += quadrature::adaptive(f, p.lo, p.hi, 1e-12, 1_000_000)?;
            }
        }
        Ok(total)
    }
}

/// Coefficients of T(-w) given those of T(w).
fn reflect(c: &[Complex64]) -> Vec<Complex64> {
    c.iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect()
}

fn spline_pieces(knots: &[f64], values: &[Complex64]) -> Result<Vec<Piece>> {
    let n = knots.len();
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FloquetError::InvalidParameter("spline knots must be strictly increasing".into()));
    }
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    // natural spline second derivatives
    let mut m = vec![ZERO; n];
    if n > 2 {
        let inner = n - 2;
        let mut dl = Vec::with_capacity(inner.saturating_sub(1));
        let mut du = Vec::with_capacity(inner.saturating_sub(1));
        let mut d = Vec::with_capacity(inner);
        let mut b = Vec::with_capacity(inner);
        for i in 1..n - 1 {
            d.push(Complex64::new(2.0 * (h[i - 1] + h[i]), 0.0));
            b.push(((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]) * 6.0);
            if i + 1 < n - 1 {
                du.push(Complex64::new(h[i], 0.0));
                dl.push(Complex64::new(h[i], 0.0));
            }
        }
        let sol = crate::tridiag::solve(dl, d, du, b)
            .ok_or_else(|| FloquetError::InvalidParameter("degenerate spline system".into()))?;
        m[1..n - 1].copy_from_slice(&sol.x);
    }
    Ok((0..n - 1)
        .map(|i| {
            let hi = h[i];
            let b = (values[i + 1] - values[i]) / hi - (m[i] * 2.0 + m[i + 1]) * (hi / 6.0);
            Piece {
                lo: knots[i],
                hi: knots[i + 1],
                origin: knots[i],
                beta: 0.0,
                coeffs: vec![values[i], b, m[i] * 0.5, (m[i + 1] - m[i]) / (6.0 * hi)],
            }
        })
        .collect())
}

/// f(x, p) with its large-p leading term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceValue {
    pub f: Complex64,
    pub asymptotic_leading: Complex64,
}

/// f(x, p) for a chosen root of p (sqrt(p) itself, sign included).
pub fn f_with_root(x: f64, root: Complex64, psi0: &InitialWavefunction) -> Result<Complex64> {
    if root.norm() == 0.0 {
        return Err(FloquetError::SingularPoint(ZERO));
    }
    let kappa = I_THREE_HALVES * root;
    let g = psi0.green_integral(x, kappa)?;
    Ok(-(I_THREE_HALVES / (2.0 * root)) * g)
}

/// f(x, p) with sqrt(p) taken on the default sheet and cut of `cfg`.
///
/// p lies on the cut of a single mode; per-mode overrides are applied by
/// the mode solver, which passes explicit roots.
pub fn f_xp(x: f64, p: Complex64, psi0: &InitialWavefunction, cfg: &SheetConfig) -> Result<SourceValue> {
    if p.norm() == 0.0 {
        return Err(FloquetError::SingularPoint(p));
    }
    let root = sqrt_on_default_sheet(p, cfg);
    Ok(SourceValue {
        f: f_with_root(x, root, psi0)?,
        asymptotic_leading: psi0.eval(x) / p,
    })
}

/// Forcing of mode n in the recurrence for psi~ = psi^(0, .) - f(0, .).
///
/// F(p_n) + r (F(p_{n-1}) + F(p_{n+1})) where F = f(0, .) and every p_j
/// takes its root from the sheet `cfg` assigns to mode j.
pub fn f_n(z: Complex64, n: i64, params: &ModelParams, psi0: &InitialWavefunction, cfg: &SheetConfig) -> Result<Complex64> {
    let frame = crate::barriermap::to_well_frame(params, cfg);
    let big_f = |j: i64| -> Result<Complex64> {
        let w = mode_point(z, j, params.omega);
        if w.norm() == 0.0 {
            return Err(FloquetError::SingularPoint(w));
        }
        let root = sqrt_on_sheet(w, &frame.sheet, j) * frame.transform.root_sign();
        f_with_root(0.0, root, psi0)
    };
    Ok(big_f(n)? + params.r * (big_f(n - 1)? + big_f(n + 1)?))
}
