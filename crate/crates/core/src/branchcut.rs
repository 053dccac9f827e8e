//! Square roots on a chosen sheet and the coefficients `h_n(z)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FloquetError, Result};

/// Points whose argument lies within this of the lower end of the
/// half-open window are treated as sitting on the cut.
const CUT_SNAP: f64 = 1e-13;

/// e^{-i pi/4}, the principal sqrt(-i).
pub const SQRT_MINUS_I: Complex64 = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);

/// e^{i pi/4}, the principal sqrt(i).
pub const SQRT_I: Complex64 = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);

/// i^{3/2} = e^{3 i pi/4}.
pub const I_THREE_HALVES: Complex64 = Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    Principal,
    Second,
}

impl Sheet {
    pub fn flipped(self) -> Sheet {
        match self {
            Sheet::Principal => Sheet::Second,
            Sheet::Second => Sheet::Principal,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Sheet::Principal => 1.0,
            Sheet::Second => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Well,
    Barrier,
}

impl PotentialKind {
    /// +1 for the attractive well, -1 for the barrier.
    pub fn sign(self) -> f64 {
        match self {
            PotentialKind::Well => 1.0,
            PotentialKind::Barrier => -1.0,
        }
    }
}

/// Drive frequency, drive amplitude and sign of the delta.
///
/// `r` is allowed to be negative only inside the barrier transform; the
/// validating constructor refuses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub r: f64,
    pub potential: PotentialKind,
}

impl ModelParams {
    pub fn new(omega: f64, r: f64, potential: PotentialKind) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(FloquetError::InvalidParameter(format!(
                "omega must be positive, got {omega}"
            )));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(FloquetError::InvalidParameter(format!(
                "r must be non-negative, got {r}"
            )));
        }
        Ok(ModelParams { omega, r, potential })
    }

    pub fn well(omega: f64, r: f64) -> Result<Self> {
        Self::new(omega, r, PotentialKind::Well)
    }

    pub fn barrier(omega: f64, r: f64) -> Result<Self> {
        Self::new(omega, r, PotentialKind::Barrier)
    }

    pub fn with_r(&self, r: f64) -> Self {
        ModelParams { r, ..*self }
    }
}

/// Which determination of every sqrt(i + i n omega + z) is in force.
///
/// Cuts run from each branch point along the ray of angle `cut_angle`;
/// the argument of the radicand lives in `(cut_angle - 2 pi, cut_angle]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetConfig {
    cut_angle: f64,
    default_sheet: Sheet,
    overrides: BTreeMap<i64, Sheet>,
}

impl Default for SheetConfig {
    fn default() -> Self {
        Self::usual()
    }
}

impl SheetConfig {
    /// Principal roots everywhere, cuts along the negative real axis.
    pub fn usual() -> Self {
        SheetConfig {
            cut_angle: PI,
            default_sheet: Sheet::Principal,
            overrides: BTreeMap::new(),
        }
    }

    pub fn new(cut_angle: f64, default_sheet: Sheet, overrides: BTreeMap<i64, Sheet>) -> Result<Self> {
        if !cut_angle.is_finite() || cut_angle.cos().abs() < 1e-12 {
            return Err(FloquetError::VerticalCut(cut_angle));
        }
        Ok(SheetConfig {
            cut_angle,
            default_sheet,
            overrides,
        })
    }

    pub fn with_cut_angle(&self, cut_angle: f64) -> Result<Self> {
        Self::new(cut_angle, self.default_sheet, self.overrides.clone())
    }

    /// Flip the determination of a single mode relative to the default.
    pub fn with_flip(&self, n: i64) -> Self {
        let mut out = self.clone();
        let s = out.sheet_for(n).flipped();
        if s == out.default_sheet {
            out.overrides.remove(&n);
        } else {
            out.overrides.insert(n, s);
        }
        out
    }

    pub fn with_override(&self, n: i64, sheet: Sheet) -> Self {
        let mut out = self.clone();
        if sheet == out.default_sheet {
            out.overrides.remove(&n);
        } else {
            out.overrides.insert(n, sheet);
        }
        out
    }

    pub fn cut_angle(&self) -> f64 {
        self.cut_angle
    }

    pub fn default_sheet(&self) -> Sheet {
        self.default_sheet
    }

    pub fn overrides(&self) -> &BTreeMap<i64, Sheet> {
        &self.overrides
    }

    pub fn sheet_for(&self, n: i64) -> Sheet {
        *self.overrides.get(&n).unwrap_or(&self.default_sheet)
    }

    /// Unit vector along which the cuts leave their branch points.
    pub fn cut_direction(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.cut_angle)
    }

    /// True for principal roots everywhere with the cut angle congruent to pi.
    pub fn is_usual(&self) -> bool {
        self.overrides.is_empty()
            && self.default_sheet == Sheet::Principal
            && (self.cut_angle.cos() + 1.0).abs() < 1e-15
            && self.cut_angle.sin().abs() < 1e-12
    }

    /// Same cuts with every determination reversed.
    pub fn all_flipped(&self) -> Self {
        SheetConfig {
            cut_angle: self.cut_angle,
            default_sheet: self.default_sheet.flipped(),
            overrides: self.overrides.iter().map(|(&n, &s)| (n, s.flipped())).collect(),
        }
    }

    /// The configuration seen from the neighbouring strip: mode n here is
    /// mode n + shift there.
    pub fn shifted(&self, shift: i64) -> Self {
        SheetConfig {
            cut_angle: self.cut_angle,
            default_sheet: self.default_sheet,
            overrides: self.overrides.iter().map(|(&n, &s)| (n + shift, s)).collect(),
        }
    }

    /// Short label used in CSV output, e.g. `usual`, `flip:0`, `theta=0.1;flip:-1,2`.
    pub fn id(&self) -> String {
        let mut parts = Vec::new();
        if (self.cut_angle - PI).abs() > 1e-15 {
            parts.push(format!("theta={}", self.cut_angle));
        }
        if self.default_sheet == Sheet::Second {
            parts.push("second".to_string());
        }
        if !self.overrides.is_empty() {
            let list: Vec<String> = self.overrides.keys().map(|n| n.to_string()).collect();
            parts.push(format!("flip:{}", list.join(",")));
        }
        if parts.is_empty() {
            "usual".to_string()
        } else {
            parts.join(";")
        }
    }

    /// Parse the CLI sheet syntax: `usual`, `second`, `flip:0`, `flip:-1,2`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let mut cfg = SheetConfig::usual();
        for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            if part == "usual" || part == "principal" {
                continue;
            } else if part == "second" {
                cfg.default_sheet = Sheet::Second;
            } else if let Some(list) = part.strip_prefix("flip:") {
                for tok in list.split(',') {
                    let n: i64 = tok.trim().parse().map_err(|_| {
                        FloquetError::InvalidParameter(format!("bad mode index in sheet spec: {tok}"))
                    })?;
                    cfg = cfg.with_flip(n);
                }
            } else if let Some(v) = part.strip_prefix("theta=") {
                let a: f64 = v.trim().parse().map_err(|_| {
                    FloquetError::InvalidParameter(format!("bad cut angle: {v}"))
                })?;
                cfg = cfg.with_cut_angle(a)?;
            } else {
                return Err(FloquetError::InvalidParameter(format!("unknown sheet spec: {part}")));
            }
        }
        Ok(cfg)
    }
}

/// Square root with the argument of `w` taken in `(theta - 2 pi, theta]`.
fn sqrt_with_cut(w: Complex64, theta: f64) -> Complex64 {
    let m = w.norm();
    if m == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = w.im.atan2(w.re);
    let two_pi = 2.0 * PI;
    let mut a = a - two_pi * ((a - theta) / two_pi).ceil();
    if a - (theta - two_pi) <= CUT_SNAP {
        a += two_pi;
    }
    Complex64::from_polar(m.sqrt(), 0.5 * a)
}

/// sqrt(w) on the sheet `cfg` assigns to mode `n`.
///
/// Points on the cut take the value approached with arg -> theta from below.
pub fn sqrt_on_sheet(w: Complex64, cfg: &SheetConfig, n: i64) -> Complex64 {
    sqrt_with_cut(w, cfg.cut_angle) * cfg.sheet_for(n).sign()
}

/// sqrt(w) with the cut of `cfg` and its default sheet, ignoring overrides.
pub fn sqrt_on_default_sheet(w: Complex64, cfg: &SheetConfig) -> Complex64 {
    sqrt_with_cut(w, cfg.cut_angle) * cfg.default_sheet.sign()
}

/// Radicand of mode n: i + i n omega + z.
#[inline]
pub fn mode_point(z: Complex64, n: i64, omega: f64) -> Complex64 {
    Complex64::new(z.re, z.im + 1.0 + n as f64 * omega)
}

/// Branch point of mode n in the z-plane.
#[inline]
pub fn branch_point(n: i64, omega: f64) -> Complex64 {
    Complex64::new(0.0, -(1.0 + n as f64 * omega))
}

/// Index n0 of the branch point closest to z = 0 and the point itself.
pub fn nearest_branch_point(omega: f64) -> (i64, Complex64) {
    let n0 = (-1.0 / omega).round() as i64;
    let best = [n0 - 1, n0, n0 + 1]
        .into_iter()
        .min_by(|&a, &b| {
            let da = (1.0 + a as f64 * omega).abs();
            let db = (1.0 + b as f64 * omega).abs();
            da.partial_cmp(&db).unwrap().then(b.cmp(&a))
        })
        .unwrap();
    (best, branch_point(best, omega))
}

/// h_n from an already chosen root S of i + i n omega + z.
///
/// Uses s^2 - 1 = n omega - i z to avoid cancellation near h = 0.
#[inline]
pub fn h_from_root(root: Complex64, z: Complex64, n: i64, omega: f64) -> Complex64 {
    let s = SQRT_MINUS_I * root;
    let sp1 = s + 1.0;
    if sp1.norm_sqr() > 0.25 {
        Complex64::new(n as f64 * omega + z.im, -z.re) / sp1
    } else {
        s - 1.0
    }
}

/// h_n(z) = sqrt(-i) sqrt(i + i n omega + z) - 1 on the sheet of `cfg`.
pub fn h_n(z: Complex64, n: i64, omega: f64, cfg: &SheetConfig) -> Complex64 {
    let root = sqrt_on_sheet(mode_point(z, n, omega), cfg, n);
    h_from_root(root, z, n, omega)
}

/// Distance from z to the closest branch point -i(1 + n omega).
pub fn distance_to_branch_points(z: Complex64, omega: f64) -> f64 {
    let k = ((-z.im - 1.0) / omega).round() as i64;
    (k - 1..=k + 1)
        .map(|n| (z - branch_point(n, omega)).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Distance from z to the union of cut rays of `cfg`.
pub fn distance_to_cuts(z: Complex64, omega: f64, cfg: &SheetConfig) -> f64 {
    let d = cfg.cut_direction();
    // along-ray coordinate and perpendicular offset are linear in z, so only
    // the few rays whose perpendicular offset is small can be nearest
    let perp = Complex64::new(-d.im, d.re);
    let mut best = f64::INFINITY;
    let offset_per_mode = (Complex64::new(0.0, -omega).conj() * perp).re;
    let base = ((z - branch_point(0, omega)).conj() * perp).re;
    let centre = if offset_per_mode.abs() > 0.0 {
        (-base / offset_per_mode).round() as i64
    } else {
        0
    };
    for n in centre - 2..=centre + 2 {
        let rel = z - branch_point(n, omega);
        let along = (rel.conj() * d).re;
        let dist = if along <= 0.0 { rel.norm() } else { (rel - d * along).norm() };
        best = best.min(dist);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn principal_sqrt_of_i() {
        let cfg = SheetConfig::usual();
        let s = sqrt_on_sheet(c(0.0, 1.0), &cfg, 0);
        assert!((s - SQRT_I).norm() < 1e-15);
        let second = cfg.with_override(0, Sheet::Second);
        assert!((sqrt_on_sheet(c(0.0, 1.0), &second, 0) + SQRT_I).norm() < 1e-15);
    }

    #[test]
    fn jump_across_negative_axis() {
        let cfg = SheetConfig::usual();
        let a = sqrt_on_sheet(c(-1.0, 1e-9), &cfg, 0);
        let b = sqrt_on_sheet(c(-1.0, -1e-9), &cfg, 0);
        assert!((a - b - c(0.0, 2.0)).norm() < 1e-8);
    }

    #[test]
    fn on_cut_takes_upper_side() {
        let cfg = SheetConfig::usual();
        assert!((sqrt_on_sheet(c(-4.0, 0.0), &cfg, 0) - c(0.0, 2.0)).norm() < 1e-15);
        assert!((sqrt_on_sheet(c(-4.0, -0.0), &cfg, 0) - c(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn rotated_cut() {
        // theta = 0: arguments in (-2pi, 0], so sqrt(i) sits in the third quadrant
        let cfg = SheetConfig::usual().with_cut_angle(0.0).unwrap();
        let s = sqrt_on_sheet(c(0.0, 1.0), &cfg, 0);
        assert!((s + SQRT_I).norm() < 1e-15);
        assert!((sqrt_on_sheet(c(4.0, 0.0), &cfg, 0) - 2.0).norm() < 1e-15);
        assert!(SheetConfig::usual().with_cut_angle(PI / 2.0).is_err());
    }

    #[test]
    fn h_examples() {
        let cfg = SheetConfig::usual();
        assert!(h_n(c(0.0, 0.0), 0, 2.0, &cfg).norm() < 1e-16);
        assert!((h_n(c(0.0, 0.0), 1, 2.0, &cfg) - (3f64.sqrt() - 1.0)).norm() < 1e-15);
        assert!((h_n(c(0.0, 0.0), -1, 2.0, &cfg) - c(-1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn h_small_z_is_accurate() {
        let cfg = SheetConfig::usual();
        let z = c(-1e-9, 3e-10);
        // h_0 = -i z / (s + 1) with s close to 1
        let h = h_n(z, 0, 2.0, &cfg);
        assert!((h - c(0.0, -0.5) * z).norm() < 1e-17);
    }

    #[test]
    fn sheet_parse_roundtrip() {
        let cfg = SheetConfig::parse("flip:0,-1").unwrap();
        assert_eq!(cfg.sheet_for(0), Sheet::Second);
        assert_eq!(cfg.sheet_for(-1), Sheet::Second);
        assert_eq!(cfg.sheet_for(1), Sheet::Principal);
        assert_eq!(SheetConfig::parse(&cfg.id()).unwrap(), cfg);
        assert!(SheetConfig::parse("usual").unwrap().is_usual());
        assert!(SheetConfig::parse("flip:x").is_err());
    }

    #[test]
    fn nearest_branch() {
        assert_eq!(nearest_branch_point(2.0).0, 0);
        assert_eq!(nearest_branch_point(0.7).0, -1);
        assert_eq!(nearest_branch_point(0.4).0, -2);
    }

    #[test]
    fn cut_distance() {
        let cfg = SheetConfig::usual();
        assert!((distance_to_cuts(c(-3.0, -0.9), 2.0, &cfg) - 0.1).abs() < 1e-12);
        assert!((distance_to_cuts(c(0.5, -1.0), 2.0, &cfg) - 0.5).abs() < 1e-12);
        assert!((distance_to_cuts(c(-3.0, 0.95), 2.0, &cfg) - 0.05).abs() < 1e-12);
    }
}
