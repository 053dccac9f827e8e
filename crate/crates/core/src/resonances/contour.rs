//! Winding numbers of W along closed contours by adaptive phase tracking.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::branchcut::branch_point;
use crate::error::{FloquetError, Result};

const MAX_DEPTH: u32 = 40;
const PROXIMITY: f64 = 1e-6;

/// Parallelogram {origin + u dir + i v : u0 <= u <= u1, v0 <= v <= v1}.
///
/// With dir = 1 this is an ordinary rectangle; tilting dir along the cuts
/// keeps sub-regions clear of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub origin: Complex64,
    pub dir: Complex64,
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl Region {
    pub fn rect(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Region {
            origin: Complex64::new(0.0, 0.0),
            dir: Complex64::new(1.0, 0.0),
            u: (re_min, re_max),
            v: (im_min, im_max),
        }
    }

    pub fn point(&self, u: f64, v: f64) -> Complex64 {
        self.origin + self.dir * u + Complex64::new(0.0, v)
    }

    pub fn centre(&self) -> Complex64 {
        self.point(0.5 * (self.u.0 + self.u.1), 0.5 * (self.v.0 + self.v.1))
    }

    /// Corners in (u, v)-counterclockwise order.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            self.point(self.u.0, self.v.0),
            self.point(self.u.1, self.v.0),
            self.point(self.u.1, self.v.1),
            self.point(self.u.0, self.v.1),
        ]
    }

    /// +1 if the (u, v) order is counterclockwise in z.
    pub fn orientation(&self) -> f64 {
        if self.dir.re >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// (u, v) coordinates of z.
    pub fn coords(&self, z: Complex64) -> (f64, f64) {
        let w = z - self.origin;
        let u = w.re / self.dir.re;
        let v = w.im - u * self.dir.im;
        (u, v)
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        let (u, v) = self.coords(z);
        u >= self.u.0 - slack && u <= self.u.1 + slack && v >= self.v.0 - slack && v <= self.v.1 + slack
    }

    pub fn diameter(&self) -> f64 {
        let c = self.corners();
        (c[0] - c[2]).norm().max((c[1] - c[3]).norm())
    }

    /// Split into four at fractions (a, b) of the u and v extents.
    pub fn quarter(&self, a: f64, b: f64) -> [Region; 4] {
        let um = self.u.0 + a * (self.u.1 - self.u.0);
        let vm = self.v.0 + b * (self.v.1 - self.v.0);
        let with = |u: (f64, f64), v: (f64, f64)| Region { u, v, ..*self };
        [
            with((self.u.0, um), (self.v.0, vm)),
            with((um, self.u.1), (self.v.0, vm)),
            with((self.u.0, um), (vm, self.v.1)),
            with((um, self.u.1), (vm, self.v.1)),
        ]
    }

    pub fn grid(&self, nu: usize, nv: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let fu = i as f64 / (nu - 1).max(1) as f64;
                let fv = j as f64 / (nv - 1).max(1) as f64;
                out.push(self.point(
                    self.u.0 + fu * (self.u.1 - self.u.0),
                    self.v.0 + fv * (self.v.1 - self.v.0),
                ));
            }
        }
        out
    }
}

/// A closed contour.
#[derive(Debug, Clone, PartialEq)]
pub enum Contour {
    /// Vertices in counterclockwise order, closed implicitly.
    Polygon(Vec<Complex64>),
    Circle { centre: Complex64, radius: f64 },
}

impl Contour {
    pub fn of_region(region: &Region) -> Self {
        let mut c = region.corners().to_vec();
        if region.orientation() < 0.0 {
            c.reverse();
        }
        Contour::Polygon(c)
    }

    fn segments(&self) -> Vec<Segment> {
        match self {
            Contour::Polygon(v) => (0..v.len())
                .map(|i| Segment::Line(v[i], v[(i + 1) % v.len()]))
                .collect(),
            Contour::Circle { centre, radius } => (0..4)
                .map(|k| Segment::Arc {
                    centre: *centre,
                    radius: *radius,
                    a0: k as f64 * PI / 2.0,
                    a1: (k + 1) as f64 * PI / 2.0,
                })
                .collect(),
        }
    }

    /// Smallest distance from the contour to any branch point -i(1 + n omega).
    pub fn branch_clearance(&self, omega: f64) -> (f64, Complex64) {
        let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
        for seg in self.segments() {
            let (lo, hi) = seg.im_range();
            let n_lo = ((-hi - 1.0) / omega).floor() as i64 - 1;
            let n_hi = ((-lo - 1.0) / omega).ceil() as i64 + 1;
            for n in n_lo..=n_hi {
                let b = branch_point(n, omega);
                let d = seg.distance(b);
                if d < best.0 {
                    best = (d, b);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Line(Complex64, Complex64),
    Arc { centre: Complex64, radius: f64, a0: f64, a1: f64 },
}

impl Segment {
    fn at(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line(a, b) => a + (b - a) * s,
            Segment::Arc { centre, radius, a0, a1 } => centre + Complex64::from_polar(radius, a0 + (a1 - a0) * s),
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Segment::Line(a, b) => (b - a).norm(),
            Segment::Arc { radius, a0, a1, .. } => radius * (a1 - a0).abs(),
        }
    }

    fn im_range(&self) -> (f64, f64) {
        match *self {
            Segment::Line(a, b) => (a.im.min(b.im), a.im.max(b.im)),
            Segment::Arc { centre, radius, .. } => (centre.im - radius, centre.im + radius),
        }
    }

    fn distance(&self, p: Complex64) -> f64 {
        match *self {
            Segment::Line(a, b) => {
                let d = b - a;
                let len2 = d.norm_sqr();
                let t = if len2 > 0.0 { (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0) } else { 0.0 };
                (a + d * t - p).norm()
            }
            Segment::Arc { centre, radius, .. } => ((p - centre).norm() - radius).abs(),
        }
    }
}

/// Options for phase tracking.
#[derive(Debug, Clone, Copy)]
pub struct WindingOptions {
    /// Samples per unit length before refinement.
    pub density: f64,
    pub min_samples: usize,
    /// |f| below floor * scale on the contour is treated as a zero on it.
    pub floor: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions {
            density: 12.0,
            min_samples: 12,
            floor: 1e-13,
        }
    }
}

/// Winding number of f around `contour`. f returns (value, scale).
///
/// Fails when the contour passes within 1e-6 of a branch point, when |f|
/// drops below the floor, or when phase steps stay ambiguous after refinement.
pub fn winding_number<F>(f: &F, contour: &Contour, omega: f64, opts: &WindingOptions) -> Result<i64>
where
    F: Fn(Complex64) -> Result<(Complex64, f64)>,
{
    let (clear, bp) = contour.branch_clearance(omega);
    if clear < PROXIMITY {
        return Err(FloquetError::ContourTooClose { point: bp, distance: clear });
    }
    let eval = |z: Complex64| -> Result<Complex64> {
        let (v, scale) = f(z)?;
        if !v.is_finite() || v.norm() <= opts.floor * scale {
            return Err(FloquetError::ContourTooClose { point: z, distance: 0.0 });
        }
        Ok(v)
    };
    let mut total = 0.0;
    for seg in contour.segments() {
        let m = ((seg.length() * opts.density).ceil() as usize).max(opts.min_samples);
        let mut prev_s = 0.0;
        let mut prev_v = eval(seg.at(0.0))?;
        for k in 1..=m {
            let s = k as f64 / m as f64;
            let v = eval(seg.at(s))?;
            total += track(&eval, &seg, prev_s, prev_v, s, v, 0)?;
            prev_s = s;
            prev_v = v;
        }
    }
    let w = total / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.01 {
        return Err(FloquetError::PhaseAmbiguity(contour_start(contour)));
    }
    Ok(n as i64)
}

fn contour_start(c: &Contour) -> Complex64 {
    match c {
        Contour::Polygon(v) => v[0],
        Contour::Circle { centre, radius } => centre + radius,
    }
}

fn track<E>(eval: &E, seg: &Segment, s0: f64, v0: Complex64, s1: f64, v1: Complex64, depth: u32) -> Result<f64>
where
    E: Fn(Complex64) -> Result<Complex64>,
{
    let d = (v1 / v0).arg();
    if d.abs() < PI / 2.0 {
        return Ok(d);
    }
    if depth >= MAX_DEPTH {
        return Err(FloquetError::PhaseAmbiguity(seg.at(s0)));
    }
    let sm = 0.5 * (s0 + s1);
    let vm = eval(seg.at(sm))?;
    Ok(track(eval, seg, s0, v0, sm, vm, depth + 1)? + track(eval, seg, sm, vm, s1, v1, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn counts_polynomial_zeros() {
        let f = |z: Complex64| Ok(((z - c(0.2, 0.1)) * (z - c(-0.5, 0.3)) * (z - c(3.0, 0.0)), 1.0));
        let r = Region::rect(-1.0, 1.0, -0.5, 0.5);
        assert_eq!(winding_number(&f, &Contour::of_region(&r), 100.0, &WindingOptions::default()).unwrap(), 2);
        let circ = Contour::Circle { centre: c(3.0, 0.0), radius: 0.1 };
        assert_eq!(winding_number(&f, &circ, 100.0, &WindingOptions::default()).unwrap(), 1);
        let p = |z: Complex64| Ok((1.0 / (z - c(0.0, 0.2)), 1.0));
        assert_eq!(winding_number(&p, &Contour::of_region(&r), 100.0, &WindingOptions::default()).unwrap(), -1);
    }

    #[test]
    fn tilted_region_orientation() {
        let f = |z: Complex64| Ok((z - c(-2.0, 0.3), 1.0));
        let r = Region {
            origin: c(0.5, -0.5),
            dir: Complex64::from_polar(1.0, PI + 0.1),
            u: (0.0, 5.0),
            v: (0.0, 1.5),
        };
        assert!(r.contains(c(-2.0, 0.3), 0.0));
        let (u, v) = r.coords(r.point(1.3, 0.7));
        assert!((u - 1.3).abs() < 1e-14 && (v - 0.7).abs() < 1e-14);
        assert_eq!(winding_number(&f, &Contour::of_region(&r), 100.0, &WindingOptions::default()).unwrap(), 1);
    }

    #[test]
    fn refuses_branch_points() {
        let f = |z: Complex64| Ok((z, 1.0));
        let r = Region::rect(-1.0, 1.0, -1.0, 0.5);
        let e = winding_number(&f, &Contour::of_region(&r), 2.0, &WindingOptions::default());
        assert!(matches!(e, Err(FloquetError::ContourTooClose { .. })));
    }
}
