//! Crank–Nicolson for i psi_t = -psi_xx -+ 2 delta(x) (1 + 2 r cos(omega t)) psi
//! on [-L, L], the delta sitting on the node x = 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::branchcut::ModelParams;
use crate::error::{FloquetError, Result};
use crate::forcing::InitialWavefunction;
use crate::tridiag::ThomasFactor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// psi = 0 at x = +-L.
    Reflecting,
    /// -i V with V = strength ((|x| - (L - width)) / width)^2 in the outer layer.
    Absorbing { width: f64, strength: f64 },
}

impl Boundary {
    /// Quadratic ramp over the outer 0.2 L.
    pub fn default_absorbing(l: f64) -> Self {
        Boundary::Absorbing { width: 0.2 * l, strength: 5.0 }
    }
}

/// psi on the nodes x_j = j dx, |j| <= J, with L = J dx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub l: f64,
    pub dx: f64,
    pub dt: f64,
    pub psi: Vec<Complex64>,
    pub t: f64,
    pub boundary: Boundary,
}

impl GridState {
    pub fn new(l: f64, dx: f64, dt: f64, boundary: Boundary) -> Result<Self> {
        if !(l > 0.0 && dx > 0.0 && dt > 0.0) {
            return Err(FloquetError::InvalidParameter(format!("bad grid L = {l}, dx = {dx}, dt = {dt}")));
        }
        let j = (l / dx).round();
        if (j * dx - l).abs() > 1e-9 * l || j < 4.0 {
            return Err(FloquetError::InvalidParameter(format!("L = {l} is not a multiple of dx = {dx}")));
        }
        if dt > dx * dx * (1.0 + 1e-12) {
            return Err(FloquetError::Unstable(format!("dt = {dt} exceeds dx^2 = {}", dx * dx)));
        }
        if let Boundary::Absorbing { width, strength } = boundary {
            if !(width > 0.0 && width < l && strength >= 0.0) {
                return Err(FloquetError::InvalidParameter(format!("bad absorbing layer {width}, {strength}")));
            }
        }
        Ok(GridState {
            l,
            dx,
            dt,
            psi: vec![Complex64::new(0.0, 0.0); 2 * j as usize + 1],
            t: 0.0,
            boundary,
        })
    }

    /// Default acceptance grid: L = 40, dx = 0.02, dt = 2e-4, absorbing layer.
    pub fn standard() -> Self {
        Self::new(40.0, 0.02, 2e-4, Boundary::default_absorbing(40.0)).expect("valid default grid")
    }

    pub fn half_nodes(&self) -> usize {
        (self.psi.len() - 1) / 2
    }

    pub fn x(&self, idx: usize) -> f64 {
        (idx as f64 - self.half_nodes() as f64) * self.dx
    }

    /// Sample `f`; the end nodes are pinned to zero.
    pub fn with_fn(mut self, f: impl Fn(f64) -> Complex64) -> Self {
        let last = self.psi.len() - 1;
        for i in 0..=last {
            self.psi[i] = if i == 0 || i == last { Complex64::new(0.0, 0.0) } else { f(self.x(i)) };
        }
        self.t = 0.0;
        self
    }

    pub fn with_initial(self, psi0: &InitialWavefunction) -> Result<Self> {
        if psi0.support >= self.absorber_start() {
            return Err(FloquetError::InvalidParameter(format!(
                "support {} reaches the boundary region at {}",
                psi0.support,
                self.absorber_start()
            )));
        }
        Ok(self.with_fn(|x| psi0.eval(x)))
    }

    fn absorber_start(&self) -> f64 {
        match self.boundary {
            Boundary::Reflecting => self.l,
            Boundary::Absorbing { width, .. } => self.l - width,
        }
    }

    pub fn origin(&self) -> Complex64 {
        self.psi[self.half_nodes()]
    }

    pub fn mass(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    /// sum over |x_j| <= a of |psi_j|^2 dx.
    pub fn mass_within(&self, a: f64) -> f64 {
        let k = ((a / self.dx) + 1e-9).floor() as usize;
        let c = self.half_nodes();
        let k = k.min(c);
        self.psi[c - k..=c + k].iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    /// Mass in the outer tenth of the absorber-free box.
    pub fn edge_probe(&self) -> f64 {
        let inner = 0.9 * self.absorber_start();
        let c = self.half_nodes() as f64;
        self.psi
            .iter()
            .enumerate()
            .filter(|(i, _)| ((*i as f64 - c) * self.dx).abs() > inner)
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * self.dx
    }
}

/// What to record while stepping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordOptions {
    /// Record every `stride` steps (and at t = 0 and the end).
    pub stride: usize,
    /// Half-width of the survival interval.
    pub window: f64,
    /// Edge probe / initial mass above which a reflecting run fails.
    pub contamination: f64,
    /// Keep every k-th node at each recorded time.
    pub snapshot_stride: Option<usize>,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions { stride: 500, window: 5.0, contamination: 1e-6, snapshot_stride: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub origin: Vec<Complex64>,
    pub survival: Vec<f64>,
    pub mass: Vec<f64>,
    pub edge_probe: Vec<f64>,
    /// Largest one-step relative change of the total mass.
    pub max_step_drift: f64,
    /// (t, [(x, psi)]) when snapshots were requested.
    pub snapshots: Vec<(f64, Vec<(f64, Complex64)>)>,
}

impl Trajectory {
    fn push(&mut self, s: &GridState, rec: &RecordOptions) {
        if let Some(k) = rec.snapshot_stride {
            let c = s.half_nodes();
            let k = k.max(1);
            let nodes = s.psi.iter().enumerate().filter(|(i, _)| i.abs_diff(c) % k == 0).map(|(i, v)| (s.x(i), *v)).collect();
            self.snapshots.push((s.t, nodes));
        }
        let window = rec.window;
        self.t.push(s.t);
        self.origin.push(s.origin());
        self.survival.push(s.mass_within(window));
        self.mass.push(s.mass());
        self.edge_probe.push(s.edge_probe());
    }
}

/// Advance `state` to time `t_end`.
pub fn evolve(state: &mut GridState, params: &ModelParams, t_end: f64, rec: &RecordOptions) -> Result<Trajectory> {
    let steps = ((t_end - state.t) / state.dt).round();
    if steps < 0.0 || !steps.is_finite() {
        return Err(FloquetError::InvalidParameter(format!("cannot evolve from {} to {t_end}", state.t)));
    }
    let steps = steps as usize;
    let n = state.psi.len() - 2;
    let dx2 = state.dx * state.dx;
    let half = Complex64::new(0.0, 0.5 * state.dt);
    let c = state.half_nodes() - 1;

    // static interior operator: -D2 - i V
    let mut h_diag = vec![Complex64::new(2.0 / dx2, 0.0); n];
    if let Boundary::Absorbing { width, strength } = state.boundary {
        for (k, h) in h_diag.iter_mut().enumerate() {
            let depth = (state.x(k + 1).abs() - (state.l - width)) / width;
            if depth > 0.0 {
                *h -= Complex64::new(0.0, strength * depth * depth);
            }
        }
    }
    let off = Complex64::new(-1.0 / dx2, 0.0);
    let a_diag: Vec<Complex64> = h_diag.iter().map(|h| 1.0 + half * h).collect();
    let a_off = vec![half * off; n - 1];
    let factor = ThomasFactor::new(&a_off, &a_diag, &a_off);
    let mut unit = vec![Complex64::new(0.0, 0.0); n];
    unit[c] = Complex64::new(1.0, 0.0);
    factor.solve_in_place(&mut unit);

    let sign = params.potential.sign();
    let mut traj = Trajectory::default();
    traj.push(state, rec);
    let mass0 = state.mass();
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let stride = rec.stride.max(1);
    let reflecting = state.boundary == Boundary::Reflecting;
    for step in 1..=steps {
        let before = if reflecting { state.mass() } else { 0.0 };
        let tm = state.t + 0.5 * state.dt;
        let g = node_coupling(params, state, tm, sign);
        let psi = &state.psi;
        for k in 0..n {
            let mut hv = h_diag[k] * psi[k + 1] + off * (psi[k] + psi[k + 2]);
            if k == c {
                hv += g * psi[k + 1];
            }
            rhs[k] = psi[k + 1] - half * hv;
        }
        solve_step(&factor, &unit, c, half * g, &mut rhs, &mut state.psi);
        state.t = tm + 0.5 * state.dt;
        if reflecting && before > 0.0 {
            let after = state.mass();
            traj.max_step_drift = traj.max_step_drift.max((after - before).abs() / before);
        }
        if step % stride == 0 || step == steps {
            traj.push(state, rec);
            if reflecting && *traj.edge_probe.last().unwrap() > rec.contamination * mass0 {
                return Err(FloquetError::Unstable(format!(
                    "wave reached the reflecting wall by t = {:.3}",
                    state.t
                )));
            }
        }
    }
    Ok(traj)
}

/// -2 sign (1 + 2 r cos(omega t)) / dx: the delta on node 0.
fn node_coupling(params: &ModelParams, state: &GridState, t: f64, sign: f64) -> f64 {
    -2.0 * sign * (1.0 + 2.0 * params.r * (params.omega * t).cos()) / state.dx
}

/// Solve (A + alpha e_c e_c^T) x = rhs by Sherman–Morrison and store x in
/// the interior of psi.
fn solve_step(factor: &ThomasFactor, unit: &[Complex64], c: usize, alpha: Complex64, rhs: &mut [Complex64], psi: &mut [Complex64]) {
    factor.solve_in_place(rhs);
    let coef = alpha * rhs[c] / (1.0 + alpha * unit[c]);
    for (k, u) in unit.iter().enumerate() {
        psi[k + 1] = rhs[k] - coef * u;
    }
}

/// Exponential fit of the survival probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// -d ln P / dt.
    pub rate: f64,
    pub r_squared: f64,
    /// false when R^2 < 0.99 (no exponential window).
    pub exponential: bool,
}

/// Fit ln P(t) = c - rate t over t in [a, b].
pub fn survival_decay(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = traj
        .t
        .iter()
        .zip(&traj.survival)
        .filter(|(t, p)| **t >= window.0 && **t <= window.1 && **p > 0.0)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(FloquetError::InvalidParameter(format!(
            "only {} samples in the window [{}, {}]",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, icpt) = crate::resonances::least_squares(&xs, &ys);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - icpt).powi(2)).sum();
    // a flat record is a perfect fit of rate zero
    let r_squared = if ss_tot <= 1e-24 * ys.len() as f64 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        exponential: r_squared >= 0.99,
    })
}
