//! Parameter sweeps in r over a set of sheets.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{find_resonances, is_physical_sheet, refine_zero, FindOptions, Resonance};
use crate::branchcut::{ModelParams, SheetConfig};
use crate::error::{FloquetError, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub tracking: bool,
    pub find: FindOptions,
}

/// Zeros found at one r on one sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub r: f64,
    pub omega: f64,
    pub sheet_id: String,
    pub sheet: SheetConfig,
    pub resonances: Vec<Resonance>,
    pub zero_count_per_region: i64,
    /// count equals the number of refined zeros
    pub consistent: bool,
    /// emergence, lost-track and monotonicity notes
    pub events: Vec<String>,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(r: f64, params: &ModelParams, cfg: &SheetConfig, e: FloquetError) -> Self {
        SweepRecord {
            r,
            omega: params.omega,
            sheet_id: cfg.id(),
            sheet: cfg.clone(),
            resonances: Vec::new(),
            zero_count_per_region: 0,
            consistent: false,
            events: Vec::new(),
            error: Some(e.to_string()),
        }
    }
}

fn one(r: f64, base: &ModelParams, cfg: &SheetConfig, find: &FindOptions) -> SweepRecord {
    let params = base.with_r(r);
    match find_resonances(&params, cfg, find) {
        Ok(found) => SweepRecord {
            r,
            omega: params.omega,
            sheet_id: cfg.id(),
            sheet: cfg.clone(),
            zero_count_per_region: found.count,
            consistent: found.consistent,
            resonances: found.resonances,
            events: Vec::new(),
            error: None,
        },
        Err(e) => SweepRecord::failed(r, &params, cfg, e),
    }
}

fn track(r_grid: &[f64], base: &ModelParams, cfg: &SheetConfig, find: &FindOptions) -> Vec<SweepRecord> {
    let mut out: Vec<SweepRecord> = Vec::with_capacity(r_grid.len());
    let mut prev: Vec<Complex64> = Vec::new();
    let mut prev_count: Option<i64> = None;
    for &r in r_grid {
        let params = base.with_r(r);
        let mut rec = one(r, base, cfg, find);
        // seeded refinement from the previous step
        for &z0 in &prev {
            let nearest = rec
                .resonances
                .iter()
                .map(|x| x.z_star)
                .min_by(|a, b| (a - z0).norm().partial_cmp(&(b - z0).norm()).unwrap());
            match refine_zero(z0, &params, cfg) {
                Ok(seeded) => match nearest {
                    Some(z) if (z - seeded.z_star).norm() < 1e-8 * z.norm().max(1.0) => {
                        if z.im < z0.im - 1e-12 {
                            rec.events.push(format!("Im decreased at r = {r}: {z0} -> {z}"));
                        }
                    }
                    _ => rec.events.push(format!("lost track at r = {r}: seed {z0} went to {} outside the region", seeded.z_star)),
                },
                Err(e) => rec.events.push(format!("lost track at r = {r} from {z0}: {e}")),
            }
        }
        for res in &rec.resonances {
            let matched = prev.iter().any(|z0| (res.z_star - z0).norm() < 0.5 * (res.z_star.norm() + z0.norm()) + 0.05);
            if !matched && !prev.is_empty() {
                rec.events.push(format!("emerged at r = {r}: {}", res.z_star));
            }
        }
        if let Some(c) = prev_count {
            if c != rec.zero_count_per_region && rec.error.is_none() {
                rec.events.push(format!("count changed at r = {r}: {c} -> {}", rec.zero_count_per_region));
            }
        }
        if rec.error.is_none() {
            prev = rec.resonances.iter().map(|x| x.z_star).collect();
            prev_count = Some(rec.zero_count_per_region);
        }
        out.push(rec);
    }
    out
}

/// Find zeros at every (r, sheet); records come back ordered by (r, sheet_id).
pub fn sweep(r_grid: &[f64], base: &ModelParams, cfg_set: &[SheetConfig], opts: &SweepOptions) -> Result<Vec<SweepRecord>> {
    let inc = r_grid.windows(2).all(|w| w[1] >= w[0]);
    let dec = r_grid.windows(2).all(|w| w[1] <= w[0]);
    if !(inc || dec) {
        return Err(FloquetError::InvalidParameter("r grid must be monotone".into()));
    }
    if let Some(bad) = r_grid.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(FloquetError::InvalidParameter(format!("bad r value {bad}")));
    }
    let mut records: Vec<SweepRecord> = if opts.tracking {
        cfg_set.par_iter().flat_map(|cfg| track(r_grid, base, cfg, &opts.find)).collect()
    } else {
        let tasks: Vec<(f64, &SheetConfig)> = r_grid.iter().flat_map(|&r| cfg_set.iter().map(move |c| (r, c))).collect();
        tasks.par_iter().map(|(r, cfg)| one(*r, base, cfg, &opts.find)).collect()
    };
    let pos = |r: f64| r_grid.iter().position(|x| *x == r).unwrap_or(0);
    records.sort_by(|a, b| pos(a.r).cmp(&pos(b.r)).then_with(|| a.sheet_id.cmp(&b.sheet_id)));
    Ok(records)
}

/// Default sheet set: usual plus single flips on n = -2..=2.
pub fn default_sheet_set() -> Vec<SheetConfig> {
    let usual = SheetConfig::usual();
    std::iter::once(usual.clone()).chain((-2..=2).map(|n| usual.with_flip(n))).collect()
}

/// r values where the physical sheet gains or loses zeros; `true` means visible from there on.
pub fn visibility_transitions(records: &[SweepRecord]) -> Vec<(f64, bool)> {
    let mut state: Option<bool> = None;
    let mut out = Vec::new();
    for rec in records.iter().filter(|r| is_physical_sheet(&r.sheet) && r.error.is_none()) {
        let vis = !rec.resonances.is_empty();
        if let Some(s) = state {
            if s != vis {
                out.push((rec.r, vis));
            }
        }
        state = Some(vis);
    }
    out
}
