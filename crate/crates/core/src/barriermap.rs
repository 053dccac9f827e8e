//! Maps the barrier problem onto the well recurrence.
//!
//! Barrier and well differ in the sign of every sqrt. Flipping all sheet
//! selectors turns the barrier recurrence into the well one; the accompanying
//! r -> -r is the gauge y_n -> (-1)^n y_n, under which the source on odd
//! modes changes sign. The source itself always uses the physical root.

use serde::{Deserialize, Serialize};

use crate::branchcut::{ModelParams, PotentialKind, SheetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialTransform {
    /// sqrt(p) -> -sqrt(p) on every mode.
    pub sheet_flip: bool,
    /// Factor applied to r.
    pub r_sign: i8,
    /// Factor applied to the source (and solution) on odd modes.
    pub f_sign: i8,
}

impl PotentialTransform {
    pub const IDENTITY: PotentialTransform = PotentialTransform {
        sheet_flip: false,
        r_sign: 1,
        f_sign: 1,
    };

    pub const BARRIER: PotentialTransform = PotentialTransform {
        sheet_flip: true,
        r_sign: -1,
        f_sign: -1,
    };

    /// Sign relating the frame root to the physical root.
    pub fn root_sign(&self) -> f64 {
        if self.sheet_flip {
            -1.0
        } else {
            1.0
        }
    }

    /// Gauge factor of mode n.
    pub fn mode_sign(&self, n: i64) -> f64 {
        if self.f_sign < 0 && n.rem_euclid(2) == 1 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// A problem expressed in well form.
#[derive(Debug, Clone, PartialEq)]
pub struct WellFrame {
    pub params: ModelParams,
    pub sheet: SheetConfig,
    pub transform: PotentialTransform,
}

/// Express (params, cfg) as a well problem. Identity for the well.
pub fn to_well_frame(params: &ModelParams, cfg: &SheetConfig) -> WellFrame {
    match params.potential {
        PotentialKind::Well => WellFrame {
            params: *params,
            sheet: cfg.clone(),
            transform: PotentialTransform::IDENTITY,
        },
        PotentialKind::Barrier => WellFrame {
            params: ModelParams {
                omega: params.omega,
                r: -params.r,
                potential: PotentialKind::Well,
            },
            sheet: cfg.all_flipped(),
            transform: PotentialTransform::BARRIER,
        },
    }
}

/// Inverse of [`to_well_frame`]: recover the physical problem from a frame.
pub fn from_well_frame(frame: &WellFrame) -> (ModelParams, SheetConfig) {
    if frame.transform.is_identity() {
        (frame.params, frame.sheet.clone())
    } else {
        (
            ModelParams {
                omega: frame.params.omega,
                r: -frame.params.r,
                potential: PotentialKind::Barrier,
            },
            frame.sheet.all_flipped(),
        )
    }
}

/// Apply the transform to a frame once more (the map is an involution).
pub fn apply_again(frame: &WellFrame) -> WellFrame {
    if frame.transform.is_identity() {
        return frame.clone();
    }
    let (params, sheet) = from_well_frame(frame);
    WellFrame {
        params,
        sheet,
        transform: PotentialTransform::IDENTITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branchcut::Sheet;

    #[test]
    fn barrier_maps_to_negative_r_and_flipped_sheet() {
        let p = ModelParams::barrier(2.0, 0.3).unwrap();
        let f = to_well_frame(&p, &SheetConfig::usual());
        assert_eq!(f.params.r, -0.3);
        assert_eq!(f.params.potential, PotentialKind::Well);
        assert_eq!(f.sheet.default_sheet(), Sheet::Second);
        assert_eq!(f.transform.root_sign(), -1.0);
    }

    #[test]
    fn involution() {
        let p = ModelParams::barrier(1.3, 0.7).unwrap();
        let cfg = SheetConfig::usual().with_flip(-1);
        let f = to_well_frame(&p, &cfg);
        let back = apply_again(&f);
        assert_eq!(back.params, p);
        assert_eq!(back.sheet, cfg);
        assert_eq!(from_well_frame(&f), (p, cfg.clone()));
        let w = ModelParams::well(1.3, 0.7).unwrap();
        assert_eq!(to_well_frame(&w, &cfg).params, w);
    }
}
