//! Xu-Randall diagnostic cloud fraction.
//!
//! `C = RH^p · [1 − exp(−α₀ q_l / ((1 − RH) q_sat)^γ)]`, with relative
//! humidity `RH = q_v / q_sat` clamped to `[0, 1]` and condensate
//! `q_l = q_c + q_i`. Saturation uses the Magnus form over liquid water.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XuRandallConstants {
    pub p: f64,
    pub alpha0: f64,
    pub gamma: f64,
}

impl Default for XuRandallConstants {
    fn default() -> Self {
        Self {
            p: 0.25,
            alpha0: 100.0,
            gamma: 0.49,
        }
    }
}

impl XuRandallConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.p) && ok(self.alpha0) && ok(self.gamma) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "Xu-Randall constants must be positive: {self:?}"
            )))
        }
    }
}

/// Saturation vapour pressure over water in Pa, temperature in K.
pub fn saturation_vapor_pressure(t: f64) -> f64 {
    610.94 * (17.625 * (t - 273.15) / (t - 30.11)).exp()
}

/// Saturation specific humidity in kg/kg.
pub fn saturation_specific_humidity(t: f64, p: f64) -> Result<f64> {
    let es = saturation_vapor_pressure(t);
    let denom = p - 0.378 * es;
    if denom <= 0.0 {
        return Err(Error::validation(
            None,
            format!("saturation humidity undefined at T={t} K, p={p} Pa"),
        ));
    }
    Ok(0.622 * es / denom)
}

pub fn xu_randall_cloud_cover(
    q_v: f64,
    q_c: f64,
    q_i: f64,
    t: f64,
    p: f64,
    constants: &XuRandallConstants,
) -> Result<f64> {
    if !(t > 150.0 && t < 350.0) {
        return Err(Error::validation(None, format!("temperature {t} K outside (150, 350)")));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::validation(None, format!("pressure must be positive, got {p}")));
    }
    for (name, v) in [("q_v", q_v), ("q_c", q_c), ("q_i", q_i)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::validation(
                None,
                format!("{name} must be a non-negative number, got {v}"),
            ));
        }
    }
    let q_sat = saturation_specific_humidity(t, p)?;
    let rh = (q_v / q_sat).clamp(0.0, 1.0);
    let q_l = q_c + q_i;
    if q_l == 0.0 {
        return Ok(0.0);
    }
    let humidity_factor = rh.powf(constants.p);
    let deficit = (1.0 - rh) * q_sat;
    let condensate_factor = if deficit <= 0.0 {
        1.0
    } else {
        1.0 - (-constants.alpha0 * q_l / deficit.powf(constants.gamma)).exp()
    };
    Ok((humidity_factor * condensate_factor).clamp(0.0, 1.0))
}

/// Xu-Randall bound to named columns of a feature vector, so it can be
/// evaluated on the same raw rows as the learned models.
#[derive(Debug, Clone, PartialEq)]
pub struct XuRandallModel {
    pub constants: XuRandallConstants,
    n_features: usize,
    idx: [usize; 5],
}

impl XuRandallModel {
    /// Needs the columns `qv, qc, qi, ta, pa` among `feature_names`.
    pub fn new(feature_names: &[String], constants: XuRandallConstants) -> Result<Self> {
        constants.validate()?;
        let mut idx = [0; 5];
        for (slot, name) in idx.iter_mut().zip(["qv", "qc", "qi", "ta", "pa"]) {
            *slot = feature_names
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::Schema(format!("Xu-Randall needs column '{name}'")))?;
        }
        Ok(Self {
            constants,
            n_features: feature_names.len(),
            idx,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        crate::error::check_len("Xu-Randall input", self.n_features, row.len())?;
        let [qv, qc, qi, ta, pa] = self.idx.map(|i| row[i]);
        xu_randall_cloud_cover(qv, qc, qi, ta, pa, &self.constants)
    }
}
