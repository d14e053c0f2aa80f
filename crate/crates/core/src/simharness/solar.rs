//! Clear-sky rooftop solar with a per-window availability multiplier.

use super::SimError;

pub const SUNRISE_HOUR: f64 = 6.0;
pub const SUNSET_HOUR: f64 = 20.0;

/// Normalized clear-sky output: a smooth bell between sunrise and sunset.
pub fn clear_sky_shape(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    if h <= SUNRISE_HOUR || h >= SUNSET_HOUR {
        return 0.0;
    }
    let x = std::f64::consts::PI * (h - SUNRISE_HOUR) / (SUNSET_HOUR - SUNRISE_HOUR);
    x.sin().powf(1.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolarProfile {
    /// Panel output under the full shape (pu).
    pub peak_power: f64,
    /// Per-minute scale factors over one day.
    pub shape: Vec<f64>,
    /// Range the per-window multiplier is drawn from.
    pub multiplier_bounds: (f64, f64),
}

impl SolarProfile {
    pub fn clear_sky(peak_power: f64, multiplier_bounds: (f64, f64)) -> Result<SolarProfile, SimError> {
        let (lo, hi) = multiplier_bounds;
        if !(peak_power >= 0.0) || !(0.0 <= lo && lo <= hi) {
            return Err(SimError::Device(format!("invalid solar profile: peak {peak_power}, multiplier [{lo}, {hi}]")));
        }
        let shape = (0..1440).map(|m| clear_sky_shape(m as f64 / 60.0)).collect();
        Ok(SolarProfile { peak_power, shape, multiplier_bounds })
    }

    /// Available output at `minute` (wrapping daily) under `multiplier`.
    pub fn output(&self, minute: usize, multiplier: f64) -> f64 {
        (self.peak_power * self.shape[minute % self.shape.len()] * multiplier).max(0.0)
    }
}
