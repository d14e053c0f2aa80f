//! Household appliance models: two-state thermostatic devices, a base
//! end-use profile and scheduled pool-pump blocks.

use super::SimError;
use crate::netmodel::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermostatMode {
    Cooling,
    Heating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchState {
    On,
    Off,
}

/// First-order thermal mass driven toward the ambient temperature, pushed
/// by `gain` °C when the device runs, with deadband hysteresis.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermostaticDevice {
    /// Electrical demand while running (pu).
    pub rated_power: f64,
    pub power_factor: f64,
    pub mode: ThermostatMode,
    /// Full width of the hysteresis band (°C).
    pub deadband: f64,
    pub setpoint: f64,
    pub thermal_resistance: f64,
    pub thermal_capacitance: f64,
    /// Equilibrium offset from ambient while running (°C).
    pub gain: f64,
    pub state: SwitchState,
    pub internal_temp: f64,
}

impl ThermostaticDevice {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Device(m.to_string()));
        if !(self.deadband > 0.0) {
            return bad("thermostat deadband must be positive");
        }
        if !(self.thermal_resistance > 0.0 && self.thermal_capacitance > 0.0) {
            return bad("thermal resistance and capacitance must be positive");
        }
        if !(self.gain > 0.0) || !(self.rated_power >= 0.0) {
            return bad("gain must be positive and rated power nonnegative");
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return bad("power factor must lie in (0, 1]");
        }
        Ok(())
    }

    /// Thermal time constant `R·C` (minutes).
    pub fn time_constant(&self) -> f64 {
        self.thermal_resistance * self.thermal_capacitance
    }

    /// Temperatures at which the device switches on and off.
    pub fn thresholds(&self) -> (f64, f64) {
        let half = 0.5 * self.deadband;
        match self.mode {
            ThermostatMode::Cooling => (self.setpoint + half, self.setpoint - half),
            ThermostatMode::Heating => (self.setpoint - half, self.setpoint + half),
        }
    }

    fn equilibrium(&self, ambient: f64) -> f64 {
        match (self.state, self.mode) {
            (SwitchState::Off, _) => ambient,
            (SwitchState::On, ThermostatMode::Cooling) => ambient - self.gain,
            (SwitchState::On, ThermostatMode::Heating) => ambient + self.gain,
        }
    }

    /// Advances `dt` minutes and returns the real power drawn over the step.
    /// The temperature follows the exact exponential response for the
    /// state held during the step; switching happens at the end.
    pub fn step(&mut self, ambient: f64, dt: f64) -> f64 {
        assert!(dt > 0.0 && dt <= 1.0, "device step must be at most one minute");
        let drawn = if self.state == SwitchState::On { self.rated_power } else { 0.0 };
        let eq = self.equilibrium(ambient);
        self.internal_temp = eq + (self.internal_temp - eq) * (-dt / self.time_constant()).exp();
        let (on_at, off_at) = self.thresholds();
        let rising = self.mode == ThermostatMode::Cooling;
        self.state = match self.state {
            SwitchState::Off if (rising && self.internal_temp >= on_at) || (!rising && self.internal_temp <= on_at) => SwitchState::On,
            SwitchState::On if (rising && self.internal_temp <= off_at) || (!rising && self.internal_temp >= off_at) => SwitchState::Off,
            s => s,
        };
        drawn
    }
}

/// Complex demand from real power at a lagging power factor.
pub fn with_power_factor(p: f64, pf: f64) -> C64 {
    C64::new(p, p * (1.0 / (pf * pf) - 1.0).max(0.0).sqrt())
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    let d = (hour - center) / width;
    (-0.5 * d * d).exp()
}

/// Lighting and appliance demand: a night floor with morning and evening peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseProfile {
    /// Demand scale (pu).
    pub scale: f64,
    pub power_factor: f64,
    pub morning_peak: f64,
    pub evening_peak: f64,
}

impl BaseProfile {
    pub fn shape(&self, hour: f64) -> f64 {
        let h = hour.rem_euclid(24.0);
        0.45 + self.morning_peak * bump(h, 7.5, 1.2) + self.evening_peak * (bump(h, 19.5, 2.0) + bump(h + 24.0, 19.5, 2.0))
    }

    pub fn demand(&self, hour: f64) -> f64 {
        self.scale * self.shape(hour)
    }
}

/// A constant-power block that runs once a day.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolPump {
    pub rated_power: f64,
    pub power_factor: f64,
    /// Nominal start (minutes after midnight) and run length (minutes).
    pub start: usize,
    pub duration: usize,
}

impl PoolPump {
    pub fn is_running(&self, minute_of_day: usize, start_shift: i64) -> bool {
        let start = (self.start as i64 + start_shift).rem_euclid(1440) as usize;
        (minute_of_day + 1440 - start) % 1440 < self.duration
    }
}
