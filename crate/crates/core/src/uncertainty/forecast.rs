use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::UncertaintyError;
use crate::netmodel::{NetworkModel, Phase, C64};

pub const MINUTES_PER_DAY: usize = 1440;

/// Minimum, mean and maximum of one forecast quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Band {
    pub fn constant(v: f64) -> Band {
        Band { min: v, mean: v, max: v }
    }

    pub fn is_ordered(&self) -> bool {
        self.min <= self.mean && self.mean <= self.max
    }

    /// Restores `min ≤ mean ≤ max`.
    pub fn clamped(&self) -> Band {
        let lo = self.min.min(self.max);
        let hi = self.min.max(self.max);
        Band { min: lo, mean: self.mean.clamp(lo, hi), max: hi }
    }

    fn of(samples: &[f64]) -> Band {
        let mut b = Band { min: f64::INFINITY, mean: 0.0, max: f64::NEG_INFINITY };
        for &s in samples {
            b.min = b.min.min(s);
            b.max = b.max.max(s);
            b.mean += s;
        }
        // the mean of identical samples is that sample exactly
        b.mean = if b.min == b.max { b.min } else { (b.mean / samples.len() as f64).clamp(b.min, b.max) };
        b
    }
}

/// Load and available-generation forecast of one node-phase over one window (pu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastWindow {
    pub node: String,
    pub phase: Phase,
    pub window_index: usize,
    pub p_load: Band,
    pub q_load: Band,
    pub p_gen: Band,
    pub q_gen: Band,
}

impl ForecastWindow {
    pub fn bands(&self) -> [Band; 4] {
        [self.p_load, self.q_load, self.p_gen, self.q_gen]
    }

    pub fn is_ordered(&self) -> bool {
        self.bands().iter().all(Band::is_ordered)
    }

    pub fn clamped(&self) -> ForecastWindow {
        ForecastWindow {
            p_load: self.p_load.clamped(),
            q_load: self.q_load.clamped(),
            p_gen: self.p_gen.clamped(),
            q_gen: self.q_gen.clamped(),
            ..self.clone()
        }
    }
}

/// All forecasts of a day, keyed by window then node-phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub window_minutes: usize,
    /// Number of whole days of history the forecasts were built from.
    pub basis_days: usize,
    windows: Vec<BTreeMap<(String, Phase), ForecastWindow>>,
}

impl ForecastSet {
    /// Collects records, clamping any with misordered bands.
    pub fn from_records(
        window_minutes: usize,
        basis_days: usize,
        records: impl IntoIterator<Item = ForecastWindow>,
    ) -> Result<ForecastSet, UncertaintyError> {
        check_window(window_minutes)?;
        let n = MINUTES_PER_DAY / window_minutes;
        let mut windows = vec![BTreeMap::new(); n];
        for r in records {
            if r.window_index >= n {
                return Err(UncertaintyError::BadWindow(format!("window index {} outside 0..{n}", r.window_index)));
            }
            let r = if r.is_ordered() {
                r
            } else {
                log::warn!("clamping misordered forecast for {}.{} window {}", r.node, r.phase, r.window_index);
                r.clamped()
            };
            windows[r.window_index].insert((r.node.clone(), r.phase), r);
        }
        Ok(ForecastSet { window_minutes, basis_days, windows })
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn get(&self, window: usize, node: &str, phase: Phase) -> Option<&ForecastWindow> {
        self.windows.get(window)?.get(&(node.to_string(), phase))
    }

    pub fn window(&self, window: usize) -> impl Iterator<Item = &ForecastWindow> {
        self.windows[window].values()
    }

    pub fn records(&self) -> impl Iterator<Item = &ForecastWindow> {
        self.windows.iter().flat_map(|w| w.values())
    }

    /// Forecast of every network bus for one window (`None` where absent).
    pub fn for_buses<'a>(&'a self, net: &NetworkModel, window: usize) -> Vec<Option<&'a ForecastWindow>> {
        let w = &self.windows[window % self.windows.len()];
        net.buses()
            .iter()
            .map(|b| w.get(&(net.nodes()[b.node].id.clone(), b.phase)))
            .collect()
    }

    /// Every record replaced by its mean, so that min = mean = max.
    pub fn without_spread(&self) -> ForecastSet {
        let flat = |b: Band| Band::constant(b.mean);
        let windows = self
            .windows
            .iter()
            .map(|w| {
                w.iter()
                    .map(|(k, r)| {
                        let r = ForecastWindow { p_load: flat(r.p_load), q_load: flat(r.q_load), p_gen: flat(r.p_gen), q_gen: flat(r.q_gen), ..r.clone() };
                        (k.clone(), r)
                    })
                    .collect()
            })
            .collect();
        ForecastSet { windows, ..self.clone() }
    }
}

/// Minute-sampled history of one node-phase: load and available generation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySeries {
    pub node: String,
    pub phase: Phase,
    /// Sample period (minutes); samples start at midnight.
    pub sample_minutes: usize,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
}

fn check_window(window_minutes: usize) -> Result<(), UncertaintyError> {
    if window_minutes == 0 || MINUTES_PER_DAY % window_minutes != 0 {
        return Err(UncertaintyError::BadWindow(format!("window of {window_minutes} min does not divide a day")));
    }
    Ok(())
}

/// Clock-aligned min/mean/max across every day of history for each window slot.
/// Non-finite samples are treated as missing.
pub fn build_forecasts(history: &[HistorySeries], window_minutes: usize) -> Result<ForecastSet, UncertaintyError> {
    check_window(window_minutes)?;
    if history.is_empty() {
        return Err(UncertaintyError::EmptyHistory);
    }
    let n_win = MINUTES_PER_DAY / window_minutes;
    let mut basis_days = usize::MAX;
    let mut records = Vec::new();
    for h in history {
        let dt = h.sample_minutes;
        if dt == 0 || window_minutes % dt != 0 {
            return Err(UncertaintyError::BadWindow(format!(
                "sample period {dt} min does not divide the {window_minutes}-min window"
            )));
        }
        let len = h.p_load.len();
        if [h.q_load.len(), h.p_gen.len(), h.q_gen.len()].iter().any(|&l| l != len) {
            return Err(UncertaintyError::BadHistory(format!("{}.{} has series of different lengths", h.node, h.phase)));
        }
        let days = len * dt / MINUTES_PER_DAY;
        if days == 0 {
            return Err(UncertaintyError::ShortHistory(format!("{}.{} covers less than one day", h.node, h.phase)));
        }
        basis_days = basis_days.min(days);
        let mut slots: Vec<[Vec<f64>; 4]> = vec![Default::default(); n_win];
        for t in 0..len {
            let w = (t * dt % MINUTES_PER_DAY) / window_minutes;
            let vals = [h.p_load[t], h.q_load[t], h.p_gen[t], h.q_gen[t]];
            if vals.iter().all(|v| v.is_finite()) {
                for (k, v) in vals.into_iter().enumerate() {
                    slots[w][k].push(v);
                }
            }
        }
        let missing: Vec<usize> = (0..n_win).filter(|&w| slots[w][0].is_empty()).collect();
        if !missing.is_empty() {
            return Err(UncertaintyError::MissingWindows { series: format!("{}.{}", h.node, h.phase), windows: missing });
        }
        for (w, s) in slots.iter().enumerate() {
            records.push(ForecastWindow {
                node: h.node.clone(),
                phase: h.phase,
                window_index: w,
                p_load: Band::of(&s[0]),
                q_load: Band::of(&s[1]),
                p_gen: Band::of(&s[2]),
                q_gen: Band::of(&s[3]),
            });
        }
    }
    ForecastSet::from_records(window_minutes, basis_days, records)
}

/// Injection at the linearization point: loads at their mean forecast and
/// generation at its mean available real power with zero reactive power.
pub fn linearization_injection(net: &NetworkModel, forecasts: &ForecastSet, window: usize) -> Vec<C64> {
    forecasts
        .for_buses(net, window)
        .iter()
        .map(|f| match f {
            Some(f) => C64::new(f.p_gen.mean - f.p_load.mean, -f.q_load.mean),
            None => C64::new(0.0, 0.0),
        })
        .collect()
}
