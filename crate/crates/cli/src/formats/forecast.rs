//! Forecast files: one row per (node, phase, window_index).
//!
//! Metadata: `window_minutes`, `basis_days`, `power_base_va`, and `note`
//! when the forecasts rest on a single day of history. Columns: `node,
//! phase, window_index`, then the twelve forecast fields `{p,q}_{load,gen}_{min,mean,max}`
//! in pu, then the same twelve in W / var (suffix `_w` or `_var`).

use std::path::Path;

use dropf_core::uncertainty::{Band, ForecastSet, ForecastWindow};

use super::history::parse_phase;
use super::{num, Cells, Table};
use crate::error::{CliError, CliResult};

const KIND: &str = "forecast";
pub const SINGLE_DAY_NOTE: &str = "single-day basis";

const QUANTITIES: [(&str, &str); 4] = [("p_load", "w"), ("q_load", "var"), ("p_gen", "w"), ("q_gen", "var")];
const STATS: [&str; 3] = ["min", "mean", "max"];

fn columns() -> Vec<String> {
    let mut c: Vec<String> = vec!["node".into(), "phase".into(), "window_index".into()];
    for (q, _) in QUANTITIES {
        c.extend(STATS.iter().map(|s| format!("{q}_{s}_pu")));
    }
    for (q, unit) in QUANTITIES {
        c.extend(STATS.iter().map(|s| format!("{q}_{s}_{unit}")));
    }
    c
}

pub fn forecasts_to_table(f: &ForecastSet, power_base: f64) -> Table {
    let cols = columns();
    let mut t = Table { columns: cols, ..Table::default() }
        .with_meta("window_minutes", f.window_minutes)
        .with_meta("basis_days", f.basis_days)
        .with_meta("power_base_va", num(power_base));
    if f.basis_days == 1 {
        t = t.with_meta("note", SINGLE_DAY_NOTE);
    }
    for r in f.records() {
        let vals: Vec<f64> = r.bands().iter().flat_map(|b| [b.min, b.mean, b.max]).collect();
        let mut row = vec![r.node.clone(), r.phase.to_string(), r.window_index.to_string()];
        row.extend(vals.iter().map(|&x| num(x)));
        row.extend(vals.iter().map(|&x| num(x * power_base)));
        t.push(row);
    }
    t
}

/// Parses a forecast table; also returns its power base.
pub fn forecasts_from_table(t: &Table) -> CliResult<(ForecastSet, f64)> {
    let window_minutes: usize = t.require_meta("window_minutes")?;
    let basis_days: usize = t.require_meta("basis_days")?;
    let power_base: f64 = t.require_meta("power_base_va")?;
    let names = columns();
    let cols: Vec<usize> = names[..15].iter().map(|c| t.column(c)).collect::<CliResult<_>>()?;
    let mut records = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let c = Cells::new(t, r);
        let mut v = [0.0; 12];
        for (k, x) in v.iter_mut().enumerate() {
            *x = c.parse(cols[3 + k])?;
        }
        let band = |k: usize| Band { min: v[3 * k], mean: v[3 * k + 1], max: v[3 * k + 2] };
        records.push(ForecastWindow {
            node: c.str(cols[0]).to_string(),
            phase: parse_phase(&c, cols[1])?,
            window_index: c.parse(cols[2])?,
            p_load: band(0),
            q_load: band(1),
            p_gen: band(2),
            q_gen: band(3),
        });
    }
    let set = ForecastSet::from_records(window_minutes, basis_days, records)?;
    Ok((set, power_base))
}

pub fn read_forecasts(path: &Path) -> CliResult<(ForecastSet, f64)> {
    forecasts_from_table(&Table::read(KIND, path)?).map_err(|e| e.context(path.display()))
}

pub fn write_forecasts(f: &ForecastSet, power_base: f64, path: &Path) -> CliResult<()> {
    forecasts_to_table(f, power_base).write(KIND, path)
}

/// Forecasts only make sense against the power base they were written in.
pub fn check_power_base(file_base: f64, network_base: f64) -> CliResult<()> {
    if (file_base - network_base).abs() > 1e-9 * network_base {
        return Err(CliError::input(format!(
            "forecasts use a power base of {file_base} VA but the feeder uses {network_base} VA"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dropf_core::netmodel::Phase;

    fn set(basis_days: usize) -> ForecastSet {
        let rec = |w: usize| ForecastWindow {
            node: "h1".into(),
            phase: Phase::C,
            window_index: w,
            p_load: Band { min: 0.001, mean: 0.002, max: 0.0035 },
            q_load: Band::constant(0.0004),
            p_gen: Band { min: 0.0, mean: 0.01 / 3.0, max: 0.004 },
            q_gen: Band::default(),
        };
        ForecastSet::from_records(60, basis_days, (0..24).map(rec)).unwrap()
    }

    #[test]
    fn forecast_table_has_twelve_fields_per_unit_system() {
        let t = forecasts_to_table(&set(30), 1e6 / 3.0);
        assert_eq!(t.columns.len(), 3 + 24);
        assert_eq!(t.rows.len(), 24);
        assert_eq!(t.columns[4], "p_load_mean_pu");
        assert_eq!(t.columns[15], "p_load_min_w");
        assert!(t.meta("note").is_none());
    }

    #[test]
    fn forecasts_round_trip() {
        let text = forecasts_to_table(&set(1), 1e6 / 3.0).to_text(KIND);
        let (back, pb) = forecasts_from_table(&Table::from_text(KIND, &text).unwrap()).unwrap();
        assert_eq!(back, set(1));
        assert_eq!(forecasts_to_table(&back, pb).to_text(KIND), text);
        assert!(text.contains("# note=single-day basis\n"));
    }

    #[test]
    fn mismatched_base_rejected() {
        assert!(check_power_base(1e6 / 3.0, 1e6).is_err());
        assert!(check_power_base(1e6 / 3.0, 1e6 / 3.0).is_ok());
    }
}
