//! Meter history: one row per (node, phase, sample), the series of each
//! node-phase contiguous and starting at midnight.
//!
//! Metadata: `power_base_va`, `sample_minutes`. Columns: `node, phase,
//! minute`, load and available generation in pu, and the same in W / var.

use std::collections::BTreeMap;
use std::path::Path;

use dropf_core::netmodel::Phase;
use dropf_core::uncertainty::HistorySeries;

use super::{num, Cells, Table};
use crate::error::{CliError, CliResult};

const KIND: &str = "history";
const COLUMNS: [&str; 11] = [
    "node", "phase", "minute", "p_load_pu", "q_load_pu", "p_gen_pu", "q_gen_pu", "p_load_w", "q_load_var", "p_gen_w", "q_gen_var",
];

pub fn history_to_table(series: &[HistorySeries], power_base: f64) -> CliResult<Table> {
    let sample = series.first().map(|s| s.sample_minutes).unwrap_or(1);
    if series.iter().any(|s| s.sample_minutes != sample) {
        return Err(CliError::input("all history series must share one sample period"));
    }
    let mut t = Table::new(&COLUMNS).with_meta("power_base_va", num(power_base)).with_meta("sample_minutes", sample);
    for s in series {
        for i in 0..s.p_load.len() {
            let pu = [s.p_load[i], s.q_load[i], s.p_gen[i], s.q_gen[i]];
            let mut row = vec![s.node.clone(), s.phase.to_string(), (i * sample).to_string()];
            row.extend(pu.iter().map(|&x| num(x)));
            row.extend(pu.iter().map(|&x| num(x * power_base)));
            t.push(row);
        }
    }
    Ok(t)
}

/// Parses a history table; also returns its power base.
pub fn history_from_table(t: &Table) -> CliResult<(Vec<HistorySeries>, f64)> {
    let power_base: f64 = t.require_meta("power_base_va")?;
    let sample: usize = t.require_meta("sample_minutes")?;
    if sample == 0 {
        return Err(CliError::input("sample_minutes must be positive"));
    }
    let cols: Vec<usize> = COLUMNS[..7].iter().map(|c| t.column(c)).collect::<CliResult<_>>()?;
    let mut order: Vec<(String, Phase)> = Vec::new();
    let mut by_key: BTreeMap<(String, Phase), HistorySeries> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let c = Cells::new(t, r);
        let node = c.str(cols[0]).to_string();
        let phase = parse_phase(&c, cols[1])?;
        let minute: usize = c.parse(cols[2])?;
        let key = (node.clone(), phase);
        let s = by_key.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            HistorySeries { node, phase, sample_minutes: sample, p_load: vec![], q_load: vec![], p_gen: vec![], q_gen: vec![] }
        });
        if minute != s.p_load.len() * sample {
            return Err(CliError::input(format!(
                "line {}: expected minute {} for {}.{}, found {minute}",
                c.line(),
                s.p_load.len() * sample,
                s.node,
                s.phase
            )));
        }
        s.p_load.push(c.parse(cols[3])?);
        s.q_load.push(c.parse(cols[4])?);
        s.p_gen.push(c.parse(cols[5])?);
        s.q_gen.push(c.parse(cols[6])?);
    }
    let series = order.into_iter().map(|k| by_key.remove(&k).unwrap()).collect();
    Ok((series, power_base))
}

pub(super) fn parse_phase(c: &Cells, col: usize) -> CliResult<Phase> {
    let raw = c.str(col);
    let mut chars = raw.chars();
    match (chars.next().and_then(Phase::from_char), chars.next()) {
        (Some(p), None) => Ok(p),
        _ => Err(CliError::input(format!("line {}: invalid phase '{raw}'", c.line()))),
    }
}

pub fn read_history(path: &Path) -> CliResult<(Vec<HistorySeries>, f64)> {
    history_from_table(&Table::read(KIND, path)?).map_err(|e| e.context(path.display()))
}

pub fn write_history(series: &[HistorySeries], power_base: f64, path: &Path) -> CliResult<()> {
    history_to_table(series, power_base)?.write(KIND, path)
}
