//! Analytic capacity-versus-distance tables.

use std::io::Write;

use qsdc_core::channel::ChannelParams;
use qsdc_core::security::{secrecy_capacity, CapacityInputs, CapacityMode, CapacityReport};

use crate::{fmt_float, CliError};

/// Error rates assumed at every distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DberAssumption {
    pub e: f64,
    pub eps_x: f64,
    pub eps_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRow {
    pub length_km: f64,
    pub report: CapacityReport,
}

pub const TABLE_HEADER: [&str; 10] = ["length_km", "q_bob", "q_eve", "e", "eps_x", "eps_z", "c_m", "c_w", "c_s", "mode"];

/// Evaluates the secrecy capacity at each length. With `incum`, Eve's
/// reception rate equals Bob's; otherwise it follows the channel's gain model.
pub fn capacity_table(
    lengths: &[f64],
    channel: &ChannelParams,
    dber: DberAssumption,
    mode: CapacityMode,
    incum: bool,
) -> Result<Vec<CapacityRow>, CliError> {
    lengths
        .iter()
        .map(|&length_km| {
            let ch = channel.with_length(length_km);
            ch.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let q_bob = ch.reception_rate();
            let q_eve = if incum {
                q_bob
            } else {
                ch.eve_reception_rate_for(q_bob).map_err(|e| CliError::Config(e.to_string()))?
            };
            let inputs = CapacityInputs {
                q_bob,
                q_eve,
                e: dber.e,
                eps_x: dber.eps_x,
                eps_z: dber.eps_z,
            };
            let report = secrecy_capacity(inputs, mode).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(CapacityRow { length_km, report })
        })
        .collect()
}

pub fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![start];
    }
    let step = (stop - start) / (steps - 1) as f64;
    (0..steps).map(|i| start + step * i as f64).collect()
}

/// First distance at which C_S drops from positive to non-positive,
/// linearly interpolated between rows. `None` if it never does.
pub fn zero_crossing_km(rows: &[CapacityRow]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.report.c_s > 0.0 && b.report.c_s <= 0.0).then(|| {
            let t = a.report.c_s / (a.report.c_s - b.report.c_s);
            a.length_km + t * (b.length_km - a.length_km)
        })
    })
}

pub fn write_table_csv<W: Write>(rows: &[CapacityRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for row in rows {
        let r = &row.report;
        let mut fields: Vec<String> = [row.length_km, r.q_bob, r.q_eve, r.e, r.eps_x, r.eps_z, r.c_m, r.c_w, r.c_s]
            .into_iter()
            .map(fmt_float)
            .collect();
        fields.push(r.mode.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
