//! Uniformly sampled closed-loop time series and its comma-separated
//! text form.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written trace reads back bit-equal.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot access trace file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub const TRACE_COLUMNS: [&str; 26] = [
    "t", "h1", "h2", "h3", "h4", "y1", "y2", "r1", "r2", "u_cmd1", "u_cmd2", "u_del1", "u_del2",
    "v_abs1", "v_abs2", "eff_true1", "eff_true2", "eff_est1", "eff_est2", "gain_epoch", "sat1",
    "sat2", "ovf1", "ovf2", "ovf3", "ovf4",
];

/// One control sample of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Tank levels at this sample, cm.
    pub levels: [f64; 4],
    /// Measured outputs, V.
    pub y: [f64; 2],
    /// Reference targets, V.
    pub r: [f64; 2],
    /// Control-law output in deviation volts, before saturation.
    pub u_commanded: [f64; 2],
    /// Effective absolute voltage reaching the pumps after saturation
    /// and actuator effectiveness, V.
    pub u_delivered: [f64; 2],
    /// Saturated absolute pump command, V.
    pub v_absolute: [f64; 2],
    pub effectiveness_true: [f64; 2],
    pub effectiveness_estimate: [f64; 2],
    /// Number of successful gain reconfigurations so far.
    pub gain_epoch: u32,
    /// Whether each pump command hit a voltage limit at this sample.
    pub saturation: [bool; 2],
    /// Whether the integrator clamped each tank during the interval
    /// ending at this sample.
    pub overflow: [bool; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    /// Sample spacing, s.
    pub control_period: f64,
    pub rows: Vec<TraceRow>,
}

impl SimulationTrace {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&TRACE_COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields: Vec<String> = Vec::with_capacity(TRACE_COLUMNS.len());
            fields.push(fmt_f64(row.t));
            fields.extend(row.levels.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.y.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.r.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.u_commanded.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.u_delivered.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.v_absolute.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.effectiveness_true.iter().map(|&v| fmt_f64(v)));
            fields.extend(row.effectiveness_estimate.iter().map(|&v| fmt_f64(v)));
            fields.push(row.gain_epoch.to_string());
            fields.extend(row.saturation.iter().map(|&b| fmt_bool(b)));
            fields.extend(row.overflow.iter().map(|&b| fmt_bool(b)));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(TraceError::Parse { line: 1, message: "empty trace file".into() })?;
        if header != TRACE_COLUMNS.join(",") {
            return Err(TraceError::Parse { line: 1, message: "unexpected header".into() });
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != TRACE_COLUMNS.len() {
                return Err(TraceError::Parse {
                    line: idx + 1,
                    message: format!(
                        "expected {} fields, found {}",
                        TRACE_COLUMNS.len(),
                        fields.len()
                    ),
                });
            }
            let f = |i: usize| -> Result<f64, TraceError> {
                fields[i].parse().map_err(|e| TraceError::Parse {
                    line: idx + 1,
                    message: format!("column {}: {e}", TRACE_COLUMNS[i]),
                })
            };
            let b = |i: usize| -> Result<bool, TraceError> {
                match fields[i] {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(TraceError::Parse {
                        line: idx + 1,
                        message: format!("column {}: expected 0/1, got {other}", TRACE_COLUMNS[i]),
                    }),
                }
            };
            rows.push(TraceRow {
                t: f(0)?,
                levels: [f(1)?, f(2)?, f(3)?, f(4)?],
                y: [f(5)?, f(6)?],
                r: [f(7)?, f(8)?],
                u_commanded: [f(9)?, f(10)?],
                u_delivered: [f(11)?, f(12)?],
                v_absolute: [f(13)?, f(14)?],
                effectiveness_true: [f(15)?, f(16)?],
                effectiveness_estimate: [f(17)?, f(18)?],
                gain_epoch: fields[19].parse().map_err(|e| TraceError::Parse {
                    line: idx + 1,
                    message: format!("column gain_epoch: {e}"),
                })?,
                saturation: [b(20)?, b(21)?],
                overflow: [b(22)?, b(23)?, b(24)?, b(25)?],
            });
        }
        let control_period = if rows.len() >= 2 { rows[1].t - rows[0].t } else { 0.0 };
        Ok(Self { control_period, rows })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }
}

fn fmt_f64(v: f64) -> String {
    // `{}` prints the shortest decimal that parses back to the same f64.
    format!("{v}")
}

fn fmt_bool(b: bool) -> String {
    if b { "1".to_string() } else { "0".to_string() }
}

#[cfg(test)]
pub(crate) fn synthetic_row(t: f64) -> TraceRow {
    TraceRow {
        t,
        levels: [12.0 + t, 12.5, 1.5, 1.2],
        y: [6.0, 6.25],
        r: [6.2, 6.35],
        u_commanded: [0.1, -0.2],
        u_delivered: [3.1, 2.8],
        v_absolute: [3.1, 2.8],
        effectiveness_true: [1.0, 1.0],
        effectiveness_estimate: [1.0, 1.0],
        gain_epoch: 0,
        saturation: [false, false],
        overflow: [false, false, false, false],
    }
}
