//! Post-processing: truth-table extraction from waveforms, timing-diagram CSV
//! emission, and the device-count cost model.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::cell::decode_bit;
use crate::circuit::{GateKind, Netlist};
use crate::engine::{node_signal, SimResult, Waveform};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("waveforms do not contain signal '{0}'")]
    UnknownSignal(String),
    #[error("contradictory truth-table rows for inputs {inputs:?}: output {first_output} at t = {first_time:.3e} s but {second_output} at t = {second_time:.3e} s")]
    ContradictoryRows {
        inputs: Vec<bool>,
        first_output: bool,
        first_time: f64,
        second_output: bool,
        second_time: f64,
    },
    #[error("no coefficient for gate kind '{kind}' in family '{family}'")]
    MissingCoefficient { family: String, kind: GateKind },
    #[error("coefficient file line {line}: {reason}")]
    BadCoefficientFile { line: usize, reason: String },
    #[error("csv export requires a common time base; signal '{0}' differs")]
    MismatchedTimeBase(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One extracted truth-table row: decoded inputs, decoded output, and the
/// sample time the row was read at.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub inputs: Vec<bool>,
    pub output: bool,
    pub sample_time: f64,
}

/// Truth table aggregated over the stable intervals of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    pub inputs: Vec<String>,
    pub output: String,
    pub rows: Vec<TruthRow>,
}

impl TruthTable {
    /// Row for an exact input combination, if it was observed.
    pub fn row(&self, inputs: &[bool]) -> Option<&TruthRow> {
        self.rows.iter().find(|r| r.inputs == inputs)
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<usize> = self.inputs.iter().map(|n| n.len().max(1)).collect();
        for (name, w) in self.inputs.iter().zip(&widths) {
            write!(f, "{name:>w$} ")?;
        }
        writeln!(f, "| {}", self.output)?;
        let total: usize = widths.iter().map(|w| w + 1).sum();
        writeln!(
            f,
            "{}+{}",
            "-".repeat(total),
            "-".repeat(self.output.len() + 1)
        )?;
        for row in &self.rows {
            for (bit, w) in row.inputs.iter().zip(&widths) {
                write!(f, "{:>w$} ", *bit as u8)?;
            }
            writeln!(f, "| {:>w$}", row.output as u8, w = self.output.len())?;
        }
        Ok(())
    }
}

/// Decodes input and output signals over the stable intervals of the
/// waveforms and aggregates unique rows.
///
/// A stable interval is a maximal run of samples over which every decoded
/// input bit is constant; each interval is read at its 90% point, far from
/// source edges and phase boundaries. The same inputs decoding to different
/// outputs across intervals is a contradiction and reported as an error.
pub fn extract_truth_table(
    result: &SimResult,
    input_nodes: &[&str],
    output_node: &str,
    logic_high: f64,
) -> Result<TruthTable, ReportError> {
    let input_waves: Vec<&Waveform> = input_nodes
        .iter()
        .map(|n| {
            result
                .waveforms
                .get(&node_signal(n))
                .ok_or_else(|| ReportError::UnknownSignal((*n).to_string()))
        })
        .collect::<Result<_, _>>()?;
    let output_wave = result
        .waveforms
        .get(&node_signal(output_node))
        .ok_or_else(|| ReportError::UnknownSignal(output_node.to_string()))?;
    let grid = input_waves
        .first()
        .map(|w| w.samples())
        .unwrap_or(output_wave.samples());

    // Maximal runs of constant decoded input bits.
    let mut intervals: Vec<(f64, f64, Vec<bool>)> = Vec::new();
    let mut run_start: Option<(f64, Vec<bool>)> = None;
    for (t, _) in grid {
        let bits: Vec<bool> = input_waves
            .iter()
            .map(|w| decode_bit(w.value_at(*t), logic_high))
            .collect();
        match &run_start {
            Some((_, current)) if *current == bits => {}
            Some((start, current)) => {
                intervals.push((*start, *t, current.clone()));
                run_start = Some((*t, bits));
            }
            None => run_start = Some((*t, bits)),
        }
    }
    if let Some((start, bits)) = run_start {
        // Extend the final run by one grid step past its last sample.
        let n = grid.len();
        let last_t = grid[n - 1].0;
        let step = if n >= 2 { last_t - grid[n - 2].0 } else { 0.0 };
        intervals.push((start, last_t + step, bits));
    }

    let mut seen: BTreeMap<Vec<bool>, (bool, f64)> = BTreeMap::new();
    let mut rows: Vec<TruthRow> = Vec::new();
    for (start, end, bits) in intervals {
        let t_sample = start + 0.9 * (end - start);
        let out = decode_bit(output_wave.value_at(t_sample), logic_high);
        match seen.get(&bits) {
            Some((prev_out, prev_t)) => {
                if *prev_out != out {
                    return Err(ReportError::ContradictoryRows {
                        inputs: bits,
                        first_output: *prev_out,
                        first_time: *prev_t,
                        second_output: out,
                        second_time: t_sample,
                    });
                }
            }
            None => {
                seen.insert(bits.clone(), (out, t_sample));
                rows.push(TruthRow {
                    inputs: bits,
                    output: out,
                    sample_time: t_sample,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.inputs.cmp(&b.inputs));
    Ok(TruthTable {
        inputs: input_nodes.iter().map(|s| s.to_string()).collect(),
        output: output_node.to_string(),
        rows,
    })
}

/// Area/power coefficients per gate kind, grouped by logic family.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostCoefficients {
    families: BTreeMap<String, BTreeMap<GateKind, (f64, f64)>>,
}

impl CostCoefficients {
    /// Parses the key-value coefficient format: one record per line,
    /// `<family> <kind> <area_um2> <power_uw>`, `#` comments.
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut families: BTreeMap<String, BTreeMap<GateKind, (f64, f64)>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(ReportError::BadCoefficientFile {
                    line,
                    reason: format!(
                        "expected 4 fields (family kind area power), got {}",
                        fields.len()
                    ),
                });
            }
            let kind: GateKind = fields[1]
                .parse()
                .map_err(|e| ReportError::BadCoefficientFile { line, reason: e })?;
            let area: f64 = fields[2]
                .parse()
                .map_err(|_| ReportError::BadCoefficientFile {
                    line,
                    reason: format!("bad area value '{}'", fields[2]),
                })?;
            let power: f64 = fields[3]
                .parse()
                .map_err(|_| ReportError::BadCoefficientFile {
                    line,
                    reason: format!("bad power value '{}'", fields[3]),
                })?;
            if !(area > 0.0 && power > 0.0) {
                return Err(ReportError::BadCoefficientFile {
                    line,
                    reason: "area and power must be positive".into(),
                });
            }
            families
                .entry(fields[0].to_ascii_lowercase())
                .or_default()
                .insert(kind, (area, power));
        }
        Ok(Self { families })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn families(&self) -> impl Iterator<Item = &str> {
        self.families.keys().map(|s| s.as_str())
    }

    pub fn get(&self, family: &str, kind: GateKind) -> Option<(f64, f64)> {
        self.families
            .get(family)
            .and_then(|m| m.get(&kind))
            .copied()
    }

    pub fn set(&mut self, family: &str, kind: GateKind, area: f64, power: f64) {
        self.families
            .entry(family.to_string())
            .or_default()
            .insert(kind, (area, power));
    }
}

/// Per-family totals over the gate census, plus RMTL/CMOS ratios when both
/// families were requested and the netlist has gates.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub census: BTreeMap<GateKind, usize>,
    pub totals: BTreeMap<String, (f64, f64)>,
    pub area_ratio: Option<f64>,
    pub power_ratio: Option<f64>,
}

/// Sums the per-gate coefficients over the netlist's logic gates for each
/// requested family. Cells flagged as control circuitry are excluded from the
/// census, mirroring the convention that comparisons leave out the control
/// and training circuits.
pub fn cost_report(
    netlist: &Netlist,
    coefficients: &CostCoefficients,
    families: &[&str],
) -> Result<CostReport, ReportError> {
    let census = netlist.gate_census();
    let mut totals = BTreeMap::new();
    for family in families {
        let family = family.to_ascii_lowercase();
        let mut area = 0.0;
        let mut power = 0.0;
        for (kind, count) in &census {
            let (a, p) = coefficients.get(&family, *kind).ok_or_else(|| {
                ReportError::MissingCoefficient {
                    family: family.clone(),
                    kind: *kind,
                }
            })?;
            area += a * *count as f64;
            power += p * *count as f64;
        }
        totals.insert(family, (area, power));
    }
    let ratios = match (totals.get("rmtl"), totals.get("cmos")) {
        (Some((ra, rp)), Some((ca, cp))) if *ca > 0.0 && *cp > 0.0 => Some((ra / ca, rp / cp)),
        _ => None,
    };
    Ok(CostReport {
        census,
        totals,
        area_ratio: ratios.map(|r| r.0),
        power_ratio: ratios.map(|r| r.1),
    })
}

/// Writes waveforms as CSV: a header row (`time` then the probes in order),
/// one row per engine sample. Values use the shortest decimal form that
/// parses back to the identical float.
pub fn export_csv<W: Write>(
    mut w: W,
    result: &SimResult,
    probes: &[String],
) -> Result<(), ReportError> {
    let waves: Vec<&Waveform> = probes
        .iter()
        .map(|p| {
            result
                .waveforms
                .get(p)
                .ok_or_else(|| ReportError::UnknownSignal(p.clone()))
        })
        .collect::<Result<_, _>>()?;
    write!(w, "time")?;
    for p in probes {
        write!(w, ",{p}")?;
    }
    writeln!(w)?;
    let n = waves.first().map(|w| w.len()).unwrap_or(0);
    for wave in &waves {
        if wave.len() != n {
            return Err(ReportError::MismatchedTimeBase(wave.name().to_string()));
        }
    }
    for i in 0..n {
        let t = waves[0].samples()[i].0;
        write!(w, "{t}")?;
        for wave in &waves {
            let (st, v) = wave.samples()[i];
            if st != t {
                return Err(ReportError::MismatchedTimeBase(wave.name().to_string()));
            }
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// CSV export straight to a file.
pub fn export_csv_file(
    path: &Path,
    result: &SimResult,
    probes: &[String],
) -> Result<(), ReportError> {
    let file = std::fs::File::create(path)?;
    export_csv(io::BufWriter::new(file), result, probes)
}
