//! Closed-form evaluation of the resistive-divider threshold cell.
//!
//! A cell is an N-input resistive divider (inputs through programmed
//! memristors, plus one control branch) feeding an ideal inverter that
//! thresholds the divider node. With all resistances equal the cell computes
//! NAND or NOR depending on the control voltage; reprogramming the control
//! branch per the NOR of the inputs turns the same cell into XOR.

use thiserror::Error;

use crate::device::ResistanceLevel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error("gate reference supports exactly 2 inputs, got {0}")]
    ArityUnsupported(usize),
    #[error("invalid cell configuration: {0}")]
    InvalidConfig(String),
}

/// Logical operating mode of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    Nand,
    Nor,
    Xor,
}

/// Per-cell electrical configuration: input resistances, control resistance,
/// inverter threshold and supply.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    input_resistances: Vec<f64>,
    control_resistance: f64,
    v_th: f64,
    v_dd: f64,
}

impl CellConfig {
    pub fn new(
        input_resistances: Vec<f64>,
        control_resistance: f64,
        v_th: f64,
        v_dd: f64,
    ) -> Result<Self, CellError> {
        if input_resistances.is_empty() {
            return Err(CellError::InvalidConfig(
                "at least one input required".into(),
            ));
        }
        if input_resistances
            .iter()
            .any(|r| !(*r > 0.0) || !r.is_finite())
        {
            return Err(CellError::InvalidConfig(
                "all input resistances must be positive".into(),
            ));
        }
        if !(control_resistance > 0.0) || !control_resistance.is_finite() {
            return Err(CellError::InvalidConfig(
                "control resistance must be positive".into(),
            ));
        }
        if !(v_th > 0.0 && v_th < v_dd) {
            return Err(CellError::InvalidConfig(format!(
                "inverter threshold must satisfy 0 < v_th < v_dd (v_th = {v_th}, v_dd = {v_dd})"
            )));
        }
        Ok(Self {
            input_resistances,
            control_resistance,
            v_th,
            v_dd,
        })
    }

    /// All branches at the same resistance, the NAND/NOR configuration.
    pub fn equal_resistance(
        inputs: usize,
        r: f64,
        v_th: f64,
        v_dd: f64,
    ) -> Result<Self, CellError> {
        Self::new(vec![r; inputs], r, v_th, v_dd)
    }

    pub fn input_resistances(&self) -> &[f64] {
        &self.input_resistances
    }

    pub fn control_resistance(&self) -> f64 {
        self.control_resistance
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }

    pub fn v_dd(&self) -> f64 {
        self.v_dd
    }
}

/// Abstract linear threshold gate: fires when the weighted input sum meets the
/// threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LtgSpec {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl LtgSpec {
    pub fn new(weights: Vec<f64>, threshold: f64) -> Self {
        Self { weights, threshold }
    }

    /// `1` iff `sum(w_i * x_i) >= T`.
    pub fn output(&self, bits: &[bool]) -> bool {
        assert_eq!(bits.len(), self.weights.len(), "LTG arity mismatch");
        let sum: f64 = self
            .weights
            .iter()
            .zip(bits)
            .map(|(w, b)| if *b { *w } else { 0.0 })
            .sum();
        sum >= self.threshold
    }
}

/// Output voltage of the N-input resistive divider: the conductance-weighted
/// average of the applied voltages, control branch included.
pub fn divider_output(inputs: &[(f64, f64)], control: (f64, f64)) -> f64 {
    let mut num = control.0 / control.1;
    let mut den = 1.0 / control.1;
    for (v, r) in inputs {
        num += v / r;
        den += 1.0 / r;
    }
    num / den
}

/// Ideal inverter threshold decision: `v_dd` when the divider node sits below
/// the threshold, else 0. Equality yields 0 (strict inequality).
pub fn inverter_output(v_o: f64, v_th: f64, v_dd: f64) -> f64 {
    if v_o < v_th {
        v_dd
    } else {
        0.0
    }
}

/// Decode an analog level to a bit: anything at or above half the supply is 1.
pub fn decode_bit(v: f64, v_dd: f64) -> bool {
    v >= 0.5 * v_dd
}

/// Resistance level the control branch must hold for a mode and control bit.
/// NAND/NOR keep the control branch high; XOR lowers it when the control bit
/// (the NOR of the inputs) is 1.
pub fn control_resistance_for(mode: GateMode, v_c: bool) -> ResistanceLevel {
    match mode {
        GateMode::Nand | GateMode::Nor => ResistanceLevel::High,
        GateMode::Xor => {
            if v_c {
                ResistanceLevel::Low
            } else {
                ResistanceLevel::High
            }
        }
    }
}

/// Behavioral reference for the 2-input gates.
pub fn gate_reference(mode: GateMode, bits: &[bool]) -> Result<bool, CellError> {
    if bits.len() != 2 {
        return Err(CellError::ArityUnsupported(bits.len()));
    }
    let (a, b) = (bits[0], bits[1]);
    Ok(match mode {
        GateMode::Nand => !(a && b),
        GateMode::Nor => !(a || b),
        GateMode::Xor => a ^ b,
    })
}

/// Full cell evaluation: divider node voltage and inverter output.
pub fn evaluate_cell(config: &CellConfig, input_volts: &[f64], v_c: f64) -> (f64, f64) {
    assert_eq!(
        input_volts.len(),
        config.input_resistances.len(),
        "cell arity mismatch"
    );
    let inputs: Vec<(f64, f64)> = input_volts
        .iter()
        .copied()
        .zip(config.input_resistances.iter().copied())
        .collect();
    let v_o = divider_output(&inputs, (v_c, config.control_resistance));
    let v_out = inverter_output(v_o, config.v_th, config.v_dd);
    (v_o, v_out)
}

/// Checks by exhaustive enumeration that the physical cell realizes the given
/// linear threshold gate: for every Boolean input vector the cell's inverted
/// decision must equal the complement of the LTG output. `v_c_rule` supplies
/// the control voltage for each input vector.
pub fn realizes_ltg(
    config: &CellConfig,
    ltg: &LtgSpec,
    v_c_rule: impl Fn(&[bool]) -> f64,
) -> bool {
    let n = config.input_resistances.len();
    assert_eq!(ltg.weights.len(), n, "LTG arity must match the cell");
    for v in 0..(1u32 << n) {
        let bits: Vec<bool> = (0..n).map(|j| (v >> (n - 1 - j)) & 1 == 1).collect();
        let volts: Vec<f64> = bits
            .iter()
            .map(|b| if *b { config.v_dd } else { 0.0 })
            .collect();
        let v_c = v_c_rule(&bits);
        let (_, v_out) = evaluate_cell(config, &volts, v_c);
        if decode_bit(v_out, config.v_dd) != !ltg.output(&bits) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    const R_H: f64 = 1e8;
    const R_L: f64 = 100.0;

    fn equal_cell() -> CellConfig {
        CellConfig::equal_resistance(2, R_H, 0.5, 1.0).unwrap()
    }

    #[test]
    fn divider_equal_resistances_averages() {
        let v = divider_output(&[(1.0, R_H), (1.0, R_H)], (0.0, R_H));
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn divider_all_zero() {
        assert_eq!(divider_output(&[(0.0, R_H), (0.0, R_H)], (0.0, R_H)), 0.0);
    }

    #[test]
    fn divider_control_dominates_at_low_resistance() {
        // Both inputs low through high branches, control high through R_L.
        let v = divider_output(&[(0.0, R_H), (0.0, R_H)], (1.0, R_L));
        assert!((v - 0.999998).abs() < 1e-6, "v = {v}");
        assert!(v > 0.5);
    }

    #[test]
    fn divider_limit_control_takes_over() {
        // As the control resistance shrinks relative to the input branches,
        // the divider output approaches the control voltage.
        let mut prev_gap = f64::INFINITY;
        for exp in 1..=7 {
            let r_c = R_H / 10f64.powi(exp);
            let v = divider_output(&[(0.0, R_H), (0.0, R_H)], (1.0, r_c));
            let gap = (1.0 - v).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-6);
    }

    #[test]
    fn inverter_strict_threshold() {
        assert_eq!(inverter_output(1.0 / 3.0, 0.5, 1.0), 1.0);
        assert_eq!(inverter_output(0.5, 0.5, 1.0), 0.0);
        assert_eq!(inverter_output(2.0 / 3.0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn control_resistance_rule() {
        assert_eq!(
            control_resistance_for(GateMode::Xor, true),
            ResistanceLevel::Low
        );
        assert_eq!(
            control_resistance_for(GateMode::Xor, false),
            ResistanceLevel::High
        );
        assert_eq!(
            control_resistance_for(GateMode::Nand, true),
            ResistanceLevel::High
        );
        assert_eq!(
            control_resistance_for(GateMode::Nand, false),
            ResistanceLevel::High
        );
        assert_eq!(
            control_resistance_for(GateMode::Nor, true),
            ResistanceLevel::High
        );
    }

    #[test]
    fn gate_reference_tables() {
        assert!(!gate_reference(GateMode::Nand, &[true, true]).unwrap());
        assert!(gate_reference(GateMode::Nor, &[false, false]).unwrap());
        assert!(gate_reference(GateMode::Xor, &[false, true]).unwrap());
    }

    #[test]
    fn gate_reference_rejects_other_arities() {
        assert!(matches!(
            gate_reference(GateMode::Nand, &[true]),
            Err(CellError::ArityUnsupported(1))
        ));
        assert!(gate_reference(GateMode::Xor, &[true, true, false]).is_err());
    }

    #[test]
    fn gate_reference_matches_boolean_identities() {
        for v in 0..4u8 {
            let bits = [v & 2 != 0, v & 1 != 0];
            assert_eq!(
                gate_reference(GateMode::Nand, &bits).unwrap(),
                !(bits[0] && bits[1])
            );
            assert_eq!(
                gate_reference(GateMode::Nor, &bits).unwrap(),
                !(bits[0] || bits[1])
            );
        }
    }

    #[test]
    fn cell_reproduces_nand_and_nor_columns() {
        let cfg = equal_cell();
        // (inputs, v_c = 0) -> NAND column; (inputs, v_c = 1) -> NOR column.
        let table = [
            ((0.0, 0.0), true, true),
            ((0.0, 1.0), true, false),
            ((1.0, 0.0), true, false),
            ((1.0, 1.0), false, false),
        ];
        for ((a, b), nand, nor) in table {
            let (_, out) = evaluate_cell(&cfg, &[a, b], 0.0);
            assert_eq!(decode_bit(out, 1.0), nand, "NAND({a},{b})");
            let (_, out) = evaluate_cell(&cfg, &[a, b], 1.0);
            assert_eq!(decode_bit(out, 1.0), nor, "NOR({a},{b})");
        }
    }

    #[test]
    fn cell_example_rows() {
        let cfg = equal_cell();
        let (v_o, v_out) = evaluate_cell(&cfg, &[0.0, 1.0], 0.0);
        assert!((v_o - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v_out, 1.0);
        let (v_o, v_out) = evaluate_cell(&cfg, &[1.0, 1.0], 1.0);
        assert!((v_o - 1.0).abs() < 1e-15);
        assert_eq!(v_out, 0.0);
    }

    #[test]
    fn cell_reproduces_xor_rows() {
        // Control branch reprogrammed per the NOR of the inputs.
        for v in 0..4u8 {
            let bits = [v & 2 != 0, v & 1 != 0];
            let nor = !(bits[0] || bits[1]);
            let r_c = if nor { R_L } else { R_H };
            let cfg = CellConfig::new(vec![R_H, R_H], r_c, 0.5, 1.0).unwrap();
            let volts = [bits[0] as u8 as f64, bits[1] as u8 as f64];
            let (v_o, v_out) = evaluate_cell(&cfg, &volts, nor as u8 as f64);
            assert_eq!(decode_bit(v_out, 1.0), bits[0] ^ bits[1], "XOR{bits:?}");
            if bits == [false, false] {
                assert!(v_o > 0.5);
                assert_eq!(v_out, 0.0);
            }
        }
    }

    #[test]
    fn ltg_realization_nand_and_nor() {
        let cfg = equal_cell();
        let nand = LtgSpec::new(vec![1.0, 1.0], 2.0);
        assert!(realizes_ltg(&cfg, &nand, |_| 0.0));
        let nor = LtgSpec::new(vec![1.0, 1.0], 1.0);
        assert!(realizes_ltg(&cfg, &nor, |_| 1.0));
        // NAND is not NOR.
        assert!(!realizes_ltg(&cfg, &nor, |_| 0.0));
    }

    #[test]
    fn ltg_three_input_majority() {
        // The divider generalizes to N inputs: with three equal branches and
        // a grounded control the cell computes NOT-majority.
        let cfg = CellConfig::equal_resistance(3, R_H, 0.5, 1.0).unwrap();
        let majority = LtgSpec::new(vec![1.0, 1.0, 1.0], 2.0);
        assert!(realizes_ltg(&cfg, &majority, |_| 0.0));
        let or3 = LtgSpec::new(vec![1.0, 1.0, 1.0], 1.0);
        assert!(!realizes_ltg(&cfg, &or3, |_| 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(CellConfig::new(vec![], 1.0, 0.5, 1.0).is_err());
        assert!(CellConfig::new(vec![0.0], 1.0, 0.5, 1.0).is_err());
        assert!(CellConfig::new(vec![1.0], -1.0, 0.5, 1.0).is_err());
        assert!(CellConfig::new(vec![1.0], 1.0, 1.0, 1.0).is_err());
        assert!(CellConfig::new(vec![1.0], 1.0, 0.0, 1.0).is_err());
    }
}
