//! Exhaustive verification of circuits against independent oracles.
//!
//! Each oracle names the input and output nodes it expects and computes the
//! reference outputs from boolean identities or plain integer addition, never
//! from gate logic. Every input vector is a fully independent simulation run
//! over a cloned netlist, which makes the sweep data-parallel: with the
//! `parallel` feature (default) vectors fan out across a rayon pool, without
//! it the same sweep runs sequentially.

use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cell::decode_bit;
use crate::circuit::{CircuitError, Netlist};
use crate::engine::{simulate, EngineError, SimConfig, SimMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Nand,
    Nor,
    Xor,
    HalfAdder,
    FullAdder,
    Cla4,
}

impl std::str::FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nand" => Ok(Self::Nand),
            "nor" => Ok(Self::Nor),
            "xor" => Ok(Self::Xor),
            "half-adder" => Ok(Self::HalfAdder),
            "full-adder" => Ok(Self::FullAdder),
            "cla4" => Ok(Self::Cla4),
            other => Err(format!(
                "unknown oracle '{other}', expected nand|nor|xor|half-adder|full-adder|cla4"
            )),
        }
    }
}

impl OracleKind {
    /// Input node names, least significant bit first for the adder words.
    pub fn input_names(&self) -> Vec<&'static str> {
        match self {
            Self::Nand | Self::Nor | Self::Xor => vec!["A", "B"],
            Self::HalfAdder => vec!["A", "B"],
            Self::FullAdder => vec!["A", "B", "CIN"],
            Self::Cla4 => vec!["A0", "A1", "A2", "A3", "B0", "B1", "B2", "B3", "CIN"],
        }
    }

    pub fn output_names(&self) -> Vec<&'static str> {
        match self {
            Self::Nand | Self::Nor | Self::Xor => vec!["OUT"],
            Self::HalfAdder => vec!["SUM", "CARRY"],
            Self::FullAdder => vec!["SUM", "COUT"],
            Self::Cla4 => vec!["S0", "S1", "S2", "S3", "COUT"],
        }
    }

    pub fn vector_count(&self) -> usize {
        1 << self.input_names().len()
    }

    /// Reference outputs. The gates use boolean identities; the adders use
    /// integer addition and read the sum bits back out.
    pub fn expected(&self, inputs: &[bool]) -> Vec<bool> {
        match self {
            Self::Nand => vec![!(inputs[0] && inputs[1])],
            Self::Nor => vec![!(inputs[0] || inputs[1])],
            Self::Xor => vec![inputs[0] ^ inputs[1]],
            Self::HalfAdder => {
                let s = inputs[0] as u32 + inputs[1] as u32;
                vec![s & 1 == 1, s >> 1 == 1]
            }
            Self::FullAdder => {
                let s = inputs[0] as u32 + inputs[1] as u32 + inputs[2] as u32;
                vec![s & 1 == 1, s >> 1 == 1]
            }
            Self::Cla4 => {
                let word = |bits: &[bool]| -> u32 {
                    bits.iter().enumerate().map(|(i, b)| (*b as u32) << i).sum()
                };
                let a = word(&inputs[0..4]);
                let b = word(&inputs[4..8]);
                let cin = inputs[8] as u32;
                let sum = a + b + cin;
                (0..5).map(|i| (sum >> i) & 1 == 1).collect()
            }
        }
    }
}

/// One failing vector: what went in, what the oracle wanted, what came out.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub index: usize,
    pub inputs: Vec<bool>,
    pub expected: Vec<bool>,
    pub got: Vec<bool>,
}

/// Outcome of an exhaustive sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub total: usize,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn matches(&self) -> usize {
        self.total - self.mismatches.len()
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("netlist does not fit the oracle: {0}")]
    Circuit(#[from] CircuitError),
}

fn run_vector(
    netlist: &Netlist,
    oracle: OracleKind,
    mode: SimMode,
    index: usize,
) -> Result<Option<Mismatch>, VerifyError> {
    let inputs: Vec<bool> = oracle
        .input_names()
        .iter()
        .enumerate()
        .map(|(bit, _)| (index >> bit) & 1 == 1)
        .collect();
    let logic_high = netlist.logic_high();

    let mut run = netlist.clone();
    for (name, bit) in oracle.input_names().iter().zip(&inputs) {
        run.set_const_source(name, if *bit { logic_high } else { 0.0 })?;
    }
    let frame = run.phase().frame_period;
    let config = SimConfig {
        t_end: frame,
        dt_read: frame / 10.0,
        dt_write: run.params().max_step(),
        mode,
    };
    let result = simulate(&run, &config)?;

    let got: Vec<bool> = oracle
        .output_names()
        .iter()
        .map(|name| {
            let wave = result
                .node(name)
                .unwrap_or_else(|| panic!("oracle output node '{name}' missing"));
            let (_, v) = *wave.samples().last().expect("nonempty waveform");
            decode_bit(v, logic_high)
        })
        .collect();

    let expected = oracle.expected(&inputs);
    Ok((got != expected).then_some(Mismatch {
        index,
        inputs,
        expected,
        got,
    }))
}

fn collect(
    results: Vec<Result<Option<Mismatch>, VerifyError>>,
    total: usize,
) -> Result<VerifyOutcome, VerifyError> {
    let mut mismatches = Vec::new();
    for r in results {
        if let Some(m) = r? {
            mismatches.push(m);
        }
    }
    mismatches.sort_by_key(|m| m.index);
    Ok(VerifyOutcome { total, mismatches })
}

/// Sweeps every input vector sequentially.
pub fn run_exhaustive_sequential(
    netlist: &Netlist,
    oracle: OracleKind,
    mode: SimMode,
) -> Result<VerifyOutcome, VerifyError> {
    let total = oracle.vector_count();
    let results: Vec<_> = (0..total)
        .map(|i| run_vector(netlist, oracle, mode, i))
        .collect();
    collect(results, total)
}

/// Sweeps every input vector, in parallel when the `parallel` feature is
/// enabled. Results are deterministic either way: vectors are independent and
/// reported in index order.
#[cfg(feature = "parallel")]
pub fn run_exhaustive(
    netlist: &Netlist,
    oracle: OracleKind,
    mode: SimMode,
) -> Result<VerifyOutcome, VerifyError> {
    let total = oracle.vector_count();
    let results: Vec<_> = (0..total)
        .into_par_iter()
        .map(|i| run_vector(netlist, oracle, mode, i))
        .collect();
    collect(results, total)
}

/// Sweeps every input vector, in parallel when the `parallel` feature is
/// enabled. Results are deterministic either way: vectors are independent and
/// reported in index order.
#[cfg(not(feature = "parallel"))]
pub fn run_exhaustive(
    netlist: &Netlist,
    oracle: OracleKind,
    mode: SimMode,
) -> Result<VerifyOutcome, VerifyError> {
    run_exhaustive_sequential(netlist, oracle, mode)
}
