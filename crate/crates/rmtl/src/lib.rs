//! Transient simulator and verification harness for voltage-controlled
//! memristor threshold-logic gates.
//!
//! A threshold cell is a resistive divider of memristors feeding an ideal
//! inverter: programming the memristor weights with training pulses and
//! choosing a control voltage reconfigures one and the same cell between
//! NAND, NOR and XOR operation, and composing cells yields adders up to a
//! 4-bit carry-lookahead adder.
//!
//! - [`device`]: nonlinear memristor model with hard-threshold training
//! - [`cell`]: closed-form divider/inverter cell and the linear-threshold-gate
//!   abstraction
//! - [`circuit`]: typed netlist, structural validation, circuit builders
//! - [`engine`]: fixed-step transient simulator with write/read phases
//! - [`dsl`]: the `.rtl` text netlist format, parser and serializer
//! - [`report`]: truth-table extraction, CSV export, device-count cost model
//! - [`verify`]: exhaustive verification against boolean and integer-addition
//!   oracles, data-parallel behind the `parallel` feature

pub mod cell;
pub mod circuit;
pub mod device;
pub mod dsl;
pub mod engine;
pub mod report;
pub mod verify;

pub use cell::{CellConfig, GateMode, LtgSpec};
pub use circuit::{GateKind, Netlist, NetlistBuilder, ValidationIssue};
pub use device::{MemristorParams, MemristorState, Polarity, ResistanceLevel, TrainingTarget};
pub use engine::{simulate, SimConfig, SimMode, SimResult, Waveform};
pub use report::{CostCoefficients, TruthTable};
pub use verify::OracleKind;
