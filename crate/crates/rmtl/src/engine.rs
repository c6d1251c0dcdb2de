//! Fixed-step transient simulator.
//!
//! Time is organized in frames: the leading `write_fraction` of each frame is
//! the WRITE phase, where trained control branches are programmed by training
//! pulses (fine `dt_write` steps through the device ODE in PHYSICAL mode,
//! instantaneous jumps in BEHAVIORAL mode), and the remainder is the READ
//! phase, where the combinational network is evaluated in topological order at
//! the coarse `dt_read` sampling step. Two timescales because device switching
//! is on the order of nanoseconds while stimuli move on microseconds.
//!
//! The write targets of a frame come from the control decisions for that
//! frame's source values: an ideal control circuit observes the inputs at the
//! frame boundary and programs each trained cell's control branch to low
//! resistance when its control bit decodes to 1, high otherwise. The read
//! network then evaluates against the freshly programmed states, so decoded
//! outputs agree between modes sample for sample.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cell::{decode_bit, divider_output, inverter_output};
use crate::circuit::{
    Cell, ControlPolicy, DeviceId, EvalStep, Netlist, SwitchPhase, ValidationIssue,
};
use crate::device::{self, DeviceError, MemristorState, TrainingTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Physical,
    Behavioral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    /// Sampling step during READ phases.
    pub dt_read: f64,
    /// ODE step during WRITE phases; at most `t_switch / 20`.
    pub dt_write: f64,
    pub mode: SimMode,
}

impl SimConfig {
    /// Defaults derived from the netlist: simulate two periods of the slowest
    /// pulse source (one frame if all sources are constant), sample the READ
    /// phase at a fiftieth of the frame, and step the WRITE phase at the
    /// device stability bound.
    pub fn defaults_for(netlist: &Netlist) -> Self {
        let frame = netlist.phase().frame_period;
        let max_period = netlist
            .sources()
            .iter()
            .filter_map(|s| match s.wave {
                crate::circuit::SourceWave::Pulse { period, .. } => Some(period),
                _ => None,
            })
            .fold(0.0, f64::max);
        let t_end = if max_period > 0.0 {
            2.0 * max_period
        } else {
            frame
        };
        Self {
            t_end,
            dt_read: frame / 50.0,
            dt_write: netlist.params().max_step(),
            mode: SimMode::Physical,
        }
    }

    fn check(&self, netlist: &Netlist) -> Result<(), EngineError> {
        if !(self.t_end > 0.0) {
            return Err(EngineError::BadConfig(format!(
                "t_end {} must be positive",
                self.t_end
            )));
        }
        if !(self.dt_read > 0.0) {
            return Err(EngineError::BadConfig(format!(
                "dt_read {} must be positive",
                self.dt_read
            )));
        }
        let max = netlist.params().max_step();
        if !(self.dt_write > 0.0 && self.dt_write <= max * (1.0 + 1e-12)) {
            return Err(EngineError::BadConfig(format!(
                "dt_write {} outside (0, {max}]",
                self.dt_write
            )));
        }
        Ok(())
    }
}

/// Per-signal time series. Sample times are strictly increasing; values are
/// volts for node signals and ohms for device-resistance signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    name: String,
    samples: Vec<(f64, f64)>,
}

impl Waveform {
    /// Builds a waveform from raw samples, which must have strictly
    /// increasing times.
    pub fn from_samples(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Self {
        debug_assert!(samples.windows(2).all(|p| p[0].0 < p[1].0));
        Self {
            name: name.into(),
            samples,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Step-function lookup: the value of the last sample at or before `t`
    /// (the first sample when `t` precedes the record).
    pub fn value_at(&self, t: f64) -> f64 {
        match self
            .samples
            .binary_search_by(|(st, _)| st.partial_cmp(&t).unwrap())
        {
            Ok(i) => self.samples[i].1,
            Err(0) => self.samples.first().map(|s| s.1).unwrap_or(0.0),
            Err(i) => self.samples[i - 1].1,
        }
    }
}

/// Waveform key of a node-voltage signal, e.g. `v(OUT)`.
pub fn node_signal(node: &str) -> String {
    format!("v({node})")
}

/// Waveform key of a memristance signal, e.g. `r(U1.rc)`.
pub fn device_signal(device: &str) -> String {
    format!("r({device})")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub waveforms: BTreeMap<String, Waveform>,
}

impl SimResult {
    pub fn node(&self, name: &str) -> Option<&Waveform> {
        self.waveforms.get(&node_signal(name))
    }

    pub fn device(&self, name: &str) -> Option<&Waveform> {
        self.waveforms.get(&device_signal(name))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("netlist failed validation: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    UnvalidatedNetlist(Vec<ValidationIssue>),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("write window {window:.3e} s is shorter than the training pulse {pulse:.3e} s")]
    WritePhaseTooShort { window: f64, pulse: f64 },
    #[error("combinational cycle: {0}")]
    Cycle(String),
    #[error("bad simulation config: {0}")]
    BadConfig(String),
}

/// A write-phase programming decision for one trained control branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTarget {
    pub device: DeviceId,
    pub target: TrainingTarget,
}

/// Node voltage assignment indexed by `NodeId`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeVoltages(Vec<f64>);

impl NodeVoltages {
    pub fn get(&self, netlist: &Netlist, node: &str) -> Option<f64> {
        netlist.node_id(node).map(|id| self.0[id.index()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Instantaneous values of all sources, in netlist source order.
pub fn source_values_at(netlist: &Netlist, t: f64) -> Vec<f64> {
    netlist
        .sources()
        .iter()
        .map(|s| s.wave.value_at(t))
        .collect()
}

fn eval_cell_static(
    cell: &Cell,
    states: &[MemristorState],
    rc: MemristorState,
    voltages: &[f64],
    netlist: &Netlist,
) -> (f64, f64) {
    let params = netlist.params();
    let inputs: Vec<(f64, f64)> = cell
        .inputs
        .iter()
        .zip(&cell.input_devices)
        .map(|(node, dev)| {
            (
                voltages[node.index()],
                device::memristance(states[dev.index()], params),
            )
        })
        .collect();
    let control = (
        voltages[cell.control.index()],
        device::memristance(rc, params),
    );
    let v_o = divider_output(&inputs, control);
    let v_out = inverter_output(v_o, cell.v_th, cell.v_dd);
    (v_o, v_out)
}

/// Topological read-phase pass. When `targets` is provided, trained cells are
/// read at the control-branch level the current control decision would
/// program (and the decision is recorded); otherwise they are read at their
/// actual device states.
fn eval_elements(
    netlist: &Netlist,
    order: &[EvalStep],
    states: &[MemristorState],
    source_values: &[f64],
    mut targets: Option<&mut Vec<FrameTarget>>,
    voltages: &mut [f64],
) {
    let params = netlist.params();
    voltages[0] = 0.0;
    for (src, v) in netlist.sources().iter().zip(source_values) {
        voltages[src.node.index()] = *v;
    }
    for step in order {
        match *step {
            EvalStep::Cell(i) => {
                let cell = &netlist.cells()[i];
                let rc = if cell.policy == ControlPolicy::Trained && targets.is_some() {
                    let bit = decode_bit(voltages[cell.control.index()], cell.v_dd);
                    let (target, level) = if bit {
                        (TrainingTarget::SetLow, crate::device::ResistanceLevel::Low)
                    } else {
                        (
                            TrainingTarget::SetHigh,
                            crate::device::ResistanceLevel::High,
                        )
                    };
                    if let Some(ts) = targets.as_deref_mut() {
                        ts.push(FrameTarget {
                            device: cell.control_device,
                            target,
                        });
                    }
                    params.level_state(level)
                } else {
                    states[cell.control_device.index()]
                };
                let (v_o, v_out) = eval_cell_static(cell, states, rc, voltages, netlist);
                voltages[cell.divider_node.index()] = v_o;
                voltages[cell.output.index()] = v_out;
            }
            EvalStep::Inverter(i) => {
                let inv = &netlist.inverters()[i];
                voltages[inv.output.index()] =
                    inverter_output(voltages[inv.input.index()], inv.v_th, inv.v_dd);
            }
            EvalStep::Switch(i) => {
                let sw = &netlist.switches()[i];
                voltages[sw.output.index()] = if sw.phase == SwitchPhase::Read {
                    voltages[sw.input.index()]
                } else {
                    0.0
                };
            }
        }
    }
}

/// Write-phase node assignment: sources plus conducting write switches; open
/// read switches drive 0; cell and inverter outputs are left as they were.
fn eval_write_network(
    netlist: &Netlist,
    order: &[EvalStep],
    source_values: &[f64],
    voltages: &mut [f64],
) {
    voltages[0] = 0.0;
    for (src, v) in netlist.sources().iter().zip(source_values) {
        voltages[src.node.index()] = *v;
    }
    for step in order {
        if let EvalStep::Switch(i) = *step {
            let sw = &netlist.switches()[i];
            voltages[sw.output.index()] = if sw.phase == SwitchPhase::Write {
                voltages[sw.input.index()]
            } else {
                0.0
            };
        }
    }
}

/// Pure read-phase evaluation of a validated netlist: sources applied, every
/// cell evaluated once after its producers. Trained control branches are read
/// at the level the instantaneous control decision programs.
pub fn evaluate_read_step(
    netlist: &Netlist,
    states: &[MemristorState],
    source_values: &[f64],
) -> Result<NodeVoltages, EngineError> {
    let order = netlist
        .read_topo_order()
        .map_err(|c| EngineError::Cycle(c.to_string()))?;
    let mut voltages = vec![0.0; netlist.node_count()];
    let mut targets = Vec::new();
    eval_elements(
        netlist,
        &order,
        states,
        source_values,
        Some(&mut targets),
        &mut voltages,
    );
    Ok(NodeVoltages(voltages))
}

/// Control decisions for one frame, from the source values at its boundary.
pub fn frame_targets(
    netlist: &Netlist,
    states: &[MemristorState],
    source_values: &[f64],
) -> Result<Vec<FrameTarget>, EngineError> {
    let order = netlist
        .read_topo_order()
        .map_err(|c| EngineError::Cycle(c.to_string()))?;
    let mut voltages = vec![0.0; netlist.node_count()];
    let mut targets = Vec::new();
    eval_elements(
        netlist,
        &order,
        states,
        source_values,
        Some(&mut targets),
        &mut voltages,
    );
    Ok(targets)
}

/// Programs the targeted devices through the device ODE across one write
/// window and returns the updated states. The untargeted states come back
/// bit-identical.
pub fn run_write_phase(
    netlist: &Netlist,
    states: &[MemristorState],
    targets: &[FrameTarget],
    dt_write: f64,
    window: f64,
) -> Result<Vec<MemristorState>, EngineError> {
    let params = netlist.params();
    let mut out = states.to_vec();
    if targets.is_empty() {
        return Ok(out);
    }
    let pulse_duration = 2.0 * params.t_switch();
    if window < pulse_duration {
        return Err(EngineError::WritePhaseTooShort {
            window,
            pulse: pulse_duration,
        });
    }
    let steps = (window / dt_write).round() as usize;
    for j in 0..steps {
        let elapsed = j as f64 * dt_write;
        for ft in targets {
            let pulse = device::training_pulse(ft.target, params);
            let v = if elapsed < pulse.duration {
                pulse.amplitude
            } else {
                0.0
            };
            let idx = ft.device.index();
            out[idx] = device::step_state(out[idx], v, dt_write, params)?;
        }
    }
    Ok(out)
}

struct Recorder {
    node_waves: Vec<Waveform>,
    device_waves: Vec<Waveform>,
}

impl Recorder {
    fn new(netlist: &Netlist) -> Self {
        Self {
            node_waves: netlist
                .node_names()
                .map(|n| Waveform {
                    name: node_signal(n),
                    samples: Vec::new(),
                })
                .collect(),
            device_waves: netlist
                .devices()
                .iter()
                .map(|d| Waveform {
                    name: device_signal(&d.name),
                    samples: Vec::new(),
                })
                .collect(),
        }
    }

    fn record(&mut self, t: f64, voltages: &[f64], states: &[MemristorState], netlist: &Netlist) {
        for (wave, v) in self.node_waves.iter_mut().zip(voltages) {
            debug_assert!(wave.samples.last().is_none_or(|(pt, _)| *pt < t));
            wave.samples.push((t, *v));
        }
        let params = netlist.params();
        for (wave, s) in self.device_waves.iter_mut().zip(states) {
            wave.samples.push((t, device::memristance(*s, params)));
        }
    }

    fn finish(self) -> SimResult {
        let mut waveforms = BTreeMap::new();
        for w in self.node_waves.into_iter().chain(self.device_waves) {
            waveforms.insert(w.name.clone(), w);
        }
        SimResult { waveforms }
    }
}

/// Runs the transient simulation and returns one waveform per node voltage
/// (`v(<node>)`) and per memristance (`r(<device>)`).
pub fn simulate(netlist: &Netlist, config: &SimConfig) -> Result<SimResult, EngineError> {
    let issues = netlist.validate();
    if !issues.is_empty() {
        return Err(EngineError::UnvalidatedNetlist(issues));
    }
    config.check(netlist)?;
    let order = netlist
        .read_topo_order()
        .map_err(|c| EngineError::Cycle(c.to_string()))?;

    let params = netlist.params();
    let phase = netlist.phase();
    let pulse_duration = 2.0 * params.t_switch();
    let write_window = phase.write_fraction * phase.frame_period;
    if config.mode == SimMode::Physical
        && netlist.has_trained_cells()
        && write_window < pulse_duration
    {
        return Err(EngineError::WritePhaseTooShort {
            window: write_window,
            pulse: pulse_duration,
        });
    }

    let mut states = netlist.initial_states();
    let mut voltages = vec![0.0; netlist.node_count()];
    let mut scratch = vec![0.0; netlist.node_count()];
    let mut rec = Recorder::new(netlist);

    let mut frame = 0u64;
    loop {
        let fs = frame as f64 * phase.frame_period;
        if fs >= config.t_end {
            break;
        }
        let frame_end = (fs + phase.frame_period).min(config.t_end);

        // Control decisions for this frame, from the sources at its boundary.
        let src = source_values_at(netlist, fs);
        let mut targets = Vec::new();
        eval_elements(
            netlist,
            &order,
            &states,
            &src,
            Some(&mut targets),
            &mut scratch,
        );

        match config.mode {
            SimMode::Physical if write_window > 0.0 => {
                let steps = (write_window / config.dt_write).round() as usize;
                for j in 0..steps {
                    let elapsed = j as f64 * config.dt_write;
                    let t = fs + elapsed;
                    if t >= frame_end {
                        break;
                    }
                    let src_t = source_values_at(netlist, t);
                    eval_write_network(netlist, &order, &src_t, &mut voltages);
                    for ft in &targets {
                        let pulse = device::training_pulse(ft.target, params);
                        let v = if elapsed < pulse.duration {
                            pulse.amplitude
                        } else {
                            0.0
                        };
                        let idx = ft.device.index();
                        states[idx] = device::step_state(states[idx], v, config.dt_write, params)?;
                    }
                    for m in netlist.memristor_elements() {
                        let v = voltages[m.a.index()] - voltages[m.b.index()];
                        let idx = m.device.index();
                        states[idx] = device::step_state(states[idx], v, config.dt_write, params)?;
                    }
                    rec.record(t, &voltages, &states, netlist);
                }
            }
            SimMode::Physical => {}
            SimMode::Behavioral => {
                for ft in &targets {
                    let level = match ft.target {
                        TrainingTarget::SetHigh => crate::device::ResistanceLevel::High,
                        TrainingTarget::SetLow => crate::device::ResistanceLevel::Low,
                    };
                    states[ft.device.index()] = params.level_state(level);
                }
            }
        }

        // READ phase: coarse sampling of the combinational network.
        let read_start = fs + write_window;
        let span = frame_end - read_start;
        if span > 0.0 {
            let n_read = ((span / config.dt_read) - 1e-9).ceil().max(1.0) as usize;
            for j in 0..n_read {
                let t = read_start + j as f64 * config.dt_read;
                if t >= frame_end {
                    break;
                }
                let src_t = source_values_at(netlist, t);
                eval_elements(netlist, &order, &states, &src_t, None, &mut voltages);
                for cell in netlist.cells() {
                    let vo = voltages[cell.divider_node.index()];
                    for (node, dev) in cell.inputs.iter().zip(&cell.input_devices) {
                        let v = voltages[node.index()] - vo;
                        let idx = dev.index();
                        states[idx] = device::step_state(states[idx], v, config.dt_read, params)?;
                    }
                    let v = voltages[cell.control.index()] - vo;
                    let idx = cell.control_device.index();
                    states[idx] = device::step_state(states[idx], v, config.dt_read, params)?;
                }
                for m in netlist.memristor_elements() {
                    let v = voltages[m.a.index()] - voltages[m.b.index()];
                    let idx = m.device.index();
                    states[idx] = device::step_state(states[idx], v, config.dt_read, params)?;
                }
                rec.record(t, &voltages, &states, netlist);
            }
        }

        frame += 1;
        if frame_end >= config.t_end {
            break;
        }
    }

    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::GateMode;
    use crate::circuit::{gate_circuit, nandnor_demo, xor_demo, NetlistBuilder};

    fn behavioral(netlist: &Netlist) -> SimConfig {
        SimConfig {
            mode: SimMode::Behavioral,
            ..SimConfig::defaults_for(netlist)
        }
    }

    #[test]
    fn nand_cell_read_step() {
        let mut netlist = gate_circuit(GateMode::Nand);
        netlist.set_const_source("A", 1.0).unwrap();
        netlist.set_const_source("B", 1.0).unwrap();
        let states = netlist.initial_states();
        let src = source_values_at(&netlist, 0.0);
        let v = evaluate_read_step(&netlist, &states, &src).unwrap();
        let vo = v.get(&netlist, "OUT.vo").unwrap();
        assert!((vo - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(v.get(&netlist, "OUT").unwrap(), 0.0);
    }

    #[test]
    fn xor_cascade_read_step() {
        let mut netlist = gate_circuit(GateMode::Xor);
        netlist.set_const_source("A", 0.0).unwrap();
        netlist.set_const_source("B", 0.0).unwrap();
        let states = netlist.initial_states();
        let src = source_values_at(&netlist, 0.0);
        let v = evaluate_read_step(&netlist, &states, &src).unwrap();
        // NOR control cell fires, the programmed control branch pulls the
        // divider high, the main output stays 0.
        assert_eq!(v.get(&netlist, "OUT.c").unwrap(), 1.0);
        assert!(v.get(&netlist, "OUT.vo").unwrap() > 0.5);
        assert_eq!(v.get(&netlist, "OUT").unwrap(), 0.0);
    }

    #[test]
    fn inverter_chain_read_step() {
        let mut b = NetlistBuilder::new();
        let one = b.const_source("VIN", "IN", 1.0);
        let n1 = b.not("N1", one);
        let n2 = b.not("N2", n1);
        b.not("N3", n2);
        let netlist = b.finish();
        let states = netlist.initial_states();
        let src = source_values_at(&netlist, 0.0);
        let v = evaluate_read_step(&netlist, &states, &src).unwrap();
        assert_eq!(v.get(&netlist, "N3").unwrap(), 0.0);
    }

    #[test]
    fn zero_drive_fixed_point() {
        let netlist = gate_circuit(GateMode::Nand);
        let result = simulate(&netlist, &SimConfig::defaults_for(&netlist)).unwrap();
        let t = 0.4e-6;
        assert_eq!(result.node("OUT.vo").unwrap().value_at(t), 0.0);
        assert_eq!(result.node("OUT").unwrap().value_at(t), 1.0);
        for dev in netlist.devices() {
            let wave = result.device(&dev.name).unwrap();
            let first = wave.samples().first().unwrap().1;
            assert!(wave.samples().iter().all(|(_, m)| *m == first));
        }
    }

    #[test]
    fn simulate_rejects_invalid_netlists() {
        let mut netlist = gate_circuit(GateMode::Nand);
        let out = netlist.cells[0].output;
        netlist.cells[0].inputs[0] = out;
        let err = simulate(&netlist, &SimConfig::defaults_for(&netlist)).unwrap_err();
        assert!(matches!(err, EngineError::UnvalidatedNetlist(_)));
    }

    #[test]
    fn write_phase_too_short_is_reported() {
        let mut netlist = gate_circuit(GateMode::Xor);
        netlist.phase.write_fraction = 1e-5; // 5 ps window, pulse needs 20 ns
        let err = simulate(&netlist, &SimConfig::defaults_for(&netlist)).unwrap_err();
        assert!(matches!(err, EngineError::WritePhaseTooShort { .. }));
    }

    #[test]
    fn run_write_phase_programs_control_branch() {
        let netlist = gate_circuit(GateMode::Xor);
        let states = netlist.initial_states();
        let params = netlist.params();
        let rc = netlist.device_id("OUT.rc").unwrap();
        let targets = [FrameTarget {
            device: rc,
            target: TrainingTarget::SetLow,
        }];
        let window = netlist.phase().write_fraction * netlist.phase().frame_period;
        let after =
            run_write_phase(&netlist, &states, &targets, params.max_step(), window).unwrap();
        let m = device::memristance(after[rc.index()], params);
        assert!(m <= 1.01 * params.r_low(), "m = {m}");
        // Untargeted devices are untouched, bit for bit.
        for (i, (a, b)) in states.iter().zip(&after).enumerate() {
            if i != rc.index() {
                assert_eq!(a.x().to_bits(), b.x().to_bits());
            }
        }
    }

    #[test]
    fn run_write_phase_empty_targets_is_identity() {
        let netlist = gate_circuit(GateMode::Xor);
        let states = netlist.initial_states();
        let after = run_write_phase(&netlist, &states, &[], 1e-10, 0.0).unwrap();
        for (a, b) in states.iter().zip(&after) {
            assert_eq!(a.x().to_bits(), b.x().to_bits());
        }
    }

    #[test]
    fn run_write_phase_reprogramming_is_near_idempotent() {
        let netlist = gate_circuit(GateMode::Xor);
        let states = netlist.initial_states();
        let params = netlist.params();
        let rc = netlist.device_id("OUT.rc").unwrap();
        let targets = [FrameTarget {
            device: rc,
            target: TrainingTarget::SetHigh, // already high
        }];
        let after = run_write_phase(&netlist, &states, &targets, params.max_step(), 25e-9).unwrap();
        assert!((after[rc.index()].x() - states[rc.index()].x()).abs() < 1e-3);
    }

    #[test]
    fn switches_gate_by_phase() {
        let mut b = NetlistBuilder::new();
        let src = b.const_source("V", "IN", 1.0);
        let tap_r = b.node("TAP_R");
        let tap_w = b.node("TAP_W");
        b.switch("SR", src, tap_r, crate::circuit::SwitchPhase::Read);
        b.switch("SW", src, tap_w, crate::circuit::SwitchPhase::Write);
        let netlist = b.finish();
        let states = netlist.initial_states();
        let src_vals = source_values_at(&netlist, 0.0);
        let v = evaluate_read_step(&netlist, &states, &src_vals).unwrap();
        assert_eq!(v.get(&netlist, "TAP_R").unwrap(), 1.0);
        assert_eq!(v.get(&netlist, "TAP_W").unwrap(), 0.0);
    }

    #[test]
    fn standalone_memristor_programs_through_write_switch() {
        // A +/-3.5 V training source reaches the device only during write
        // windows; each frame flips the programmed bound.
        let mut b = NetlistBuilder::new();
        let drive = b.pulse_source("VTR", "DRIVE", -3.5, 3.5, 1e-6, 0.5, 0.0);
        let top = b.node("TOP");
        b.switch("SW1", drive, top, crate::circuit::SwitchPhase::Write);
        let gnd = b.ground_node();
        b.memristor("M1", top, gnd, 0.0);
        let netlist = b.finish();
        let config = SimConfig {
            t_end: 2e-6,
            ..SimConfig::defaults_for(&netlist)
        };
        let result = simulate(&netlist, &config).unwrap();
        let wave = result.device("M1").unwrap();
        let params = netlist.params();
        // +3.5 V holds the high-resistance state, -3.5 V sets low, and so on.
        assert!(wave.value_at(0.4e-6) >= 0.99 * params.r_off());
        assert!(wave.value_at(0.9e-6) <= 1.01 * params.r_on());
        assert!(wave.value_at(1.4e-6) >= 0.99 * params.r_off());
        assert!(wave.value_at(1.9e-6) <= 1.01 * params.r_on());
    }

    #[test]
    fn supra_threshold_read_step_reports_step_too_large() {
        // A DC training-level source wired straight across a memristor would
        // drift during READ, where the sampling step exceeds the device
        // stability bound.
        let mut b = NetlistBuilder::new();
        let top = b.const_source("V", "TOP", 3.5);
        let gnd = b.ground_node();
        b.memristor("M1", top, gnd, 0.5);
        let netlist = b.finish();
        let err = simulate(&netlist, &SimConfig::defaults_for(&netlist)).unwrap_err();
        assert!(matches!(
            err,
            EngineError::Device(DeviceError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn read_samples_agree_with_closed_form_cell() {
        // Every recorded read sample of the cell equals the closed-form
        // divider/inverter evaluation of that instant's recorded inputs.
        let netlist = crate::circuit::nandnor_demo();
        let config = SimConfig::defaults_for(&netlist);
        let result = simulate(&netlist, &config).unwrap();
        let phase = netlist.phase();
        let params = netlist.params();
        let cell = &netlist.cells()[0];
        let m = params.r_off(); // all branches stay at the high bound
        let cfg = crate::cell::CellConfig::new(vec![m, m], m, cell.v_th, cell.v_dd).unwrap();
        let vo_wave = result.node("U1.vo").unwrap();
        let out_wave = result.node("OUT").unwrap();
        let mut checked = 0;
        for (t, vo) in vo_wave.samples() {
            let in_frame = t.rem_euclid(phase.frame_period);
            if in_frame < phase.write_fraction * phase.frame_period {
                continue; // write-phase samples hold the previous read value
            }
            let volts = [
                result.node("V1").unwrap().value_at(*t),
                result.node("V2").unwrap().value_at(*t),
            ];
            let vc = result.node("VC").unwrap().value_at(*t);
            let (exp_vo, exp_out) = crate::cell::evaluate_cell(&cfg, &volts, vc);
            assert_eq!(*vo, exp_vo, "v_o at t = {t}");
            assert_eq!(out_wave.value_at(*t), exp_out, "out at t = {t}");
            checked += 1;
        }
        assert!(checked > 500);
    }

    #[test]
    fn waveform_times_strictly_increase() {
        let netlist = xor_demo();
        let result = simulate(&netlist, &SimConfig::defaults_for(&netlist)).unwrap();
        for wave in result.waveforms.values() {
            for pair in wave.samples().windows(2) {
                assert!(pair[0].0 < pair[1].0, "{}", wave.name());
            }
        }
    }

    #[test]
    fn xor_modes_agree_on_decoded_outputs() {
        let netlist = xor_demo();
        let phys = simulate(&netlist, &SimConfig::defaults_for(&netlist)).unwrap();
        let behav = simulate(&netlist, &behavioral(&netlist)).unwrap();
        let out_p = phys.node("OUT").unwrap();
        let out_b = behav.node("OUT").unwrap();
        for (t, v) in out_b.samples() {
            let vb = decode_bit(*v, 1.0);
            let vp = decode_bit(out_p.value_at(*t), 1.0);
            assert_eq!(vb, vp, "modes disagree at t = {t}");
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let netlist = nandnor_demo();
        let cfg = SimConfig::defaults_for(&netlist);
        let a = simulate(&netlist, &cfg).unwrap();
        let b = simulate(&netlist, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn behavioral_keeps_non_control_states_frozen() {
        let netlist = xor_demo();
        let result = simulate(&netlist, &behavioral(&netlist)).unwrap();
        let trained_rc: Vec<&str> = netlist
            .cells()
            .iter()
            .filter(|c| c.policy == ControlPolicy::Trained)
            .map(|c| netlist.device_name(c.control_device))
            .collect();
        assert_eq!(trained_rc, ["OUT.rc"]);
        for dev in netlist.devices() {
            if trained_rc.contains(&dev.name.as_str()) {
                continue; // the trained control branch may jump
            }
            let wave = result.device(&dev.name).unwrap();
            let first = wave.samples().first().unwrap().1;
            assert!(
                wave.samples().iter().all(|(_, m)| *m == first),
                "{} drifted",
                dev.name
            );
        }
    }
}
