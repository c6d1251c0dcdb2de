//! Typed circuit graph: threshold cells, standalone memristors, ideal
//! inverters, phase-controlled switches and voltage sources wired by named
//! nodes, plus structural validation and a read-phase topological order.
//!
//! A validated netlist is immutable and shareable across threads; all mutable
//! per-run state (the memristor states) lives in the engine's state vector,
//! cloned per simulation.

mod builders;

pub use builders::{
    and_circuit, build_gate_cell, cla4_circuit, full_adder_circuit, gate_circuit,
    half_adder_circuit, nandnor_demo, xor_demo, CellOptions, NetlistBuilder,
};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::device::{MemristorParams, MemristorState};

/// Index of a named electrical node. Node 0 is always ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

/// Index of a memristor instance in the netlist's device table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeviceId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl DeviceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// How a cell's control branch is managed.
///
/// `Applied` cells read whatever voltage sits on the control node through a
/// fixed control resistance. `Trained` cells additionally have their control
/// resistance reprogrammed every frame from the decoded control voltage: low
/// resistance when the control bit is 1, high when it is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlPolicy {
    Applied,
    Trained,
}

/// Whether a cell counts as a logic gate or as control circuitry.
/// Control circuitry is excluded from cost totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRole {
    Logic,
    Control,
}

/// Logical gate classification used by the census and the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GateKind {
    Nand,
    Nor,
    Xor,
    Not,
    /// Unclassified bare threshold cell.
    Cell,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::Nand => "nand",
            GateKind::Nor => "nor",
            GateKind::Xor => "xor",
            GateKind::Not => "not",
            GateKind::Cell => "cell",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nand" => Ok(GateKind::Nand),
            "nor" => Ok(GateKind::Nor),
            "xor" => Ok(GateKind::Xor),
            "not" => Ok(GateKind::Not),
            "cell" => Ok(GateKind::Cell),
            other => Err(format!("unknown gate kind '{other}'")),
        }
    }
}

/// A memristor instance: name plus initial normalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub name: String,
    pub initial_x: f64,
}

/// Two-input threshold cell. Owns three memristor instances (two input
/// branches and the control branch) and an ideal output inverter. The divider
/// node carries the analog weighted average; the output node carries the
/// inverter's rail-to-rail decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub inputs: Vec<NodeId>,
    pub control: NodeId,
    pub divider_node: NodeId,
    pub output: NodeId,
    pub input_devices: Vec<DeviceId>,
    pub control_device: DeviceId,
    pub v_th: f64,
    pub v_dd: f64,
    pub policy: ControlPolicy,
    pub kind: GateKind,
    pub role: CellRole,
}

/// Ideal inverter element.
#[derive(Debug, Clone, PartialEq)]
pub struct Inverter {
    pub name: String,
    pub input: NodeId,
    pub output: NodeId,
    pub v_th: f64,
    pub v_dd: f64,
}

/// Conducting phase of an ideal switch: write switches close during WRITE,
/// read switches during READ. A non-conducting switch drives its output to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchPhase {
    Write,
    Read,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Switch {
    pub name: String,
    pub input: NodeId,
    pub output: NodeId,
    pub phase: SwitchPhase,
}

/// Standalone two-terminal memristor element.
#[derive(Debug, Clone, PartialEq)]
pub struct MemristorElement {
    pub device: DeviceId,
    pub a: NodeId,
    pub b: NodeId,
}

/// Piecewise voltage source waveform.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceWave {
    Const(f64),
    Pulse {
        low: f64,
        high: f64,
        period: f64,
        duty: f64,
        delay: f64,
    },
}

impl SourceWave {
    /// Instantaneous value: high while `(t - delay) mod period < duty * period`.
    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            SourceWave::Const(v) => v,
            SourceWave::Pulse {
                low,
                high,
                period,
                duty,
                delay,
            } => {
                let phase = (t - delay).rem_euclid(period);
                if phase < duty * period {
                    high
                } else {
                    low
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub name: String,
    pub node: NodeId,
    pub wave: SourceWave,
}

/// Frame timing: the leading `write_fraction` of each frame is the WRITE
/// phase, the remainder the READ phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSchedule {
    pub frame_period: f64,
    pub write_fraction: f64,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            frame_period: 0.5e-6,
            write_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("no source named '{0}'")]
    UnknownSource(String),
    #[error("source '{0}' is not a constant source")]
    NotConstSource(String),
}

/// Structural defects reported by [`Netlist::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationIssue {
    #[error("element '{element}' references a nonexistent node")]
    DanglingTerminal { element: String },
    #[error("duplicate element name '{0}'")]
    DuplicateName(String),
    #[error("netlist has no ground node")]
    MissingGround,
    #[error("element '{element}' drives the ground node")]
    GroundDriven { element: String },
    #[error("node '{node}' is driven by both '{first}' and '{second}'")]
    MultipleDrivers {
        node: String,
        first: String,
        second: String,
    },
    #[error("combinational cycle through: {}", members.join(" -> "))]
    CombinationalCycle { members: Vec<String> },
    #[error("bad phase schedule: {0}")]
    BadPhase(String),
    #[error("bad element '{element}': {reason}")]
    BadElement { element: String, reason: String },
}

/// One entry of the read-phase evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalStep {
    Cell(usize),
    Inverter(usize),
    Switch(usize),
}

/// The circuit graph. Construct through [`NetlistBuilder`] or the DSL parser.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub(crate) node_names: Vec<String>,
    pub(crate) node_index: BTreeMap<String, u32>,
    pub(crate) devices: Vec<Device>,
    pub(crate) cells: Vec<Cell>,
    pub(crate) inverters: Vec<Inverter>,
    pub(crate) switches: Vec<Switch>,
    pub(crate) memristors: Vec<MemristorElement>,
    pub(crate) sources: Vec<Source>,
    pub(crate) phase: PhaseSchedule,
    pub(crate) params: MemristorParams,
}

pub const GROUND: NodeId = NodeId(0);

impl Netlist {
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.index()]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).map(|i| NodeId(*i))
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.node_names.iter().map(|s| s.as_str())
    }

    pub fn params(&self) -> &MemristorParams {
        &self.params
    }

    pub fn phase(&self) -> PhaseSchedule {
        self.phase
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn inverters(&self) -> &[Inverter] {
        &self.inverters
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    pub fn memristor_elements(&self) -> &[MemristorElement] {
        &self.memristors
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn device_name(&self, id: DeviceId) -> &str {
        &self.devices[id.index()].name
    }

    pub fn device_id(&self, name: &str) -> Option<DeviceId> {
        self.devices
            .iter()
            .position(|d| d.name == name)
            .map(|i| DeviceId(i as u32))
    }

    /// Initial memristor states, one per device table entry.
    pub fn initial_states(&self) -> Vec<MemristorState> {
        self.devices
            .iter()
            .map(|d| MemristorState::new(d.initial_x).expect("validated initial state"))
            .collect()
    }

    pub fn has_trained_cells(&self) -> bool {
        self.cells
            .iter()
            .any(|c| c.policy == ControlPolicy::Trained)
    }

    /// Logic-high level: the largest supply among cells and inverters, 1 V
    /// when the netlist has neither.
    pub fn logic_high(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.v_dd)
            .chain(self.inverters.iter().map(|i| i.v_dd))
            .fold(1.0, f64::max)
    }

    /// Replaces the value of a constant source (used by exhaustive sweeps).
    pub fn set_const_source(&mut self, name: &str, volts: f64) -> Result<(), CircuitError> {
        let src = self
            .sources
            .iter_mut()
            .find(|s| s.name == name)
            .ok_or_else(|| CircuitError::UnknownSource(name.to_string()))?;
        match src.wave {
            SourceWave::Const(_) => {
                src.wave = SourceWave::Const(volts);
                Ok(())
            }
            _ => Err(CircuitError::NotConstSource(name.to_string())),
        }
    }

    /// Count of logic gates by kind. Cells flagged as control circuitry are
    /// excluded; inverters count as `not` gates.
    pub fn gate_census(&self) -> BTreeMap<GateKind, usize> {
        let mut census = BTreeMap::new();
        for cell in &self.cells {
            if cell.role == CellRole::Logic {
                *census.entry(cell.kind).or_insert(0) += 1;
            }
        }
        if !self.inverters.is_empty() {
            *census.entry(GateKind::Not).or_insert(0) += self.inverters.len();
        }
        census
    }

    fn element_names(&self) -> impl Iterator<Item = &str> {
        self.devices
            .iter()
            .map(|d| d.name.as_str())
            .chain(self.cells.iter().map(|c| c.name.as_str()))
            .chain(self.inverters.iter().map(|i| i.name.as_str()))
            .chain(self.switches.iter().map(|s| s.name.as_str()))
            .chain(self.sources.iter().map(|s| s.name.as_str()))
    }

    /// Structural validation. An empty result means every invariant holds:
    /// terminals reference existing nodes, names are unique, exactly one
    /// ground exists, every node has at most one driver, and the read-phase
    /// dataflow is acyclic.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let n_nodes = self.node_names.len() as u32;
        let n_devices = self.devices.len() as u32;

        if self.node_names.first().map(String::as_str) != Some("0") {
            issues.push(ValidationIssue::MissingGround);
        }

        let mut seen = BTreeMap::new();
        for name in self.element_names() {
            if seen.insert(name.to_string(), ()).is_some() {
                issues.push(ValidationIssue::DuplicateName(name.to_string()));
            }
        }

        let check_node = |element: &str, node: NodeId, issues: &mut Vec<ValidationIssue>| {
            if node.0 >= n_nodes {
                issues.push(ValidationIssue::DanglingTerminal {
                    element: element.to_string(),
                });
            }
        };

        for cell in &self.cells {
            if cell.inputs.len() != 2 || cell.input_devices.len() != 2 {
                issues.push(ValidationIssue::BadElement {
                    element: cell.name.clone(),
                    reason: format!(
                        "cell must own exactly 3 memristors (2 inputs + control), has {} inputs",
                        cell.inputs.len()
                    ),
                });
            }
            for node in cell
                .inputs
                .iter()
                .chain([&cell.control, &cell.divider_node, &cell.output])
            {
                check_node(&cell.name, *node, &mut issues);
            }
            for dev in cell.input_devices.iter().chain([&cell.control_device]) {
                if dev.0 >= n_devices {
                    issues.push(ValidationIssue::DanglingTerminal {
                        element: cell.name.clone(),
                    });
                }
            }
            if !(cell.v_th > 0.0 && cell.v_th < cell.v_dd) {
                issues.push(ValidationIssue::BadElement {
                    element: cell.name.clone(),
                    reason: "inverter threshold must satisfy 0 < v_th < v_dd".into(),
                });
            }
        }
        for inv in &self.inverters {
            check_node(&inv.name, inv.input, &mut issues);
            check_node(&inv.name, inv.output, &mut issues);
        }
        for sw in &self.switches {
            check_node(&sw.name, sw.input, &mut issues);
            check_node(&sw.name, sw.output, &mut issues);
        }
        for m in &self.memristors {
            let name = self
                .devices
                .get(m.device.index())
                .map(|d| d.name.clone())
                .unwrap_or_else(|| "<memristor>".into());
            check_node(&name, m.a, &mut issues);
            check_node(&name, m.b, &mut issues);
        }
        for src in &self.sources {
            check_node(&src.name, src.node, &mut issues);
            if let SourceWave::Pulse { period, duty, .. } = src.wave {
                if !(period > 0.0) {
                    issues.push(ValidationIssue::BadElement {
                        element: src.name.clone(),
                        reason: format!("pulse period {period} must be positive"),
                    });
                }
                if !(duty > 0.0 && duty <= 1.0) {
                    issues.push(ValidationIssue::BadElement {
                        element: src.name.clone(),
                        reason: format!("duty {duty} outside (0, 1]"),
                    });
                }
            }
        }
        for dev in &self.devices {
            if !(0.0..=1.0).contains(&dev.initial_x) {
                issues.push(ValidationIssue::BadElement {
                    element: dev.name.clone(),
                    reason: format!("initial state {} outside [0, 1]", dev.initial_x),
                });
            }
        }

        if !(self.phase.frame_period > 0.0) {
            issues.push(ValidationIssue::BadPhase(format!(
                "frame period {} must be positive",
                self.phase.frame_period
            )));
        }
        if !(0.0..1.0).contains(&self.phase.write_fraction) {
            issues.push(ValidationIssue::BadPhase(format!(
                "write fraction {} outside [0, 1)",
                self.phase.write_fraction
            )));
        }

        // Single-driver rule over the read dataflow.
        let mut driver: BTreeMap<u32, String> = BTreeMap::new();
        let mut drive = |node: NodeId, element: &str, issues: &mut Vec<ValidationIssue>| {
            if node.0 >= n_nodes {
                return;
            }
            if node == GROUND {
                issues.push(ValidationIssue::GroundDriven {
                    element: element.to_string(),
                });
                return;
            }
            if let Some(first) = driver.get(&node.0) {
                issues.push(ValidationIssue::MultipleDrivers {
                    node: self.node_names[node.index()].clone(),
                    first: first.clone(),
                    second: element.to_string(),
                });
            } else {
                driver.insert(node.0, element.to_string());
            }
        };
        for src in &self.sources {
            drive(src.node, &src.name, &mut issues);
        }
        for cell in &self.cells {
            drive(cell.divider_node, &cell.name, &mut issues);
            drive(cell.output, &cell.name, &mut issues);
        }
        for inv in &self.inverters {
            drive(inv.output, &inv.name, &mut issues);
        }
        for sw in &self.switches {
            drive(sw.output, &sw.name, &mut issues);
        }

        if let Err(cycle) = self.read_topo_order() {
            issues.push(cycle);
        }

        issues
    }

    /// Topological evaluation order of the read-phase dataflow, or the
    /// combinational cycle preventing one.
    pub fn read_topo_order(&self) -> Result<Vec<EvalStep>, ValidationIssue> {
        #[derive(Clone, Copy)]
        enum El {
            Cell(usize),
            Inverter(usize),
            Switch(usize),
        }
        let n_nodes = self.node_names.len();
        let elements: Vec<El> = (0..self.cells.len())
            .map(El::Cell)
            .chain((0..self.inverters.len()).map(El::Inverter))
            .chain((0..self.switches.len()).map(El::Switch))
            .collect();

        // Which element produces each node.
        let mut producer: Vec<Option<usize>> = vec![None; n_nodes];
        for (idx, el) in elements.iter().enumerate() {
            let outs: Vec<NodeId> = match el {
                El::Cell(i) => vec![self.cells[*i].divider_node, self.cells[*i].output],
                El::Inverter(i) => vec![self.inverters[*i].output],
                El::Switch(i) => vec![self.switches[*i].output],
            };
            for node in outs {
                if node.index() < n_nodes {
                    producer[node.index()] = Some(idx);
                }
            }
        }

        let consumed = |el: &El| -> Vec<NodeId> {
            match el {
                El::Cell(i) => {
                    let c = &self.cells[*i];
                    c.inputs.iter().copied().chain([c.control]).collect()
                }
                El::Inverter(i) => vec![self.inverters[*i].input],
                El::Switch(i) => vec![self.switches[*i].input],
            }
        };

        let mut indegree = vec![0usize; elements.len()];
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); elements.len()];
        for (idx, el) in elements.iter().enumerate() {
            for node in consumed(el) {
                if node.index() < n_nodes {
                    if let Some(p) = producer[node.index()] {
                        indegree[idx] += 1;
                        dependents[p].push(idx);
                    }
                }
            }
        }

        let mut queue: std::collections::VecDeque<usize> =
            (0..elements.len()).filter(|i| indegree[*i] == 0).collect();
        let mut order = Vec::with_capacity(elements.len());
        while let Some(idx) = queue.pop_front() {
            order.push(match elements[idx] {
                El::Cell(i) => EvalStep::Cell(i),
                El::Inverter(i) => EvalStep::Inverter(i),
                El::Switch(i) => EvalStep::Switch(i),
            });
            for &d in &dependents[idx] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    queue.push_back(d);
                }
            }
        }

        if order.len() != elements.len() {
            let members: Vec<String> = elements
                .iter()
                .enumerate()
                .filter(|(i, _)| indegree[*i] > 0)
                .map(|(_, el)| match el {
                    El::Cell(i) => self.cells[*i].name.clone(),
                    El::Inverter(i) => self.inverters[*i].name.clone(),
                    El::Switch(i) => self.switches[*i].name.clone(),
                })
                .collect();
            return Err(ValidationIssue::CombinationalCycle { members });
        }
        Ok(order)
    }
}
