//! Programmatic netlist construction: a low-level builder plus the gate and
//! adder circuits used throughout the test and verification surface.
//!
//! Gate naming convention: a gate named `g` drives an output node named `g`;
//! every cell `c` owns a divider node `c.vo` and memristors `c.r1`, `c.r2`,
//! `c.rc`. AND and OR are a NAND/NOR cell plus an ideal inverter; XOR is a
//! trained main cell whose control node is fed by a NOR cell flagged as
//! control circuitry.

use super::*;
use crate::cell::GateMode;
use crate::device::ResistanceLevel;

/// Optional knobs for [`NetlistBuilder::cell`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellOptions {
    pub kind: GateKind,
    pub role: CellRole,
    pub policy: ControlPolicy,
    pub r1: ResistanceLevel,
    pub r2: ResistanceLevel,
    pub rc: ResistanceLevel,
    pub v_th: f64,
    pub v_dd: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            kind: GateKind::Cell,
            role: CellRole::Logic,
            policy: ControlPolicy::Applied,
            r1: ResistanceLevel::High,
            r2: ResistanceLevel::High,
            rc: ResistanceLevel::High,
            v_th: 0.5,
            v_dd: 1.0,
        }
    }
}

pub struct NetlistBuilder {
    node_names: Vec<String>,
    node_index: BTreeMap<String, u32>,
    devices: Vec<Device>,
    cells: Vec<Cell>,
    inverters: Vec<Inverter>,
    switches: Vec<Switch>,
    memristors: Vec<MemristorElement>,
    sources: Vec<Source>,
    phase: PhaseSchedule,
    params: MemristorParams,
    rail0: Option<NodeId>,
    rail1: Option<NodeId>,
}

impl Default for NetlistBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::with_params(MemristorParams::default())
    }

    pub fn with_params(params: MemristorParams) -> Self {
        let mut b = Self {
            node_names: Vec::new(),
            node_index: BTreeMap::new(),
            devices: Vec::new(),
            cells: Vec::new(),
            inverters: Vec::new(),
            switches: Vec::new(),
            memristors: Vec::new(),
            sources: Vec::new(),
            phase: PhaseSchedule::default(),
            params,
            rail0: None,
            rail1: None,
        };
        b.node("0");
        b
    }

    pub fn set_phase(&mut self, frame_period: f64, write_fraction: f64) {
        self.phase = PhaseSchedule {
            frame_period,
            write_fraction,
        };
    }

    pub fn params(&self) -> &MemristorParams {
        &self.params
    }

    /// The ground node, always present.
    pub fn ground_node(&mut self) -> NodeId {
        self.node("0")
    }

    /// Interns a node name.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(i) = self.node_index.get(name) {
            return NodeId(*i);
        }
        let id = self.node_names.len() as u32;
        self.node_names.push(name.to_string());
        self.node_index.insert(name.to_string(), id);
        NodeId(id)
    }

    pub fn source(&mut self, name: &str, node: &str, wave: SourceWave) -> NodeId {
        let node = self.node(node);
        self.sources.push(Source {
            name: name.to_string(),
            node,
            wave,
        });
        node
    }

    pub fn const_source(&mut self, name: &str, node: &str, volts: f64) -> NodeId {
        self.source(name, node, SourceWave::Const(volts))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn pulse_source(
        &mut self,
        name: &str,
        node: &str,
        low: f64,
        high: f64,
        period: f64,
        duty: f64,
        delay: f64,
    ) -> NodeId {
        self.source(
            name,
            node,
            SourceWave::Pulse {
                low,
                high,
                period,
                duty,
                delay,
            },
        )
    }

    fn add_device(&mut self, name: String, level: ResistanceLevel) -> DeviceId {
        let id = DeviceId(self.devices.len() as u32);
        self.devices.push(Device {
            name,
            initial_x: self.params.level_state(level).x(),
        });
        id
    }

    /// Adds a threshold cell. The divider node `<name>.vo` and the memristors
    /// `<name>.r1`, `<name>.r2`, `<name>.rc` are created automatically.
    pub fn cell(
        &mut self,
        name: &str,
        inputs: [NodeId; 2],
        control: NodeId,
        output: NodeId,
        opts: CellOptions,
    ) -> NodeId {
        let divider_node = self.node(&format!("{name}.vo"));
        let r1 = self.add_device(format!("{name}.r1"), opts.r1);
        let r2 = self.add_device(format!("{name}.r2"), opts.r2);
        let rc = self.add_device(format!("{name}.rc"), opts.rc);
        self.cells.push(Cell {
            name: name.to_string(),
            inputs: inputs.to_vec(),
            control,
            divider_node,
            output,
            input_devices: vec![r1, r2],
            control_device: rc,
            v_th: opts.v_th,
            v_dd: opts.v_dd,
            policy: opts.policy,
            kind: opts.kind,
            role: opts.role,
        });
        output
    }

    pub fn inverter(
        &mut self,
        name: &str,
        input: NodeId,
        output: NodeId,
        v_th: f64,
        v_dd: f64,
    ) -> NodeId {
        self.inverters.push(Inverter {
            name: name.to_string(),
            input,
            output,
            v_th,
            v_dd,
        });
        output
    }

    pub fn switch(
        &mut self,
        name: &str,
        input: NodeId,
        output: NodeId,
        phase: SwitchPhase,
    ) -> NodeId {
        self.switches.push(Switch {
            name: name.to_string(),
            input,
            output,
            phase,
        });
        output
    }

    /// Adds a standalone two-terminal memristor with an explicit initial state.
    pub fn memristor(&mut self, name: &str, a: NodeId, b: NodeId, initial_x: f64) -> DeviceId {
        let id = DeviceId(self.devices.len() as u32);
        self.devices.push(Device {
            name: name.to_string(),
            initial_x,
        });
        self.memristors.push(MemristorElement { device: id, a, b });
        id
    }

    /// Constant-0 control rail, created on first use.
    pub fn rail0(&mut self) -> NodeId {
        if let Some(n) = self.rail0 {
            return n;
        }
        let n = self.const_source("VC0", "vc0", 0.0);
        self.rail0 = Some(n);
        n
    }

    /// Constant logic-high control rail, created on first use.
    pub fn rail1(&mut self) -> NodeId {
        if let Some(n) = self.rail1 {
            return n;
        }
        let n = self.const_source("VC1", "vc1", 1.0);
        self.rail1 = Some(n);
        n
    }

    pub fn nand(&mut self, name: &str, a: NodeId, b: NodeId) -> NodeId {
        let vc = self.rail0();
        let out = self.node(name);
        self.cell(
            name,
            [a, b],
            vc,
            out,
            CellOptions {
                kind: GateKind::Nand,
                ..CellOptions::default()
            },
        )
    }

    pub fn nor(&mut self, name: &str, a: NodeId, b: NodeId) -> NodeId {
        let vc = self.rail1();
        let out = self.node(name);
        self.cell(
            name,
            [a, b],
            vc,
            out,
            CellOptions {
                kind: GateKind::Nor,
                ..CellOptions::default()
            },
        )
    }

    /// XOR: a trained main cell whose control branch is reprogrammed each
    /// frame from the NOR of the inputs. The NOR cell is control circuitry
    /// and does not count toward the gate census.
    pub fn xor(&mut self, name: &str, a: NodeId, b: NodeId) -> NodeId {
        let vc1 = self.rail1();
        let ctl_out = self.node(&format!("{name}.c"));
        self.cell(
            &format!("{name}.ctl"),
            [a, b],
            vc1,
            ctl_out,
            CellOptions {
                kind: GateKind::Nor,
                role: CellRole::Control,
                ..CellOptions::default()
            },
        );
        let out = self.node(name);
        self.cell(
            name,
            [a, b],
            ctl_out,
            out,
            CellOptions {
                kind: GateKind::Xor,
                policy: ControlPolicy::Trained,
                ..CellOptions::default()
            },
        )
    }

    pub fn not(&mut self, name: &str, a: NodeId) -> NodeId {
        let out = self.node(name);
        self.inverter(name, a, out, 0.5, 1.0)
    }

    pub fn and(&mut self, name: &str, a: NodeId, b: NodeId) -> NodeId {
        let n = self.nand(&format!("{name}.n"), a, b);
        self.not(name, n)
    }

    pub fn or(&mut self, name: &str, a: NodeId, b: NodeId) -> NodeId {
        let n = self.nor(&format!("{name}.n"), a, b);
        self.not(name, n)
    }

    /// Left fold of 2-input ANDs; the final gate carries `name`.
    pub fn and_chain(&mut self, name: &str, nodes: &[NodeId]) -> NodeId {
        self.fold_chain(name, nodes, |b, n, x, y| b.and(n, x, y))
    }

    /// Left fold of 2-input ORs; the final gate carries `name`.
    pub fn or_chain(&mut self, name: &str, nodes: &[NodeId]) -> NodeId {
        self.fold_chain(name, nodes, |b, n, x, y| b.or(n, x, y))
    }

    fn fold_chain(
        &mut self,
        name: &str,
        nodes: &[NodeId],
        mut gate: impl FnMut(&mut Self, &str, NodeId, NodeId) -> NodeId,
    ) -> NodeId {
        assert!(!nodes.is_empty(), "chain over no inputs");
        let mut acc = nodes[0];
        for (j, node) in nodes.iter().enumerate().skip(1) {
            let gate_name = if j + 1 == nodes.len() {
                name.to_string()
            } else {
                format!("{name}.x{j}")
            };
            acc = gate(self, &gate_name, acc, *node);
        }
        acc
    }

    pub fn finish(self) -> Netlist {
        Netlist {
            node_names: self.node_names,
            node_index: self.node_index,
            devices: self.devices,
            cells: self.cells,
            inverters: self.inverters,
            switches: self.switches,
            memristors: self.memristors,
            sources: self.sources,
            phase: self.phase,
            params: self.params,
        }
    }
}

/// Single reconfigurable cell with explicit source waveforms on both inputs
/// and the control terminal. The census kind follows the control wave:
/// constant low is a NAND, constant high a NOR, anything else a bare cell.
pub fn build_gate_cell(v1: SourceWave, v2: SourceWave, vc: SourceWave) -> Netlist {
    let kind = match vc {
        SourceWave::Const(v) if v < 0.5 => GateKind::Nand,
        SourceWave::Const(_) => GateKind::Nor,
        SourceWave::Pulse { .. } => GateKind::Cell,
    };
    let mut b = NetlistBuilder::new();
    let a = b.source("V1", "V1", v1);
    let bb = b.source("V2", "V2", v2);
    let c = b.source("VC", "VC", vc);
    let out = b.node("OUT");
    b.cell(
        "U1",
        [a, bb],
        c,
        out,
        CellOptions {
            kind,
            ..CellOptions::default()
        },
    );
    b.finish()
}

/// The pulsed NAND/NOR demonstration: V1 = 1 us, V2 = 2 us, VC = 4 us, all
/// 50% duty, one cell on node OUT.
pub fn nandnor_demo() -> Netlist {
    let pulse = |period| SourceWave::Pulse {
        low: 0.0,
        high: 1.0,
        period,
        duty: 0.5,
        delay: 0.0,
    };
    build_gate_cell(pulse(1e-6), pulse(2e-6), pulse(4e-6))
}

/// The pulsed XOR demonstration: V1 = 1 us, V2 = 2 us, 50% duty, the XOR pair
/// on node OUT.
pub fn xor_demo() -> Netlist {
    let mut b = NetlistBuilder::new();
    let a = b.pulse_source("V1", "V1", 0.0, 1.0, 1e-6, 0.5, 0.0);
    let v2 = b.pulse_source("V2", "V2", 0.0, 1.0, 2e-6, 0.5, 0.0);
    b.xor("OUT", a, v2);
    b.finish()
}

/// One gate with constant sources A and B, output node OUT.
pub fn gate_circuit(mode: GateMode) -> Netlist {
    let mut b = NetlistBuilder::new();
    let a = b.const_source("A", "A", 0.0);
    let bb = b.const_source("B", "B", 0.0);
    match mode {
        GateMode::Nand => b.nand("OUT", a, bb),
        GateMode::Nor => b.nor("OUT", a, bb),
        GateMode::Xor => b.xor("OUT", a, bb),
    };
    b.finish()
}

/// AND gate (NAND cell plus inverter) with constant sources A and B.
pub fn and_circuit() -> Netlist {
    let mut b = NetlistBuilder::new();
    let a = b.const_source("A", "A", 0.0);
    let bb = b.const_source("B", "B", 0.0);
    b.and("OUT", a, bb);
    b.finish()
}

/// Half adder: SUM = XOR(A, B), CARRY = AND(A, B).
pub fn half_adder_circuit() -> Netlist {
    let mut b = NetlistBuilder::new();
    let a = b.const_source("A", "A", 0.0);
    let bb = b.const_source("B", "B", 0.0);
    b.xor("SUM", a, bb);
    b.and("CARRY", a, bb);
    b.finish()
}

/// Full adder: SUM = XOR(XOR(A, B), CIN), COUT = OR(AND(A, B), AND(CIN, XOR(A, B))).
pub fn full_adder_circuit() -> Netlist {
    let mut b = NetlistBuilder::new();
    let a = b.const_source("A", "A", 0.0);
    let bb = b.const_source("B", "B", 0.0);
    let cin = b.const_source("CIN", "CIN", 0.0);
    let p = b.xor("P", a, bb);
    b.xor("SUM", p, cin);
    let g = b.and("G", a, bb);
    let t = b.and("T", p, cin);
    b.or("COUT", g, t);
    b.finish()
}

/// 4-bit carry-lookahead adder over constant sources A0..A3, B0..B3, CIN
/// (bit 0 is least significant), sums on S0..S3 and carry out on COUT.
///
/// Decomposition: propagate P_i = A_i xor B_i, generate G_i = A_i and B_i,
/// flattened two-level lookahead C_{i+1} = G_i + P_i G_{i-1} + ... + P_i..P_0 CIN,
/// sums S_i = P_i xor C_i. Gate census: 8 xor, 24 nand, 10 nor, 34 not.
pub fn cla4_circuit() -> Netlist {
    let mut b = NetlistBuilder::new();
    let a: Vec<NodeId> = (0..4)
        .map(|i| {
            let name = format!("A{i}");
            b.const_source(&name, &name, 0.0)
        })
        .collect();
    let bv: Vec<NodeId> = (0..4)
        .map(|i| {
            let name = format!("B{i}");
            b.const_source(&name, &name, 0.0)
        })
        .collect();
    let cin = b.const_source("CIN", "CIN", 0.0);

    let p: Vec<NodeId> = (0..4)
        .map(|i| b.xor(&format!("P{i}"), a[i], bv[i]))
        .collect();
    let g: Vec<NodeId> = (0..4)
        .map(|i| b.and(&format!("G{i}"), a[i], bv[i]))
        .collect();

    // Lookahead carries, flattened product terms.
    let mut carries = vec![cin];
    for i in 0..4 {
        let name = if i == 3 {
            "COUT".to_string()
        } else {
            format!("C{}", i + 1)
        };
        let mut terms = vec![g[i]];
        for j in (0..=i).rev() {
            // P_i P_{i-1} .. P_j * (G_{j-1} or CIN)
            let mut product: Vec<NodeId> = (j..=i).map(|m| p[m]).collect();
            product.push(if j == 0 { cin } else { g[j - 1] });
            terms.push(b.and_chain(&format!("{name}.t{j}"), &product));
        }
        carries.push(b.or_chain(&name, &terms));
    }

    for i in 0..4 {
        b.xor(&format!("S{i}"), p[i], carries[i]);
    }
    b.finish()
}
