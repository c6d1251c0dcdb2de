//! Property suites: device state invariants, divider algebra, parser
//! totality and round-trip identity, and simulation determinism.

use proptest::prelude::*;

use rmtl::cell::{divider_output, CellConfig};
use rmtl::circuit::{
    cla4_circuit, full_adder_circuit, gate_circuit, half_adder_circuit, nandnor_demo, xor_demo,
};
use rmtl::device::{
    apply_training_pulse, memristance, state_derivative, step_state, MemristorParams,
    MemristorState, TrainingTarget,
};
use rmtl::dsl;
use rmtl::engine::{simulate, SimConfig, SimMode};
use rmtl::report::extract_truth_table;
use rmtl::GateMode;

fn params() -> MemristorParams {
    MemristorParams::default()
}

proptest! {
    /// State stays inside [0, 1] for any voltage sequence at valid steps.
    #[test]
    fn device_state_bounded(
        x0 in 0.0..=1.0f64,
        seq in prop::collection::vec((-5.0..5.0f64, 1e-11..5e-10f64), 1..200),
    ) {
        let p = params();
        let mut s = MemristorState::new(x0).unwrap();
        for (v, dt) in seq {
            s = step_state(s, v, dt, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.x()), "x = {}", s.x());
        }
    }

    /// Below the training threshold the state never moves, bit for bit,
    /// whatever the step size.
    #[test]
    fn device_subthreshold_invariance(
        x0 in 0.0..=1.0f64,
        seq in prop::collection::vec((-3.4999..3.4999f64, 1e-12..1e-3f64), 1..300),
    ) {
        let p = params();
        let s0 = MemristorState::new(x0).unwrap();
        let mut s = s0;
        for (v, dt) in seq {
            s = step_state(s, v, dt, &p).unwrap();
        }
        prop_assert_eq!(s.x().to_bits(), s0.x().to_bits());
    }

    /// A full training pulse at the standard write step saturates the device
    /// to within 1% of the target bound from any start state.
    #[test]
    fn device_saturation_from_any_start(x0 in 0.0..=1.0f64, set_high in any::<bool>()) {
        let p = params();
        let dt = p.max_step();
        let target = if set_high { TrainingTarget::SetHigh } else { TrainingTarget::SetLow };
        let s = apply_training_pulse(MemristorState::new(x0).unwrap(), target, dt, &p).unwrap();
        let m = memristance(s, &p);
        match target {
            TrainingTarget::SetHigh => prop_assert!(m >= 0.99 * p.r_off(), "m = {m} from {x0}"),
            TrainingTarget::SetLow => prop_assert!(m <= 1.01 * p.r_on(), "m = {m} from {x0}"),
        }
    }

    /// Under constant supra-threshold drive the state moves monotonically.
    #[test]
    fn device_monotone_under_constant_drive(
        x0 in 0.0..=1.0f64,
        positive in any::<bool>(),
        steps in 1usize..120,
    ) {
        let p = params();
        let v = if positive { p.v_tr() } else { -p.v_tr() };
        let dt = p.max_step();
        let sign = state_derivative(MemristorState::new(x0).unwrap(), v, &p);
        let mut s = MemristorState::new(x0).unwrap();
        let mut prev = s.x();
        for _ in 0..steps {
            s = step_state(s, v, dt, &p).unwrap();
            if sign >= 0.0 {
                prop_assert!(s.x() >= prev);
            } else {
                prop_assert!(s.x() <= prev);
            }
            prev = s.x();
        }
    }

    /// The divider output is a convex combination of the applied voltages.
    #[test]
    fn divider_convexity(
        inputs in prop::collection::vec((-2.0..2.0f64, 1e-1..1e9f64), 1..6),
        control in (-2.0..2.0f64, 1e-1..1e9f64),
    ) {
        let v = divider_output(&inputs, control);
        let all: Vec<f64> = inputs.iter().map(|(v, _)| *v).chain([control.0]).collect();
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        prop_assert!(v >= lo - slack && v <= hi + slack, "{v} outside [{lo}, {hi}]");
    }

    /// With equal input resistances the divider ignores input order.
    #[test]
    fn divider_permutation_symmetry(
        volts in prop::collection::vec(-2.0..2.0f64, 2..6),
        r in 1e0..1e9f64,
        control in (-2.0..2.0f64, 1e0..1e9f64),
        seed in any::<u64>(),
    ) {
        let inputs: Vec<(f64, f64)> = volts.iter().map(|v| (*v, r)).collect();
        let mut shuffled = inputs.clone();
        // Cheap deterministic Fisher-Yates from the seed.
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let a = divider_output(&inputs, control);
        let b = divider_output(&shuffled, control);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    /// The parser is total: any input yields a document or diagnostics, and
    /// every diagnostic points inside the text.
    #[test]
    fn parser_totality(text in ".{0,400}") {
        match dsl::parse(&text) {
            Ok(_) => {}
            Err(diags) => {
                let line_count = text.lines().count().max(1);
                for d in &diags.0 {
                    prop_assert!(d.line >= 1 && d.line as usize <= line_count);
                    let line_len = text.lines().nth(d.line as usize - 1).map_or(0, str::len);
                    prop_assert!(d.col >= 1 && d.col as usize <= line_len + 1,
                        "col {} outside line of length {line_len}", d.col);
                }
            }
        }
    }

    /// parse(serialize(doc)) == doc for generated source declarations.
    #[test]
    fn parser_roundtrip_sources(
        decls in prop::collection::vec(
            (
                "[A-Za-z][A-Za-z0-9_]{0,6}",
                -10.0..10.0f64,
                0.0..10.0f64,
                1e-9..1e-3f64,
                0.01..1.0f64,
                0.0..1e-3f64,
                any::<bool>(),
            ),
            1..8,
        )
    ) {
        let mut text = String::new();
        for (i, (node, low, high, period, duty, delay, constant)) in decls.iter().enumerate() {
            if *constant {
                text.push_str(&format!("vconst S{i} node={node} value={low}\n"));
            } else {
                text.push_str(&format!(
                    "vpulse S{i} node={node} low={low} high={high} period={period} duty={duty} delay={delay}\n"
                ));
            }
        }
        let doc = dsl::parse(&text).unwrap();
        let round = dsl::parse(&dsl::serialize(&doc)).unwrap();
        prop_assert_eq!(doc, round);
    }
}

#[test]
fn integrator_self_convergence() {
    let p = params();
    let dt = p.max_step();
    for target in [TrainingTarget::SetHigh, TrainingTarget::SetLow] {
        for x0 in [0.0, 1.0] {
            let s0 = MemristorState::new(x0).unwrap();
            let coarse = apply_training_pulse(s0, target, dt, &p).unwrap();
            let fine = apply_training_pulse(s0, target, dt / 2.0, &p).unwrap();
            assert!(
                (coarse.x() - fine.x()).abs() < 1e-3,
                "{target:?} from {x0}: {} vs {}",
                coarse.x(),
                fine.x()
            );
        }
    }
}

#[test]
fn ltg_cell_realization() {
    use rmtl::cell::realizes_ltg;
    use rmtl::LtgSpec;
    let cfg = CellConfig::equal_resistance(2, 1e8, 0.5, 1.0).unwrap();
    assert!(realizes_ltg(
        &cfg,
        &LtgSpec::new(vec![1.0, 1.0], 2.0),
        |_| 0.0
    ));
    assert!(realizes_ltg(
        &cfg,
        &LtgSpec::new(vec![1.0, 1.0], 1.0),
        |_| 1.0
    ));
    assert!(!realizes_ltg(
        &cfg,
        &LtgSpec::new(vec![1.0, 1.0], 1.0),
        |_| 0.0
    ));
}

#[test]
fn simulation_determinism_across_runs() {
    for netlist in [nandnor_demo(), xor_demo()] {
        let cfg = SimConfig::defaults_for(&netlist);
        assert_eq!(
            simulate(&netlist, &cfg).unwrap(),
            simulate(&netlist, &cfg).unwrap()
        );
        let behavioral = SimConfig {
            mode: SimMode::Behavioral,
            ..cfg
        };
        assert_eq!(
            simulate(&netlist, &behavioral).unwrap(),
            simulate(&netlist, &behavioral).unwrap()
        );
    }
}

#[test]
fn halving_read_step_preserves_decoded_tables() {
    let netlist = xor_demo();
    let cfg = SimConfig::defaults_for(&netlist);
    let fine = SimConfig {
        dt_read: cfg.dt_read / 2.0,
        ..cfg
    };
    let t1 = extract_truth_table(
        &simulate(&netlist, &cfg).unwrap(),
        &["V1", "V2"],
        "OUT",
        1.0,
    )
    .unwrap();
    let t2 = extract_truth_table(
        &simulate(&netlist, &fine).unwrap(),
        &["V1", "V2"],
        "OUT",
        1.0,
    )
    .unwrap();
    assert_eq!(t1.rows.len(), t2.rows.len());
    for (a, b) in t1.rows.iter().zip(&t2.rows) {
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.output, b.output);
    }

    let nn = nandnor_demo();
    let cfg = SimConfig::defaults_for(&nn);
    let fine = SimConfig {
        dt_read: cfg.dt_read / 2.0,
        ..cfg
    };
    let t1 = extract_truth_table(
        &simulate(&nn, &cfg).unwrap(),
        &["V1", "V2", "VC"],
        "OUT",
        1.0,
    )
    .unwrap();
    let t2 = extract_truth_table(
        &simulate(&nn, &fine).unwrap(),
        &["V1", "V2", "VC"],
        "OUT",
        1.0,
    )
    .unwrap();
    assert_eq!(t1.rows.len(), t2.rows.len());
    for (a, b) in t1.rows.iter().zip(&t2.rows) {
        assert_eq!((a.inputs.clone(), a.output), (b.inputs.clone(), b.output));
    }
}

#[test]
fn modes_agree_for_every_builtin_circuit() {
    use rmtl::verify::{run_exhaustive, OracleKind};
    let cases = [
        (gate_circuit(GateMode::Nand), OracleKind::Nand),
        (gate_circuit(GateMode::Nor), OracleKind::Nor),
        (gate_circuit(GateMode::Xor), OracleKind::Xor),
        (half_adder_circuit(), OracleKind::HalfAdder),
        (full_adder_circuit(), OracleKind::FullAdder),
        (cla4_circuit(), OracleKind::Cla4),
    ];
    for (netlist, oracle) in cases {
        let behav = run_exhaustive(&netlist, oracle, SimMode::Behavioral).unwrap();
        let phys = run_exhaustive(&netlist, oracle, SimMode::Physical).unwrap();
        assert_eq!(behav, phys, "{oracle:?} modes disagree");
        assert!(
            behav.passed(),
            "{oracle:?} failed: {:?}",
            behav.mismatches.first()
        );
    }
}

#[test]
fn truth_table_extraction_is_idempotent() {
    let netlist = xor_demo();
    let cfg = SimConfig::defaults_for(&netlist);
    let a = extract_truth_table(
        &simulate(&netlist, &cfg).unwrap(),
        &["V1", "V2"],
        "OUT",
        1.0,
    )
    .unwrap();
    let b = extract_truth_table(
        &simulate(&netlist, &cfg).unwrap(),
        &["V1", "V2"],
        "OUT",
        1.0,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn cost_ratio_scales_linearly_with_coefficients() {
    use rmtl::report::{cost_report, CostCoefficients};
    use rmtl::GateKind;
    let mut base = CostCoefficients::default();
    base.set("cmos", GateKind::Xor, 19.4, 0.42);
    base.set("rmtl", GateKind::Xor, 9.4, 0.18);
    let netlist = gate_circuit(GateMode::Xor);
    let r1 = cost_report(&netlist, &base, &["cmos", "rmtl"]).unwrap();
    // Power-of-two scaling keeps float arithmetic exact.
    for lambda in [0.5f64, 2.0, 8.0] {
        let mut scaled = base.clone();
        scaled.set("rmtl", GateKind::Xor, 9.4 * lambda, 0.18 * lambda);
        let r2 = cost_report(&netlist, &scaled, &["cmos", "rmtl"]).unwrap();
        assert_eq!(r2.totals["rmtl"].0, r1.totals["rmtl"].0 * lambda);
        assert_eq!(r2.totals["rmtl"].1, r1.totals["rmtl"].1 * lambda);
        assert_eq!(r2.area_ratio.unwrap(), r1.area_ratio.unwrap() * lambda);
        assert_eq!(r2.power_ratio.unwrap(), r1.power_ratio.unwrap() * lambda);
    }
}
