//! Nonlinear memristor model with voltage-threshold training behavior.
//!
//! The device carries a normalized internal state `x` in `[0, 1]`. Memristance
//! is the linear mixture `M(x) = r_on * x + r_off * (1 - x)`, so `x = 1` is the
//! low-resistance state and `x = 0` the high-resistance state. State drift
//! follows nonlinear dopant dynamics with a Biolek-style window,
//! `dx/dt = k * i * f(x, sign(i))`, gated to exactly zero while the applied
//! voltage magnitude stays below the training threshold `v_tr`. The mobility
//! coefficient `k` is not a free input: it is calibrated numerically so that a
//! constant drive at `v_tr` traverses `x` from 0.01 to 0.99 in `t_switch`.

use std::sync::OnceLock;

use thiserror::Error;

/// Errors produced by device construction and integration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("invalid memristor parameters: {0}")]
    InvalidParams(String),
    #[error("memristor state {0} outside [0, 1]")]
    InvalidState(f64),
    #[error(
        "time step {dt:.3e} s exceeds the stability bound {max:.3e} s under supra-threshold drive"
    )]
    StepTooLarge { dt: f64, max: f64 },
}

/// Which bias direction drives the device toward the high-resistance bound.
///
/// The convention here is that a positive voltage across the (+, -) terminals
/// at or above the training threshold moves the device toward `r_off`
/// (`PositiveSetsHigh`). The opposite variant recovers the more common
/// dopant-drift orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    PositiveSetsHigh,
    PositiveSetsLow,
}

/// Programming target for a training pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingTarget {
    SetHigh,
    SetLow,
}

/// Operational resistance level of a programmed device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResistanceLevel {
    High,
    Low,
}

/// Amplitude and duration of a programming pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub duration: f64,
}

/// Device constants plus the calibrated drift coefficient.
///
/// Construction validates the invariants (`r_off / r_on >= 1`, positive
/// threshold and switching time, `p >= 1`) and runs the `k` calibration, so a
/// value of this type is always internally consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorParams {
    r_on: f64,
    r_off: f64,
    v_tr: f64,
    t_switch: f64,
    p: u32,
    polarity: Polarity,
    drift_coeff: f64,
    x_high: f64,
    x_low: f64,
}

/// Normalized dopant position, held inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorState {
    x: f64,
}

impl MemristorState {
    pub fn new(x: f64) -> Result<Self, DeviceError> {
        if !(0.0..=1.0).contains(&x) || !x.is_finite() {
            return Err(DeviceError::InvalidState(x));
        }
        Ok(Self { x })
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

impl MemristorParams {
    /// Validates the constants, calibrates the drift coefficient, and fixes
    /// the operational saturation states.
    pub fn new(
        r_on: f64,
        r_off: f64,
        v_tr: f64,
        t_switch: f64,
        p: u32,
        polarity: Polarity,
    ) -> Result<Self, DeviceError> {
        if !(r_on > 0.0 && r_on.is_finite()) {
            return Err(DeviceError::InvalidParams(format!(
                "r_on = {r_on} must be positive"
            )));
        }
        if !(r_off >= r_on && r_off.is_finite()) {
            return Err(DeviceError::InvalidParams(format!(
                "r_off = {r_off} must satisfy r_off / r_on >= 1 (r_on = {r_on})"
            )));
        }
        if !(v_tr > 0.0 && v_tr.is_finite()) {
            return Err(DeviceError::InvalidParams(format!(
                "v_tr = {v_tr} must be positive"
            )));
        }
        if !(t_switch > 0.0 && t_switch.is_finite()) {
            return Err(DeviceError::InvalidParams(format!(
                "t_switch = {t_switch} must be positive"
            )));
        }
        if p < 1 {
            return Err(DeviceError::InvalidParams(
                "window exponent p must be >= 1".into(),
            ));
        }

        let drift_coeff = calibrate_drift(r_on, r_off, v_tr, t_switch, p)?;
        let mut params = Self {
            r_on,
            r_off,
            v_tr,
            t_switch,
            p,
            polarity,
            drift_coeff,
            x_high: 0.0,
            x_low: 1.0,
        };
        // Operational saturation states: what a standard training pulse at the
        // engine's write step actually reaches, starting from the opposite rail.
        let dt = params.max_step();
        let high = settle(
            MemristorState { x: 1.0 },
            training_pulse(TrainingTarget::SetHigh, &params),
            dt,
            &params,
        )?;
        let low = settle(
            MemristorState { x: 0.0 },
            training_pulse(TrainingTarget::SetLow, &params),
            dt,
            &params,
        )?;
        params.x_high = high.x;
        params.x_low = low.x;
        Ok(params)
    }

    pub fn r_on(&self) -> f64 {
        self.r_on
    }

    pub fn r_off(&self) -> f64 {
        self.r_off
    }

    pub fn v_tr(&self) -> f64 {
        self.v_tr
    }

    pub fn t_switch(&self) -> f64 {
        self.t_switch
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    /// Calibrated drift coefficient `k` in 1/(A*s).
    pub fn drift_coeff(&self) -> f64 {
        self.drift_coeff
    }

    /// Largest step the explicit integrator accepts under supra-threshold drive.
    pub fn max_step(&self) -> f64 {
        self.t_switch / 20.0
    }

    /// State reached by a SET_HIGH training pulse from the low rail.
    pub fn x_high(&self) -> f64 {
        self.x_high
    }

    /// State reached by a SET_LOW training pulse from the high rail.
    pub fn x_low(&self) -> f64 {
        self.x_low
    }

    /// Operational high resistance (memristance after SET_HIGH saturation).
    pub fn r_high(&self) -> f64 {
        memristance(MemristorState { x: self.x_high }, self)
    }

    /// Operational low resistance (memristance after SET_LOW saturation).
    pub fn r_low(&self) -> f64 {
        memristance(MemristorState { x: self.x_low }, self)
    }

    /// Initial state for a device programmed to the given level.
    pub fn level_state(&self, level: ResistanceLevel) -> MemristorState {
        match level {
            ResistanceLevel::High => MemristorState { x: self.x_high },
            ResistanceLevel::Low => MemristorState { x: self.x_low },
        }
    }

    /// True when the parameters equal the default configuration.
    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

impl Default for MemristorParams {
    /// Default device: r_on 100 ohm, r_off 1e8 ohm (ratio 1e6), training
    /// threshold 3.5 V, 10 ns switching time, window exponent 2, positive
    /// bias setting the high-resistance state.
    fn default() -> Self {
        static DEFAULT: OnceLock<MemristorParams> = OnceLock::new();
        *DEFAULT.get_or_init(|| {
            MemristorParams::new(100.0, 1e8, 3.5, 10e-9, 2, Polarity::PositiveSetsHigh)
                .expect("default memristor parameters are valid")
        })
    }
}

/// Memristance `M(x) = r_on * x + r_off * (1 - x)`.
pub fn memristance(state: MemristorState, params: &MemristorParams) -> f64 {
    params.r_on * state.x + params.r_off * (1.0 - state.x)
}

/// Biolek window: `1 - (x - step(-drive))^(2p)`, pinning the state at the
/// boundary it is driven toward.
fn window(x: f64, drive_is_positive: bool, p: u32) -> f64 {
    let offset = if drive_is_positive { 0.0 } else { 1.0 };
    1.0 - (x - offset).powi(2 * p as i32)
}

/// Signed drive current: the raw current through the device, with sign flipped
/// so that positive drive always moves `x` upward (toward `r_on`).
fn drive_current(v: f64, m: f64, polarity: Polarity) -> f64 {
    let i = v / m;
    match polarity {
        Polarity::PositiveSetsLow => i,
        Polarity::PositiveSetsHigh => -i,
    }
}

/// Time derivative of the internal state under an applied voltage.
///
/// Exactly zero below the training threshold; otherwise the calibrated
/// windowed dopant-drift rate.
pub fn state_derivative(state: MemristorState, v: f64, params: &MemristorParams) -> f64 {
    if v.abs() < params.v_tr {
        return 0.0;
    }
    let m = memristance(state, params);
    let drive = drive_current(v, m, params.polarity);
    params.drift_coeff * drive * window(state.x, drive > 0.0, params.p)
}

/// One explicit (forward) integration step, clamped to `[0, 1]`.
///
/// Sub-threshold voltages return the input state unchanged, bit for bit, at
/// any step size. Supra-threshold drive requires `dt <= t_switch / 20`.
pub fn step_state(
    state: MemristorState,
    v: f64,
    dt: f64,
    params: &MemristorParams,
) -> Result<MemristorState, DeviceError> {
    assert!(dt > 0.0, "step_state requires dt > 0");
    if v.abs() < params.v_tr {
        return Ok(state);
    }
    let max = params.max_step();
    if dt > max * (1.0 + 1e-12) {
        return Err(DeviceError::StepTooLarge { dt, max });
    }
    let x = (state.x + dt * state_derivative(state, v, params)).clamp(0.0, 1.0);
    Ok(MemristorState { x })
}

/// Programming pulse that drives the device to the requested bound from any
/// initial state: amplitude `+/- v_tr` per the polarity convention, duration
/// twice the switching time.
pub fn training_pulse(target: TrainingTarget, params: &MemristorParams) -> PulseSpec {
    let toward_high = match params.polarity {
        Polarity::PositiveSetsHigh => params.v_tr,
        Polarity::PositiveSetsLow => -params.v_tr,
    };
    let amplitude = match target {
        TrainingTarget::SetHigh => toward_high,
        TrainingTarget::SetLow => -toward_high,
    };
    PulseSpec {
        amplitude,
        duration: 2.0 * params.t_switch,
    }
}

/// Integrates a full training pulse at the given step size.
pub fn apply_training_pulse(
    state: MemristorState,
    target: TrainingTarget,
    dt: f64,
    params: &MemristorParams,
) -> Result<MemristorState, DeviceError> {
    settle(state, training_pulse(target, params), dt, params)
}

fn settle(
    mut state: MemristorState,
    pulse: PulseSpec,
    dt: f64,
    params: &MemristorParams,
) -> Result<MemristorState, DeviceError> {
    let steps = (pulse.duration / dt).round() as usize;
    for _ in 0..steps {
        state = step_state(state, pulse.amplitude, dt, params)?;
    }
    Ok(state)
}

/// Time for `x` to travel 0.01 -> 0.99 under constant drive at `v_tr` with the
/// candidate coefficient `k`, measured by fine explicit integration with
/// linear interpolation at the crossing. `None` when the traversal does not
/// complete within the step budget.
fn traversal_time(k: f64, r_on: f64, r_off: f64, v_tr: f64, t_switch: f64, p: u32) -> Option<f64> {
    const STEPS_PER_SWITCH: f64 = 20_000.0;
    let dt = t_switch / STEPS_PER_SWITCH;
    let cap = (40.0 * STEPS_PER_SWITCH) as usize;
    let exponent = 2 * p as i32;
    let mut x = 0.01_f64;
    for step in 0..cap {
        let m = r_on * x + r_off * (1.0 - x);
        let rate = k * (v_tr / m) * (1.0 - x.powi(exponent));
        let x_next = x + dt * rate;
        if x_next >= 0.99 {
            let frac = if x_next > x {
                (0.99 - x) / (x_next - x)
            } else {
                1.0
            };
            return Some((step as f64 + frac) * dt);
        }
        x = x_next;
    }
    None
}

/// Bisection on `k` so the constant-threshold traversal takes `t_switch`.
fn calibrate_drift(
    r_on: f64,
    r_off: f64,
    v_tr: f64,
    t_switch: f64,
    p: u32,
) -> Result<f64, DeviceError> {
    // First-shot estimate from a Riemann pass in x; the traversal time scales
    // as 1/k, so this lands very close and the bracket below is tight.
    let estimate = {
        let n = 20_000;
        let span = 0.99 - 0.01;
        let dx = span / n as f64;
        let exponent = 2 * p as i32;
        let mut tau = 0.0_f64;
        for j in 0..n {
            let x = 0.01 + (j as f64 + 0.5) * dx;
            let m = r_on * x + r_off * (1.0 - x);
            let rate = (v_tr / m) * (1.0 - x.powi(exponent));
            tau += dx / rate;
        }
        tau / t_switch
    };
    if !estimate.is_finite() || estimate <= 0.0 {
        return Err(DeviceError::InvalidParams(
            "drift calibration failed to produce a finite estimate".into(),
        ));
    }

    let mut lo = estimate / 4.0;
    let mut hi = estimate * 4.0;
    // T(k) decreases in k: too-slow (or capped) traversals raise lo.
    for _ in 0..64 {
        let too_slow =
            |k: f64| traversal_time(k, r_on, r_off, v_tr, t_switch, p).is_none_or(|t| t > t_switch);
        let lo_slow = too_slow(lo);
        let hi_slow = too_slow(hi);
        if lo_slow && !hi_slow {
            break;
        }
        if !lo_slow {
            lo /= 4.0;
        }
        if hi_slow {
            hi *= 4.0;
        }
    }

    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let slow = traversal_time(mid, r_on, r_off, v_tr, t_switch, p).is_none_or(|t| t > t_switch);
        if slow {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
