//! Liquid-crystal unit-cell phase shifter.
//!
//! Covers three layers of the LC model:
//!
//! * the static voltage/phase map `f(v)`, a piecewise-linear curve between
//!   the relaxed state (phase 0) and full alignment (`omega_max`);
//! * first-order exponential transitions with asymmetric time constants,
//!   `tau_plus` when the phase rises (field-driven) and `tau_minus` when it
//!   decays (anchoring-driven);
//! * over/undershoot control, where a cell is driven with the extreme
//!   voltage until it crosses the desired phase and then held there. The
//!   crossing ("release") time has a closed form for both directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Upper bound on the phase shift of an LC cell of length `length_l` at
/// frequency `freq`, given the square roots of the parallel and perpendicular
/// relative permittivities.
pub fn max_phase_from_physics(
    length_l: f64,
    freq: f64,
    n_parallel: f64,
    n_perp: f64,
) -> Result<f64> {
    if !(length_l > 0.0 && length_l.is_finite()) {
        return Err(Error::invalid(
            "length_l",
            format!("must be positive, got {length_l}"),
        ));
    }
    if !(freq > 0.0 && freq.is_finite()) {
        return Err(Error::invalid(
            "freq",
            format!("must be positive, got {freq}"),
        ));
    }
    if !(n_perp > 0.0 && n_parallel >= n_perp) {
        return Err(Error::invalid(
            "n_parallel",
            format!("need n_parallel >= n_perp > 0, got {n_parallel} and {n_perp}"),
        ));
    }
    Ok(2.0 * std::f64::consts::PI * length_l * (n_parallel - n_perp) * freq / SPEED_OF_LIGHT)
}

/// One breakpoint of the voltage/phase curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub voltage: f64,
    pub phase: f64,
}

/// Physical constants of an LC phase shifter.
#[derive(Debug, Clone, PartialEq)]
pub struct LcParams {
    /// Rise time constant, seconds.
    pub tau_plus: f64,
    /// Decay time constant, seconds.
    pub tau_minus: f64,
    /// Largest reachable phase shift, radians.
    pub omega_max: f64,
    /// Margin kept from both ends of `[0, omega_max]`.
    pub phase_clamp_eps: f64,
    pub voltage_curve: Vec<CurvePoint>,
}

impl Default for LcParams {
    /// 5 ms / 24 ms time constants (3-tau settling of 15 ms / 72 ms), a full
    /// 2π phase range and a three-segment voltage curve. The curve
    /// breakpoints are placeholders; measured data should be supplied through
    /// the config file.
    fn default() -> Self {
        let omega_max = 2.0 * std::f64::consts::PI;
        Self {
            tau_plus: 5e-3,
            tau_minus: 24e-3,
            omega_max,
            phase_clamp_eps: 1e-3,
            voltage_curve: default_voltage_curve(omega_max),
        }
    }
}

/// Threshold at 1 V, a knee at 3 V (75 % of the range), saturation at 10 V.
pub fn default_voltage_curve(omega_max: f64) -> Vec<CurvePoint> {
    vec![
        CurvePoint {
            voltage: 1.0,
            phase: 0.0,
        },
        CurvePoint {
            voltage: 3.0,
            phase: 0.75 * omega_max,
        },
        CurvePoint {
            voltage: 10.0,
            phase: omega_max,
        },
    ]
}

impl LcParams {
    /// Builds parameters whose phase range comes from the cell geometry and
    /// LC anisotropy. The voltage curve is rescaled to the new range.
    pub fn from_physics(
        tau_plus: f64,
        tau_minus: f64,
        length_l: f64,
        freq: f64,
        eps_r_parallel: f64,
        eps_r_perp: f64,
    ) -> Result<Self> {
        if !(eps_r_parallel > 0.0 && eps_r_perp > 0.0) {
            return Err(Error::invalid(
                "eps_r",
                "relative permittivities must be positive",
            ));
        }
        let omega_max =
            max_phase_from_physics(length_l, freq, eps_r_parallel.sqrt(), eps_r_perp.sqrt())?;
        let params = Self {
            tau_plus,
            tau_minus,
            omega_max,
            phase_clamp_eps: (1e-3f64).min(omega_max / 4.0),
            voltage_curve: default_voltage_curve(omega_max),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_plus > 0.0 && self.tau_plus.is_finite()) {
            return Err(Error::invalid("tau_plus", "must be positive"));
        }
        if !(self.tau_minus > self.tau_plus && self.tau_minus.is_finite()) {
            return Err(Error::invalid(
                "tau_minus",
                "must be finite and exceed tau_plus",
            ));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::invalid("omega_max", "must be positive"));
        }
        if !(self.phase_clamp_eps > 0.0 && self.phase_clamp_eps < self.omega_max / 2.0) {
            return Err(Error::invalid(
                "phase_clamp_eps",
                "must lie in (0, omega_max/2)",
            ));
        }
        self.check_curve()
    }

    fn check_curve(&self) -> Result<()> {
        let curve = &self.voltage_curve;
        if curve.len() < 2 {
            return Err(Error::invalid(
                "voltage_curve",
                "needs at least two breakpoints",
            ));
        }
        for w in curve.windows(2) {
            if !(w[1].voltage > w[0].voltage) {
                return Err(Error::invalid(
                    "voltage_curve",
                    "voltages must be strictly increasing",
                ));
            }
            if w[1].phase < w[0].phase {
                return Err(Error::invalid(
                    "voltage_curve",
                    "phases must be nondecreasing",
                ));
            }
        }
        let tol = 1e-12 * self.omega_max.max(1.0);
        if curve[0].phase.abs() > tol {
            return Err(Error::invalid("voltage_curve", "first phase must be 0"));
        }
        if (curve[curve.len() - 1].phase - self.omega_max).abs() > tol {
            return Err(Error::invalid(
                "voltage_curve",
                "last phase must equal omega_max",
            ));
        }
        Ok(())
    }

    /// Lowest phase a designed configuration may use.
    pub fn phase_floor(&self) -> f64 {
        self.phase_clamp_eps
    }

    /// Highest phase a designed configuration may use.
    pub fn phase_ceiling(&self) -> f64 {
        self.omega_max - self.phase_clamp_eps
    }

    pub fn clamp_phase(&self, omega: f64) -> f64 {
        omega.clamp(self.phase_floor(), self.phase_ceiling())
    }

    fn tau_for(&self, omega_0: f64, omega_target: f64) -> f64 {
        if omega_target >= omega_0 {
            self.tau_plus
        } else {
            self.tau_minus
        }
    }
}

/// Static map `f(v)`: piecewise-linear interpolation, clamped outside the
/// curve's voltage range.
pub fn phase_from_voltage(params: &LcParams, v: f64) -> Result<f64> {
    params.check_curve()?;
    let curve = &params.voltage_curve;
    let first = curve[0];
    let last = curve[curve.len() - 1];
    if v <= first.voltage {
        return Ok(first.phase);
    }
    if v >= last.voltage {
        return Ok(last.phase);
    }
    let i = curve.partition_point(|p| p.voltage <= v) - 1;
    let (a, b) = (curve[i], curve[i + 1]);
    let frac = (v - a.voltage) / (b.voltage - a.voltage);
    Ok(a.phase + frac * (b.phase - a.phase))
}

/// Inverse map `f⁻¹(ω)`. On flat stretches of the curve the lowest voltage
/// producing `omega` is returned.
pub fn voltage_from_phase(params: &LcParams, omega: f64) -> Result<f64> {
    params.check_curve()?;
    if !(0.0..=params.omega_max).contains(&omega) {
        return Err(Error::OutOfRange {
            name: "omega",
            value: omega,
            lo: 0.0,
            hi: params.omega_max,
        });
    }
    let curve = &params.voltage_curve;
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        if omega <= a.phase {
            return Ok(a.voltage);
        }
        if omega <= b.phase {
            let frac = (omega - a.phase) / (b.phase - a.phase);
            return Ok(a.voltage + frac * (b.voltage - a.voltage));
        }
    }
    Ok(curve[curve.len() - 1].voltage)
}

/// Phase at time `t` of a cell released from `omega_0` and driven towards
/// `omega_target` with the direction-dependent time constant.
pub fn transition_phase(params: &LcParams, t: f64, omega_0: f64, omega_target: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(
            "t",
            format!("must be non-negative, got {t}"),
        ));
    }
    for (name, w) in [("omega_0", omega_0), ("omega_target", omega_target)] {
        if !(0.0..=params.omega_max).contains(&w) {
            return Err(Error::OutOfRange {
                name,
                value: w,
                lo: 0.0,
                hi: params.omega_max,
            });
        }
    }
    Ok(exp_approach(
        t,
        omega_0,
        omega_target,
        params.tau_for(omega_0, omega_target),
    ))
}

#[inline]
fn exp_approach(t: f64, from: f64, to: f64, tau: f64) -> f64 {
    if t == 0.0 {
        return from;
    }
    to + (from - to) * (-t / tau).exp()
}

/// Phase configuration of the whole surface, one entry per unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Clamps every entry into the usable range of `params`.
    pub fn clamped(mut self, params: &LcParams) -> Self {
        for w in &mut self.0 {
            *w = params.clamp_phase(*w);
        }
        self
    }
}

impl std::ops::Index<usize> for PhaseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rise,
    Decay,
}

/// Control plan for one unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementSwitch {
    pub direction: Direction,
    pub start_phase: f64,
    /// Phase the cell is driven towards until release (`omega_max` when
    /// rising, the relaxed state 0 when decaying).
    pub forcing_target: f64,
    pub release_time: f64,
    pub hold_phase: f64,
}

impl ElementSwitch {
    fn phase_at(&self, params: &LcParams, t: f64) -> f64 {
        if t >= self.release_time {
            return self.hold_phase;
        }
        let tau = match self.direction {
            Direction::Rise => params.tau_plus,
            Direction::Decay => params.tau_minus,
        };
        exp_approach(t, self.start_phase, self.forcing_target, tau)
    }
}

/// Over/undershoot schedule for a whole surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSchedule {
    pub elements: Vec<ElementSwitch>,
    /// Indices whose desired phase had to be pulled into the clamp range to
    /// keep the release time finite.
    pub clamped: Vec<usize>,
}

impl TransitionSchedule {
    pub fn max_release_time(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.release_time)
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Plans the over/undershoot switch from `omega_0` to `omega_d`.
///
/// Rising cells are driven to `omega_max` and released after
/// `tau_plus * ln((omega_max - w0) / (omega_max - wd))`; decaying cells are
/// relaxed towards 0 and released after `tau_minus * ln(w0 / wd)`.
pub fn plan_switch(
    params: &LcParams,
    omega_0: &PhaseVector,
    omega_d: &PhaseVector,
) -> Result<TransitionSchedule> {
    if omega_0.len() != omega_d.len() {
        return Err(Error::Shape(format!(
            "start has {} elements, target has {}",
            omega_0.len(),
            omega_d.len()
        )));
    }
    if let Some(&bad) = omega_0
        .iter()
        .find(|w| !(0.0..=params.omega_max).contains(*w))
    {
        return Err(Error::OutOfRange {
            name: "omega_0",
            value: bad,
            lo: 0.0,
            hi: params.omega_max,
        });
    }
    let mut clamped = Vec::new();
    let elements = omega_0
        .iter()
        .zip(omega_d.iter())
        .enumerate()
        .map(|(n, (&w0, &wd_raw))| {
            let wd = params.clamp_phase(wd_raw);
            if wd != wd_raw {
                clamped.push(n);
            }
            if wd >= w0 {
                ElementSwitch {
                    direction: Direction::Rise,
                    start_phase: w0,
                    forcing_target: params.omega_max,
                    release_time: params.tau_plus
                        * ((params.omega_max - w0) / (params.omega_max - wd)).ln(),
                    hold_phase: wd,
                }
            } else {
                ElementSwitch {
                    direction: Direction::Decay,
                    start_phase: w0,
                    forcing_target: 0.0,
                    release_time: params.tau_minus * (w0 / wd).ln(),
                    hold_phase: wd,
                }
            }
        })
        .collect();
    Ok(TransitionSchedule { elements, clamped })
}

/// Phases of all cells `t` seconds after the switch started.
pub fn switched_phase_at(
    schedule: &TransitionSchedule,
    params: &LcParams,
    t: f64,
) -> Result<PhaseVector> {
    if !(t >= 0.0) {
        return Err(Error::invalid(
            "t",
            format!("must be non-negative, got {t}"),
        ));
    }
    Ok(PhaseVector(
        schedule
            .elements
            .iter()
            .map(|e| e.phase_at(params, t))
            .collect(),
    ))
}
