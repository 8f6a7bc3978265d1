//! Analog Hamiltonian simulation program export.
//!
//! The layout follows the public AHS program IR
//! (`braket.ir.ahs.program`, version 1): a register of sites, one driving
//! field (amplitude, phase, detuning) and one shifting field carrying the
//! local detuning with its per-site pattern. All numbers are SI: seconds,
//! rad/s and metres.
//!
//! Programs are validated in native units before conversion. Nothing is
//! produced unless every hardware constraint holds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MIN_SPACING_UM;
use crate::hamiltonian::HamiltonianSpec;
use crate::pulse::{Channel, ChannelLimits, PulseSchedule, MAX_DURATION_US};

const US_TO_S: f64 = 1e-6;
const UM_TO_M: f64 = 1e-6;
const RAD_PER_US_TO_RAD_PER_S: f64 = 1e6;
const VALUE_EPS: f64 = 1e-9;

/// A broken hardware constraint, named precisely enough to locate it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ValueOutOfRange { channel: Channel, time: f64, value: f64, min: f64, max: f64 },
    RabiEndpointNonZero { time: f64, value: f64 },
    DurationExceeded { duration: f64, max: f64 },
    SpacingBelowFloor { atom_a: usize, atom_b: usize, distance: f64, floor: f64 },
    CouplingOutOfRange { atom: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ValueOutOfRange { channel, time, value, min, max } => {
                write!(f, "{channel} = {value:.6} rad/us at t = {time:.4} us is outside [{min}, {max}]")
            }
            Violation::RabiEndpointNonZero { time, value } => {
                write!(f, "rabi must be 0 at t = {time:.4} us, found {value:.6} rad/us")
            }
            Violation::DurationExceeded { duration, max } => {
                write!(f, "duration {duration:.4} us exceeds {max} us")
            }
            Violation::SpacingBelowFloor { atom_a, atom_b, distance, floor } => {
                write!(f, "spacing between atoms {atom_a} and {atom_b} is {distance:.4} um, below the {floor} um floor")
            }
            Violation::CouplingOutOfRange { atom, value } => {
                write!(f, "local detuning pattern h_{atom} = {value} is outside [0, 1]")
            }
        }
    }
}

/// Every hardware constraint `spec` breaks; empty when exportable.
pub fn validate(spec: &HamiltonianSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    for channel in Channel::ALL {
        let s = spec.schedule(channel);
        check_range(s, ChannelLimits::default_for(channel), &mut out);
    }
    let rabi = spec.schedule(Channel::Rabi);
    let (first, last) = (rabi.values()[0], *rabi.values().last().unwrap());
    if first.abs() > VALUE_EPS {
        out.push(Violation::RabiEndpointNonZero { time: 0.0, value: first });
    }
    if last.abs() > VALUE_EPS {
        out.push(Violation::RabiEndpointNonZero { time: rabi.duration(), value: last });
    }
    if spec.duration() > MAX_DURATION_US + VALUE_EPS {
        out.push(Violation::DurationExceeded { duration: spec.duration(), max: MAX_DURATION_US });
    }
    for (i, j, d) in spec.grid().pairs() {
        if d < MIN_SPACING_UM {
            out.push(Violation::SpacingBelowFloor { atom_a: i, atom_b: j, distance: d, floor: MIN_SPACING_UM });
        }
    }
    for (atom, &value) in spec.couplings().iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            out.push(Violation::CouplingOutOfRange { atom, value });
        }
    }
    out
}

// Schedules are piecewise linear, so checking breakpoints covers every t.
fn check_range(s: &PulseSchedule, lim: ChannelLimits, out: &mut Vec<Violation>) {
    for (time, value) in s.breakpoints() {
        if value < lim.min - VALUE_EPS || value > lim.max + VALUE_EPS {
            out.push(Violation::ValueOutOfRange { channel: s.channel(), time, value, min: lim.min, max: lim.max });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogProgram {
    #[serde(rename = "braketSchemaHeader")]
    pub header: SchemaHeader,
    pub setup: Setup,
    pub hamiltonian: ProgramHamiltonian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaHeader {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub ahs_register: Register,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    /// Site coordinates in metres.
    pub sites: Vec<[f64; 2]>,
    pub filling: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramHamiltonian {
    #[serde(rename = "drivingFields")]
    pub driving_fields: Vec<DrivingField>,
    #[serde(rename = "shiftingFields")]
    pub shifting_fields: Vec<ShiftingField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingField {
    pub amplitude: PhysicalField,
    pub phase: PhysicalField,
    pub detuning: PhysicalField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftingField {
    pub magnitude: PhysicalField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalField {
    pub time_series: TimeSeries,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pattern {
    Uniform(String),
    PerSite(Vec<f64>),
}

/// Breakpoints in SI units (seconds, rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub times: Vec<f64>,
}

impl TimeSeries {
    fn from_schedule(s: &PulseSchedule) -> Self {
        TimeSeries {
            values: s.values().iter().map(|v| v * RAD_PER_US_TO_RAD_PER_S).collect(),
            times: s.times().iter().map(|t| t * US_TO_S).collect(),
        }
    }

    /// `(µs, rad/µs)` pairs.
    pub fn native(&self) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.values).map(|(t, v)| (t / US_TO_S, v / RAD_PER_US_TO_RAD_PER_S)).collect()
    }
}

impl AnalogProgram {
    /// Convert a realized spec, refusing on any constraint violation.
    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        let violations = validate(spec);
        if !violations.is_empty() {
            return Err(Error::ExportRefused(violations));
        }
        let uniform = || Pattern::Uniform("uniform".into());
        let duration_s = spec.duration() * US_TO_S;
        let driving = DrivingField {
            amplitude: PhysicalField { time_series: TimeSeries::from_schedule(spec.schedule(Channel::Rabi)), pattern: uniform() },
            phase: PhysicalField {
                time_series: TimeSeries { values: vec![spec.phase(), spec.phase()], times: vec![0.0, duration_s] },
                pattern: uniform(),
            },
            detuning: PhysicalField {
                time_series: TimeSeries::from_schedule(spec.schedule(Channel::GlobalDetuning)),
                pattern: uniform(),
            },
        };
        let shifting = ShiftingField {
            magnitude: PhysicalField {
                time_series: TimeSeries::from_schedule(spec.schedule(Channel::LocalDetuning)),
                pattern: Pattern::PerSite(spec.couplings().to_vec()),
            },
        };
        Ok(AnalogProgram {
            header: SchemaHeader { name: "braket.ir.ahs.program".into(), version: "1".into() },
            setup: Setup {
                ahs_register: Register {
                    sites: spec.grid().positions().iter().map(|p| [p[0] * UM_TO_M, p[1] * UM_TO_M]).collect(),
                    filling: vec![1; spec.n_atoms()],
                },
            },
            hamiltonian: ProgramHamiltonian { driving_fields: vec![driving], shifting_fields: vec![shifting] },
        })
    }

    pub fn duration_us(&self) -> f64 {
        self.hamiltonian.driving_fields[0].amplitude.time_series.times.last().copied().unwrap_or(0.0) / US_TO_S
    }

    pub fn rabi_native(&self) -> Vec<(f64, f64)> {
        self.hamiltonian.driving_fields[0].amplitude.time_series.native()
    }

    pub fn local_pattern(&self) -> &[f64] {
        match &self.hamiltonian.shifting_fields[0].magnitude.pattern {
            Pattern::PerSite(h) => h,
            Pattern::Uniform(_) => &[],
        }
    }

    /// Site coordinates in µm.
    pub fn sites_um(&self) -> Vec<[f64; 2]> {
        self.setup.ahs_register.sites.iter().map(|p| [p[0] / UM_TO_M, p[1] / UM_TO_M]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }
}
