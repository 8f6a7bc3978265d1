//! Piecewise-linear control schedules.
//!
//! A parameterized schedule with `M` intervals has the layout
//!
//! ```text
//! | ramp | hold 0 | tr | hold 1 | tr | ... | hold M-1 | tr |
//! ```
//!
//! where hold `k` sits at `scale_k * input + offset_k` (clamped to the channel
//! limits) and each `tr` interpolates linearly into the next hold. The final
//! transition brings the Rabi channel back to zero; detuning channels stay at
//! their last hold value.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest program the device runs, in µs.
pub const MAX_DURATION_US: f64 = 4.0;

/// Maximum Rabi frequency in rad/µs.
pub const MAX_RABI: f64 = 15.8;

/// Default magnitude bound for both detuning channels in rad/µs.
pub const MAX_DETUNING: f64 = 125.0;

const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Rabi,
    GlobalDetuning,
    LocalDetuning,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Rabi, Channel::GlobalDetuning, Channel::LocalDetuning];

    pub fn index(self) -> usize {
        match self {
            Channel::Rabi => 0,
            Channel::GlobalDetuning => 1,
            Channel::LocalDetuning => 2,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Rabi => "rabi",
            Channel::GlobalDetuning => "global_detuning",
            Channel::LocalDetuning => "local_detuning",
        })
    }
}

/// Interval layout shared by all three channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTiming {
    pub n_intervals: usize,
    pub hold: f64,
    pub transition: f64,
    pub initial_ramp: f64,
}

impl PulseTiming {
    pub fn new(n_intervals: usize) -> Self {
        PulseTiming { n_intervals, hold: 0.15, transition: 0.05, initial_ramp: 0.05 }
    }

    pub fn total_duration(&self) -> f64 {
        self.initial_ramp + self.n_intervals as f64 * (self.hold + self.transition)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_intervals == 0 {
            return Err(Error::Pulse("at least one pulse interval is required".into()));
        }
        for (name, v) in [("hold", self.hold), ("transition", self.transition), ("initial_ramp", self.initial_ramp)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Pulse(format!("{name} time must be positive, got {v}")));
            }
        }
        let total = self.total_duration();
        if total > MAX_DURATION_US + TIME_EPS {
            return Err(Error::Pulse(format!(
                "{} intervals last {total:.4} us, above the {MAX_DURATION_US} us limit",
                self.n_intervals
            )));
        }
        Ok(())
    }

    /// Start time of hold `k`.
    pub fn hold_start(&self, k: usize) -> f64 {
        self.initial_ramp + k as f64 * (self.hold + self.transition)
    }
}

impl Default for PulseTiming {
    fn default() -> Self {
        PulseTiming::new(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelLimits {
    pub min: f64,
    pub max: f64,
}

impl ChannelLimits {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(Error::Pulse(format!("invalid channel limits [{min}, {max}]")));
        }
        Ok(ChannelLimits { min, max })
    }

    pub fn default_for(channel: Channel) -> Self {
        match channel {
            Channel::Rabi => ChannelLimits { min: 0.0, max: MAX_RABI },
            Channel::GlobalDetuning | Channel::LocalDetuning => ChannelLimits { min: -MAX_DETUNING, max: MAX_DETUNING },
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

/// Value held during one interval: `scale * input + offset`.
pub fn hold_value(theta_scale: f64, theta_offset: f64, omega: f64) -> f64 {
    theta_scale * omega + theta_offset
}

/// A hold value that had to be pulled back inside the channel limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampWarning {
    pub channel: Channel,
    pub interval: usize,
    pub requested: f64,
    pub applied: f64,
}

impl fmt::Display for ClampWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} interval {}: hold value {:.4} clamped to {:.4} rad/us",
            self.channel, self.interval, self.requested, self.applied
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    channel: Channel,
    timing: Option<PulseTiming>,
    limits: ChannelLimits,
    hold_values: Vec<f64>,
    times: Vec<f64>,
    values: Vec<f64>,
    // Which hold value (if any) each breakpoint is tied to.
    sources: Vec<Option<usize>>,
}

impl PulseSchedule {
    /// Build the parameterized schedule for one channel.
    ///
    /// Out-of-range hold values are clamped; every clamp is reported in the
    /// returned warnings.
    pub fn build(
        channel: Channel,
        thetas: &[[f64; 2]],
        omega: f64,
        timing: PulseTiming,
        limits: ChannelLimits,
    ) -> Result<(Self, Vec<ClampWarning>)> {
        timing.validate()?;
        if thetas.len() != timing.n_intervals {
            return Err(Error::Pulse(format!(
                "{channel}: expected {} (scale, offset) pairs, got {}",
                timing.n_intervals,
                thetas.len()
            )));
        }
        let mut warnings = Vec::new();
        let mut hold_values = Vec::with_capacity(thetas.len());
        for (k, &[scale, offset]) in thetas.iter().enumerate() {
            let requested = hold_value(scale, offset, omega);
            if !requested.is_finite() {
                return Err(Error::Pulse(format!("{channel} interval {k}: non-finite hold value")));
            }
            let applied = limits.clamp(requested);
            if applied != requested {
                warnings.push(ClampWarning { channel, interval: k, requested, applied });
            }
            hold_values.push(applied);
        }

        let m = timing.n_intervals;
        let n_points = 2 * m + 2;
        let mut times = Vec::with_capacity(n_points);
        let mut values = Vec::with_capacity(n_points);
        let mut sources = Vec::with_capacity(n_points);
        let mut push = |t: f64, src: Option<usize>| {
            times.push(t);
            values.push(src.map_or(0.0, |k| hold_values[k]));
            sources.push(src);
        };
        let ramped = channel == Channel::Rabi;
        push(0.0, if ramped { None } else { Some(0) });
        for k in 0..m {
            let start = timing.hold_start(k);
            push(start, Some(k));
            push(start + timing.hold, Some(k));
        }
        push(timing.total_duration(), if ramped { None } else { Some(m - 1) });

        Ok((
            PulseSchedule { channel, timing: Some(timing), limits, hold_values, times, values, sources },
            warnings,
        ))
    }

    /// Free-form schedule from explicit `(time µs, value rad/µs)` breakpoints.
    pub fn from_breakpoints(channel: Channel, points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Pulse("a schedule needs at least two breakpoints".into()));
        }
        if points[0].0 != 0.0 {
            return Err(Error::Pulse(format!("first breakpoint must be at t=0, got {}", points[0].0)));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Pulse("breakpoint times must be strictly increasing".into()));
            }
        }
        if points.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Pulse("non-finite breakpoint".into()));
        }
        Ok(PulseSchedule {
            channel,
            timing: None,
            limits: ChannelLimits::default_for(channel),
            hold_values: Vec::new(),
            times: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
            sources: vec![None; points.len()],
        })
    }

    pub fn constant(channel: Channel, value: f64, duration: f64) -> Result<Self> {
        Self::from_breakpoints(channel, &[(0.0, value), (duration, value)])
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn timing(&self) -> Option<&PulseTiming> {
        self.timing.as_ref()
    }

    pub fn limits(&self) -> ChannelLimits {
        self.limits
    }

    pub fn hold_values(&self) -> &[f64] {
        &self.hold_values
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("schedule has breakpoints")
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index `i` of the segment `[times[i], times[i+1]]` containing `t`.
    fn segment(&self, t: f64) -> usize {
        let last = self.times.len() - 2;
        self.times.partition_point(|&x| x <= t).saturating_sub(1).min(last)
    }

    pub fn sample(&self, t: f64) -> Result<f64> {
        let duration = self.duration();
        if !(t >= -TIME_EPS && t <= duration + TIME_EPS) {
            return Err(Error::TimeOutOfRange { t, duration });
        }
        Ok(self.value_at(t.clamp(0.0, duration)))
    }

    /// Interpolated value; `t` is clamped into the schedule's span.
    pub(crate) fn value_at(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if t <= t0 {
            return v0;
        }
        if t >= t1 {
            return v1;
        }
        let f = (t - t0) / (t1 - t0);
        v0 + f * (v1 - v0)
    }

    /// Sensitivity of the value at `t` to each hold value, as
    /// `(hold index, weight)` pairs. Empty for free-form schedules.
    pub fn hold_weights(&self, t: f64) -> Vec<(usize, f64)> {
        let t = t.clamp(0.0, self.duration());
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(2);
        for (src, w) in [(self.sources[i], 1.0 - f), (self.sources[i + 1], f)] {
            if let Some(k) = src {
                if w == 0.0 {
                    continue;
                }
                match out.iter_mut().find(|(j, _)| *j == k) {
                    Some(e) => e.1 += w,
                    None => out.push((k, w)),
                }
            }
        }
        out
    }

    /// Replace breakpoint values, keeping times. Used by the noise model;
    /// the result is no longer tied to hold parameters.
    pub(crate) fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        PulseSchedule { values, sources: vec![None; self.times.len()], ..self.clone() }
    }
}
