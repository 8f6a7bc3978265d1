//! Time-dependent Rydberg Hamiltonian over the 2^N occupation basis.
//!
//! ```text
//! H(t) = Ω(t)/2 Σ_i (e^{iφ}|g⟩⟨r|_i + e^{-iφ}|r⟩⟨g|_i)
//!        - Δ(t) Σ_i n_i - δ(t) Σ_i h_i n_i + Σ_{i<j} V_ij n_i n_j
//! ```
//!
//! Units: ħ = 1, energies in rad/µs, times in µs. Basis index bit `i` is the
//! occupation of atom `i` (atom 0 is the least significant bit), `|g⟩ = |0⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{AtomGrid, InteractionMatrix};
use crate::pulse::{Channel, PulseSchedule, MAX_DURATION_US};

/// Largest register the dense simulator accepts.
pub const MAX_ATOMS: usize = 12;

const DURATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    grid: AtomGrid,
    rabi: PulseSchedule,
    detuning: PulseSchedule,
    local_detuning: PulseSchedule,
    phi: f64,
    couplings: Vec<f64>,
    duration: f64,
    interactions: InteractionMatrix,
    basis: BasisTables,
    knots: Vec<f64>,
}

/// Per-basis-state quantities that do not depend on time.
#[derive(Debug, Clone)]
pub(crate) struct BasisTables {
    /// Number of excited atoms.
    pub excitations: Vec<f64>,
    /// Σ_i h_i over excited atoms.
    pub local_weight: Vec<f64>,
    /// Σ_{i<j} V_ij over excited pairs.
    pub interaction: Vec<f64>,
}

/// Channel values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Drive {
    pub rabi: f64,
    pub detuning: f64,
    pub local_detuning: f64,
}

impl Drive {
    pub fn lerp(a: Drive, b: Drive, f: f64) -> Drive {
        Drive {
            rabi: a.rabi + f * (b.rabi - a.rabi),
            detuning: a.detuning + f * (b.detuning - a.detuning),
            local_detuning: a.local_detuning + f * (b.local_detuning - a.local_detuning),
        }
    }
}

impl HamiltonianSpec {
    pub fn assemble(
        grid: AtomGrid,
        rabi: PulseSchedule,
        detuning: PulseSchedule,
        local_detuning: PulseSchedule,
        couplings: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.n_atoms();
        if n > MAX_ATOMS {
            return Err(Error::Hamiltonian(format!("{n} atoms exceeds the dense limit of {MAX_ATOMS}")));
        }
        for (s, want) in [(&rabi, Channel::Rabi), (&detuning, Channel::GlobalDetuning), (&local_detuning, Channel::LocalDetuning)] {
            if s.channel() != want {
                return Err(Error::Hamiltonian(format!("expected a {want} schedule, got {}", s.channel())));
            }
        }
        let duration = rabi.duration();
        for s in [&detuning, &local_detuning] {
            if (s.duration() - duration).abs() > DURATION_EPS {
                return Err(Error::Hamiltonian(format!(
                    "schedule durations differ: {duration} us vs {} us ({})",
                    s.duration(),
                    s.channel()
                )));
            }
        }
        if duration > MAX_DURATION_US + DURATION_EPS {
            return Err(Error::Hamiltonian(format!("duration {duration} us exceeds {MAX_DURATION_US} us")));
        }
        if couplings.len() != n {
            return Err(Error::Hamiltonian(format!("{} couplings for {n} atoms", couplings.len())));
        }
        if let Some((i, h)) = couplings.iter().enumerate().find(|(_, h)| !(0.0..=1.0).contains(*h)) {
            return Err(Error::Hamiltonian(format!("coupling h_{i} = {h} is outside [0, 1]")));
        }
        let interactions = grid.interaction_matrix()?;
        let basis = BasisTables::new(&interactions, &couplings);

        let mut knots: Vec<f64> = [&rabi, &detuning, &local_detuning]
            .iter()
            .flat_map(|s| s.times().iter().copied())
            .filter(|&t| t <= duration)
            .collect();
        knots.push(duration);
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= DURATION_EPS);

        Ok(HamiltonianSpec { grid, rabi, detuning, local_detuning, phi: 0.0, couplings, duration, interactions, basis, knots })
    }

    pub fn grid(&self) -> &AtomGrid {
        &self.grid
    }

    pub fn n_atoms(&self) -> usize {
        self.grid.n_atoms()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms()
    }

    pub fn schedule(&self, channel: Channel) -> &PulseSchedule {
        match channel {
            Channel::Rabi => &self.rabi,
            Channel::GlobalDetuning => &self.detuning,
            Channel::LocalDetuning => &self.local_detuning,
        }
    }

    pub fn phase(&self) -> f64 {
        self.phi
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn interactions(&self) -> &InteractionMatrix {
        &self.interactions
    }

    /// Sorted union of all breakpoint times, ending at the duration.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub(crate) fn drive(&self, t: f64) -> Drive {
        Drive {
            rabi: self.rabi.value_at(t),
            detuning: self.detuning.value_at(t),
            local_detuning: self.local_detuning.value_at(t),
        }
    }

    /// Diagonal of H for the given channel values.
    pub(crate) fn fill_diagonal(&self, d: Drive, out: &mut [f64]) {
        let b = &self.basis;
        for (k, o) in out.iter_mut().enumerate() {
            *o = -d.detuning * b.excitations[k] - d.local_detuning * b.local_weight[k] + b.interaction[k];
        }
    }

    /// Upper bound on the spectral norm of H given its diagonal.
    pub(crate) fn norm_bound(&self, d: Drive, diagonal: &[f64]) -> f64 {
        let off = 0.5 * d.rabi.abs() * self.n_atoms() as f64;
        off + diagonal.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Dense H(t).
    pub fn evaluate(&self, t: f64) -> Result<HermitianOperator> {
        if !(t >= -DURATION_EPS && t <= self.duration + DURATION_EPS) {
            return Err(Error::TimeOutOfRange { t, duration: self.duration });
        }
        let d = self.drive(t.clamp(0.0, self.duration));
        let dim = self.dim();
        let mut diag = vec![0.0; dim];
        self.fill_diagonal(d, &mut diag);
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (k, v) in diag.iter().enumerate() {
            m[(k, k)] = Complex64::new(*v, 0.0);
        }
        // |g><r| maps the excited state to ground: element (ground, excited).
        let up = Complex64::from_polar(0.5 * d.rabi, self.phi);
        for k in 0..dim {
            for i in 0..self.n_atoms() {
                if k & (1 << i) != 0 {
                    let g = k ^ (1 << i);
                    m[(g, k)] += up;
                    m[(k, g)] += up.conj();
                }
            }
        }
        Ok(HermitianOperator { matrix: m })
    }
}

impl BasisTables {
    fn new(v: &InteractionMatrix, h: &[f64]) -> Self {
        let n = h.len();
        let dim = 1usize << n;
        let mut excitations = vec![0.0; dim];
        let mut local_weight = vec![0.0; dim];
        let mut interaction = vec![0.0; dim];
        for k in 0..dim {
            let on: Vec<usize> = (0..n).filter(|i| k & (1 << i) != 0).collect();
            excitations[k] = on.len() as f64;
            local_weight[k] = on.iter().map(|&i| h[i]).sum();
            interaction[k] = on
                .iter()
                .enumerate()
                .flat_map(|(a, &i)| on[a + 1..].iter().map(move |&j| (i, j)))
                .map(|(i, j)| v.get(i, j))
                .sum();
        }
        BasisTables { excitations, local_weight, interaction }
    }
}

/// Dense Hermitian matrix in rad/µs.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.matrix[(r, c)]
    }

    /// max |H - H†| over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }
}
