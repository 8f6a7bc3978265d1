//! Atom registers and their van der Waals interaction strengths.
//!
//! Positions are in micrometres. All families are indexed row-major
//! (ascending y, then ascending x), which is also the order the ring family
//! uses after placing its atoms on the circle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rydberg interaction coefficient in rad·µm⁶/µs.
pub const C6: f64 = 862_690.0 * 2.0 * std::f64::consts::PI;

/// Smallest atom separation the hardware accepts, in µm.
pub const MIN_SPACING_UM: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Chain,
    Ring,
    Square,
    Triangle,
}

impl GridKind {
    pub const ALL: [GridKind; 4] = [GridKind::Chain, GridKind::Ring, GridKind::Square, GridKind::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            GridKind::Chain => "chain",
            GridKind::Ring => "ring",
            GridKind::Square => "square",
            GridKind::Triangle => "triangle",
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chain" => Ok(GridKind::Chain),
            "ring" => Ok(GridKind::Ring),
            "square" => Ok(GridKind::Square),
            "triangle" | "triangular" => Ok(GridKind::Triangle),
            other => Err(Error::Grid(format!("unknown grid configuration '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomGrid {
    kind: GridKind,
    spacing: f64,
    positions: Vec<[f64; 2]>,
}

impl AtomGrid {
    /// Build one of the named register families.
    pub fn build(kind: GridKind, n_atoms: usize, spacing: f64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::Grid("n_atoms must be positive".into()));
        }
        if !spacing.is_finite() || spacing < MIN_SPACING_UM {
            return Err(Error::Grid(format!(
                "spacing {spacing} um is below the {MIN_SPACING_UM} um hardware floor"
            )));
        }
        Self::build_unchecked(kind, n_atoms, spacing)
    }

    /// Same layout as [`AtomGrid::build`] without the spacing floor, for
    /// deliberately out-of-spec registers. Export still refuses them.
    pub fn build_unchecked(kind: GridKind, n_atoms: usize, spacing: f64) -> Result<Self> {
        if n_atoms == 0 || !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Grid(format!("invalid register: {n_atoms} atoms at {spacing} um")));
        }
        let positions = match kind {
            GridKind::Chain => (0..n_atoms).map(|i| [i as f64 * spacing, 0.0]).collect(),
            GridKind::Square => lattice(n_atoms, spacing, false),
            GridKind::Triangle => lattice(n_atoms, spacing, true),
            GridKind::Ring => ring(n_atoms, spacing),
        };
        Self::from_positions(kind, spacing, positions)
    }

    /// Explicit register. Only distinctness is enforced; the spacing floor is
    /// a hardware constraint checked at export time.
    pub fn from_positions(kind: GridKind, spacing: f64, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Grid("register has no atoms".into()));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Grid("non-finite atom coordinate".into()));
        }
        let grid = AtomGrid { kind, spacing, positions };
        for (i, j, d) in grid.pairs() {
            if d == 0.0 {
                return Err(Error::Grid(format!("atoms {i} and {j} coincide")));
            }
        }
        Ok(grid)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [xi, yi] = self.positions[i];
        let [xj, yj] = self.positions[j];
        (xi - xj).hypot(yi - yj)
    }

    /// All unordered pairs `(i, j, distance)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n_atoms();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.distance(i, j))))
    }

    pub fn min_pair_distance(&self) -> Result<f64> {
        self.pairs()
            .map(|(_, _, d)| d)
            .reduce(f64::min)
            .ok_or_else(|| Error::Grid("minimum pair distance needs at least 2 atoms".into()))
    }

    pub fn interaction_matrix(&self) -> Result<InteractionMatrix> {
        let n = self.n_atoms();
        let mut values = vec![0.0; n * n];
        for (i, j, d) in self.pairs() {
            if d == 0.0 {
                return Err(Error::Grid(format!("atoms {i} and {j} coincide")));
            }
            let v = C6 / d.powi(6);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        Ok(InteractionMatrix { n, values })
    }

    pub(crate) fn with_positions(&self, positions: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_positions(self.kind, self.spacing, positions)
    }
}

/// Symmetric pairwise C6/d⁶ couplings in rad/µs, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    n: usize,
    values: Vec<f64>,
}

impl InteractionMatrix {
    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n.max(1))
    }
}

fn columns_for(n: usize) -> usize {
    let mut c = 1;
    while c * c < n {
        c += 1;
    }
    c
}

fn lattice(n: usize, spacing: f64, triangular: bool) -> Vec<[f64; 2]> {
    let cols = columns_for(n);
    let pitch = if triangular { spacing * 3f64.sqrt() / 2.0 } else { spacing };
    (0..n)
        .map(|k| {
            let (row, col) = (k / cols, k % cols);
            let shift = if triangular && row % 2 == 1 { spacing / 2.0 } else { 0.0 };
            [col as f64 * spacing + shift, row as f64 * pitch]
        })
        .collect()
}

fn ring(n: usize, spacing: f64) -> Vec<[f64; 2]> {
    if n <= 2 {
        return (0..n).map(|i| [i as f64 * spacing, 0.0]).collect();
    }
    use std::f64::consts::PI;
    let radius = spacing / (2.0 * (PI / n as f64).sin());
    // Start half a step below -pi/2 so the bottom edge is horizontal.
    let start = -PI / 2.0 - PI / n as f64;
    let mut pts: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let theta = start + 2.0 * PI * k as f64 / n as f64;
            [radius * theta.cos(), radius * theta.sin()]
        })
        .collect();
    let min_x = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let min_y = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    for p in &mut pts {
        p[0] -= min_x;
        p[1] -= min_y;
    }
    let key = |v: f64| (v / spacing * 1e9).round() as i64;
    pts.sort_by_key(|p| (key(p[1]), key(p[0])));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chain_positions() {
        let g = AtomGrid::build(GridKind::Chain, 3, 10.0).unwrap();
        assert_eq!(g.positions(), &[[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]]);
        assert_eq!(g.min_pair_distance().unwrap(), 10.0);
    }

    #[test]
    fn square_positions() {
        let g = AtomGrid::build(GridKind::Square, 4, 12.0).unwrap();
        assert_eq!(g.positions(), &[[0.0, 0.0], [12.0, 0.0], [0.0, 12.0], [12.0, 12.0]]);
        assert_eq!(g.min_pair_distance().unwrap(), 12.0);
    }

    #[test]
    fn square_partial_last_row() {
        let g = AtomGrid::build(GridKind::Square, 5, 5.0).unwrap();
        assert_eq!(g.positions()[3], [0.0, 5.0]);
        assert_eq!(g.positions()[4], [5.0, 5.0]);
        let g = AtomGrid::build(GridKind::Square, 10, 5.0).unwrap();
        assert_eq!(g.positions()[9], [5.0, 10.0]);
    }

    #[test]
    fn triangle_rows_are_offset() {
        let s = 10.0;
        let g = AtomGrid::build(GridKind::Triangle, 4, s).unwrap();
        let h = s * 3f64.sqrt() / 2.0;
        assert_eq!(g.positions(), &[[0.0, 0.0], [s, 0.0], [s / 2.0, h], [1.5 * s, h]]);
        assert_relative_eq!(g.min_pair_distance().unwrap(), s, epsilon = 1e-12);
    }

    #[test]
    fn ring_neighbours_have_chord_spacing() {
        for n in 3..9 {
            let g = AtomGrid::build(GridKind::Ring, n, 7.0).unwrap();
            let cx = g.positions().iter().map(|p| p[0]).sum::<f64>() / n as f64;
            let cy = g.positions().iter().map(|p| p[1]).sum::<f64>() / n as f64;
            let radii: Vec<f64> = g.positions().iter().map(|p| (p[0] - cx).hypot(p[1] - cy)).collect();
            for r in &radii {
                assert_relative_eq!(*r, radii[0], epsilon = 1e-9);
            }
            assert_relative_eq!(g.min_pair_distance().unwrap(), 7.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ring_of_four_matches_square_labelling() {
        let ring = AtomGrid::build(GridKind::Ring, 4, 12.0).unwrap();
        let square = AtomGrid::build(GridKind::Square, 4, 12.0).unwrap();
        for (a, b) in ring.positions().iter().zip(square.positions()) {
            assert_relative_eq!(a[0], b[0], epsilon = 1e-9);
            assert_relative_eq!(a[1], b[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn interaction_values() {
        let g = AtomGrid::from_positions(GridKind::Chain, 12.0, vec![[0.0, 0.0], [12.0, 0.0]]).unwrap();
        assert_relative_eq!(g.interaction_matrix().unwrap().get(0, 1), 1.8153, epsilon = 1e-4);
        let g = AtomGrid::from_positions(GridKind::Chain, 9.0, vec![[0.0, 0.0], [9.0, 0.0]]).unwrap();
        assert_relative_eq!(g.interaction_matrix().unwrap().get(1, 0), 10.1995, epsilon = 1e-4);
        let g = AtomGrid::build(GridKind::Chain, 1, 5.0).unwrap();
        let m = g.interaction_matrix().unwrap();
        assert_eq!(m.n_atoms(), 1);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn three_four_five() {
        let g = AtomGrid::from_positions(GridKind::Chain, 5.0, vec![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(g.min_pair_distance().unwrap(), 5.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(AtomGrid::build(GridKind::Chain, 0, 10.0).is_err());
        assert!(AtomGrid::build(GridKind::Chain, 3, 3.9).is_err());
        assert!(AtomGrid::build(GridKind::Chain, 3, f64::NAN).is_err());
        assert!("hexagon".parse::<GridKind>().is_err());
        assert!(AtomGrid::from_positions(GridKind::Chain, 5.0, vec![[1.0, 1.0], [1.0, 1.0]]).is_err());
        let single = AtomGrid::build(GridKind::Square, 1, 5.0).unwrap();
        assert!(single.min_pair_distance().is_err());
    }
}
