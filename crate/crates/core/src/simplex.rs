//! The probability simplex, its vertex Voronoi cells and the class-separation check.

use serde::{Deserialize, Serialize};

use crate::data::LabeledPointSet;
use crate::error::{Error, Result};
use crate::nn::{self, Activation, Network};

pub const SUM_TOLERANCE: f64 = 1e-9;
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Softmax of `z` written into `out`, shifted by `max(z)` before exponentiation.
pub fn softmax_into(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Index of the largest coordinate; ties go to the lowest index.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate().skip(1) {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// A point of `Δ_{n-1}`: `n ≥ 2` nonnegative coordinates summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a simplex point needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("simplex point"));
        }
        if let Some(c) = coords.iter().find(|&&c| c < -NEGATIVE_TOLERANCE) {
            return Err(Error::InvalidArgument(format!("negative simplex coordinate {c}")));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "simplex coordinates sum to {sum}, not 1"
            )));
        }
        Ok(Self(coords))
    }

    /// The vertex `v_i` of `Δ_{n-1}`.
    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::InvalidArgument(format!("vertex {i} of a {n}-point simplex")));
        }
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        Self::new(c)
    }

    pub fn barycenter(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for SimplexPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        SimplexPoint::new(coords).map_err(serde::de::Error::custom)
    }
}

/// `D ∘ Exp`: the softmax of a finite vector.
pub fn softmax_map(x: &[f64]) -> Result<SimplexPoint> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let mut out = vec![0.0; x.len()];
    softmax_into(x, &mut out);
    SimplexPoint::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Vertex(usize),
    Tie,
}

/// The vertex Voronoi cell containing `p`, or `Tie` when the two largest
/// coordinates are within [`TIE_TOLERANCE`].
///
/// With `‖p − v_i‖² = ‖p‖² − 2 p_i + 1`, the nearest vertex is the largest coordinate.
pub fn voronoi_cell_of(p: &SimplexPoint) -> Cell {
    cell_with_tolerance(p.coords(), TIE_TOLERANCE)
}

pub fn cell_with_tolerance(p: &[f64], tie_tol: f64) -> Cell {
    let top = argmax(p);
    let runner_up = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if p[top] - runner_up < tie_tol {
        Cell::Tie
    } else {
        Cell::Vertex(top)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationVerdict {
    /// `per_class[i]`: every sample of class `i` lies strictly inside `VC(v_i)`.
    pub per_class: Vec<bool>,
    pub separated: bool,
    pub accuracy: f64,
    /// Points whose top two output coordinates are within the tie tolerance.
    pub boundary_points: Vec<usize>,
    /// Cell assigned to each point, with ties resolved to the lowest index.
    pub assignments: Vec<usize>,
    /// Points of each class that fall outside their own cell.
    pub misplaced: Vec<usize>,
}

/// Checks whether the softmax outputs of every class land inside the Voronoi
/// cell of that class's vertex.
pub fn separation_verdict(net: &Network, data: &LabeledPointSet) -> Result<SeparationVerdict> {
    if net.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
        return Err(Error::InvalidNetwork("separation needs a softmax last layer".into()));
    }
    if net.output_dim() != data.num_classes {
        return Err(Error::DimensionMismatch {
            expected: data.num_classes,
            actual: net.output_dim(),
            context: "network output width vs number of classes",
        });
    }
    let outputs = data
        .points
        .iter()
        .map(|x| nn::forward(net, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(verdict_from_outputs(&outputs, &data.labels, data.num_classes))
}

/// The verdict for precomputed simplex outputs.
pub fn verdict_from_outputs(outputs: &[Vec<f64>], labels: &[usize], num_classes: usize) -> SeparationVerdict {
    let mut per_class = vec![true; num_classes];
    let mut boundary_points = Vec::new();
    let mut assignments = Vec::with_capacity(outputs.len());
    let mut misplaced = Vec::new();
    let mut correct = 0usize;
    for (i, (out, &label)) in outputs.iter().zip(labels).enumerate() {
        let assigned = argmax(out);
        assignments.push(assigned);
        if assigned == label {
            correct += 1;
        }
        let cell = cell_with_tolerance(out, TIE_TOLERANCE);
        if cell == Cell::Tie {
            boundary_points.push(i);
        }
        if cell != Cell::Vertex(label) {
            per_class[label] = false;
            misplaced.push(i);
        }
    }
    let accuracy = if outputs.is_empty() {
        0.0
    } else {
        correct as f64 / outputs.len() as f64
    };
    SeparationVerdict {
        separated: per_class.iter().all(|&b| b),
        per_class,
        accuracy,
        boundary_points,
        assignments,
        misplaced,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_values() {
        assert_eq!(softmax_map(&[0.0, 0.0]).unwrap().coords(), &[0.5, 0.5]);
        let p = softmax_map(&[2f64.ln(), 0.0]).unwrap();
        assert!((p.coords()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.coords()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(softmax_map(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn softmax_survives_extreme_inputs() {
        let p = softmax_map(&[1e4, -1e4, 0.0]).unwrap();
        assert_eq!(p.coords()[0], 1.0);
        let q = softmax_map(&[-1e4, -1e4]).unwrap();
        assert_eq!(q.coords(), &[0.5, 0.5]);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp(&[0.0, 0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cells() {
        let p = SimplexPoint::new(vec![0.7, 0.2, 0.1]).unwrap();
        assert_eq!(voronoi_cell_of(&p), Cell::Vertex(0));
        assert_eq!(voronoi_cell_of(&SimplexPoint::vertex(3, 2).unwrap()), Cell::Vertex(2));
        assert_eq!(voronoi_cell_of(&SimplexPoint::barycenter(3).unwrap()), Cell::Tie);
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![1.0]).is_err());
        assert!(SimplexPoint::new(vec![0.6, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexPoint::new(vec![1.0, -1e-13]).is_ok());
        assert!(serde_json::from_str::<SimplexPoint>("[0.2, 0.2]").is_err());
    }

    #[test]
    fn verdict_counts_ties_as_unseparated() {
        let outs = vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.2, 0.8]];
        let v = verdict_from_outputs(&outs, &[0, 1, 1], 2);
        assert_eq!(v.per_class, vec![true, false]);
        assert!(!v.separated);
        assert_eq!(v.boundary_points, vec![1]);
        assert_eq!(v.assignments, vec![0, 0, 1]);
        assert!((v.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }
}
