//! Per-layer topological moves.
//!
//! A layer `x ↦ σ(W x + b)` is read as a linear map (scaling, rotation,
//! reflection, and quotienting along its kernel), a translation by `b`, and
//! for ReLU layers a clamp that acts on the affine image as the identity,
//! a bending, or a quotient. ReLU labels are evidence on sampled points only:
//! a finite cloud can miss a collision that the underlying set has.

use serde::{Deserialize, Serialize};

use crate::cloud::{self, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::nn::{Activation, ActivationTrace, Network};

pub const COLLISION_TOLERANCE: f64 = 1e-9;
pub const MAX_WITNESSES: usize = 10;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMoveReport {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Nonincreasing, `min(rows, cols)` entries.
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
    /// Orthonormal basis of the kernel, `cols − rank` vectors.
    pub null_basis: Vec<Vec<f64>>,
    /// `(det U, det V)` of the orthogonal SVD factors.
    pub orthogonal_factor_dets: (f64, f64),
    /// `rank == min(rows, cols)`.
    pub is_full_rank: bool,
    /// Orientation reversal; only defined for square full-rank maps.
    pub reflection: Option<bool>,
}

impl LinearMoveReport {
    /// Distinct inputs identified by the map, i.e. a nontrivial kernel.
    pub fn has_kernel(&self) -> bool {
        self.rank < self.cols
    }

    pub fn kernel_dim(&self) -> usize {
        self.cols - self.rank
    }
}

/// Default rank tolerance: `max(rows, cols) · σ_max · ε_machine`.
pub fn default_rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * f64::EPSILON
}

pub fn decompose_linear(w: &Matrix) -> Result<LinearMoveReport> {
    decompose_linear_with(w, None)
}

/// [`decompose_linear`] with an explicit absolute rank tolerance.
pub fn decompose_linear_with(w: &Matrix, rank_tolerance: Option<f64>) -> Result<LinearMoveReport> {
    if !w.is_finite() {
        return Err(Error::NonFinite("linear map"));
    }
    let (m, n) = (w.rows(), w.cols());
    let svd = linalg::svd(w);
    let sigma_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance.unwrap_or_else(|| default_rank_tolerance(m, n, sigma_max));
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let null_basis = (rank..n).map(|j| svd.v.column(j)).collect();
    let det_u = svd.u.determinant()?;
    let det_v = svd.v.determinant()?;
    let is_full_rank = rank == m.min(n);
    let reflection = (m == n && is_full_rank).then_some(det_u * det_v < 0.0);
    Ok(LinearMoveReport {
        rows: m,
        cols: n,
        rank,
        singular_values: svd.singular_values,
        rank_tolerance: tol,
        null_basis,
        orthogonal_factor_dets: (det_u.signum(), det_v.signum()),
        is_full_rank,
        reflection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReluAction {
    IdentityAction,
    Bending,
    Quotienting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluActionReport {
    pub action: ReluAction,
    pub sampled_points: usize,
    pub collision_pair_count: u64,
    /// Up to [`MAX_WITNESSES`] index pairs `(i, j)`, `i < j`, with equal
    /// clamped images and distinct pre-images.
    pub witnesses: Vec<(usize, usize)>,
    /// Number of negative coordinates of each point.
    pub orthant_census: Vec<usize>,
    pub points_with_negatives: usize,
}

pub fn relu_clamp(cloud: &PointCloud) -> PointCloud {
    let data = cloud.as_flat().iter().map(|v| v.max(0.0)).collect();
    PointCloud::from_flat(cloud.dim(), data).expect("same shape")
}

pub fn classify_relu_action(cloud: &PointCloud) -> Result<ReluActionReport> {
    classify_relu_action_with(cloud, COLLISION_TOLERANCE)
}

/// Classifies the clamp on `cloud`; precedence is Quotienting, then Bending,
/// then IdentityAction. Points with only nonnegative coordinates are fixed by
/// the clamp, so the identity test is on nonnegativity.
pub fn classify_relu_action_with(cloud: &PointCloud, collision_tol: f64) -> Result<ReluActionReport> {
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("ReLU action of an empty cloud".into()));
    }
    if !cloud.is_finite() {
        return Err(Error::NonFinite("ReLU input cloud"));
    }
    let orthant_census: Vec<usize> = cloud
        .iter()
        .map(|p| p.iter().filter(|&&v| v < 0.0).count())
        .collect();
    let points_with_negatives = orthant_census.iter().filter(|&&c| c > 0).count();

    let (collision_pair_count, witnesses) = if points_with_negatives == 0 {
        (0, Vec::new())
    } else {
        find_collisions(cloud, &relu_clamp(cloud), collision_tol)
    };

    let action = if collision_pair_count > 0 {
        ReluAction::Quotienting
    } else if points_with_negatives > 0 {
        ReluAction::Bending
    } else {
        ReluAction::IdentityAction
    };
    Ok(ReluActionReport {
        action,
        sampled_points: cloud.len(),
        collision_pair_count,
        witnesses,
        orthant_census,
        points_with_negatives,
    })
}

/// Pairs whose images are within `tol` while the pre-images are farther apart.
///
/// Candidates are pruned by sorting on a projection: `|u·(a − b)| ≤ ‖a − b‖`
/// for a unit `u`, so no colliding pair is skipped.
fn find_collisions(pre: &PointCloud, post: &PointCloud, tol: f64) -> (u64, Vec<(usize, usize)>) {
    let d = post.dim();
    let raw: Vec<f64> = (0..d).map(|k| 1.0 + 0.618_033_988_749_895 * k as f64).collect();
    let len = cloud::norm(&raw);
    let u: Vec<f64> = raw.iter().map(|v| v / len).collect();
    let keys: Vec<f64> = post.iter().map(|p| cloud::dot(p, &u)).collect();
    let mut order: Vec<usize> = (0..post.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));

    let tol2 = tol * tol;
    let mut count = 0u64;
    let mut witnesses = Vec::new();
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            if keys[j] - keys[i] > tol {
                break;
            }
            if cloud::squared_distance(post.point(i), post.point(j)) <= tol2
                && cloud::squared_distance(pre.point(i), pre.point(j)) > tol2
            {
                count += 1;
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push((i.min(j), i.max(j)));
                }
            }
        }
    }
    witnesses.sort_unstable();
    (count, witnesses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologicalMove {
    Scaling,
    Rotation,
    Reflection,
    Translation,
    Bending,
    Quotienting,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveReport {
    /// 1-based position of the layer in the network.
    pub layer: usize,
    pub activation: Activation,
    pub linear: LinearMoveReport,
    pub translation_norm: f64,
    /// ReLU layers only.
    pub relu: Option<ReluActionReport>,
    pub moves: Vec<TopologicalMove>,
}

impl MoveReport {
    /// Rank-deficient linear part or ReLU collisions on the sample.
    pub fn has_quotienting(&self) -> bool {
        self.moves.contains(&TopologicalMove::Quotienting)
    }
}

fn is_signed_permutation(m: &Matrix) -> bool {
    (0..m.rows()).all(|i| {
        m.row(i)
            .iter()
            .filter(|v| v.abs() > UNIT_TOLERANCE)
            .count()
            == 1
    })
}

fn derive_moves(linear: &LinearMoveReport, svd: &linalg::Svd, translation: f64, relu: Option<&ReluActionReport>) -> Vec<TopologicalMove> {
    let mut moves = Vec::new();
    let stretched = linear
        .singular_values
        .iter()
        .any(|&s| s > linear.rank_tolerance && (s - 1.0).abs() > UNIT_TOLERANCE);
    if stretched {
        moves.push(TopologicalMove::Scaling);
    }
    if !is_signed_permutation(&svd.u) || !is_signed_permutation(&svd.v) {
        moves.push(TopologicalMove::Rotation);
    }
    if linear.reflection == Some(true) {
        moves.push(TopologicalMove::Reflection);
    }
    if translation > 0.0 {
        moves.push(TopologicalMove::Translation);
    }
    let relu_action = relu.map(|r| r.action);
    if relu_action == Some(ReluAction::Bending) {
        moves.push(TopologicalMove::Bending);
    }
    if linear.has_kernel() || relu_action == Some(ReluAction::Quotienting) {
        moves.push(TopologicalMove::Quotienting);
    }
    if moves.is_empty() {
        moves.push(TopologicalMove::Identity);
    }
    moves
}

fn check_trace(net: &Network, trace: &ActivationTrace) -> Result<()> {
    let mismatch = |m: String| Err(Error::TraceMismatch(m));
    if trace.clouds.len() != net.num_layers() + 1 {
        return mismatch(format!(
            "trace has {} clouds but the network has {} layers",
            trace.clouds.len(),
            net.num_layers()
        ));
    }
    let n = trace.labels.len();
    for (i, c) in trace.clouds.iter().enumerate() {
        let expected = if i == 0 {
            net.input_dim()
        } else {
            net.layers[i - 1].out_dim()
        };
        if c.dim() != expected {
            return mismatch(format!("cloud {i} has dimension {} but layer expects {expected}", c.dim()));
        }
        if c.len() != n {
            return mismatch(format!("cloud {i} has {} points but the trace has {n} labels", c.len()));
        }
    }
    Ok(())
}

/// Moves of layer `layer_index` (0-based) on its traced input cloud.
///
/// The ReLU classification runs on the affine image `{W x + b}` of the
/// layer's input cloud, and the stored output cloud must agree with the
/// network's own evaluation.
pub fn layer_move_summary(net: &Network, layer_index: usize, trace: &ActivationTrace) -> Result<MoveReport> {
    if layer_index >= net.num_layers() {
        return Err(Error::InvalidArgument(format!(
            "layer index {layer_index} out of range for {} layers",
            net.num_layers()
        )));
    }
    check_trace(net, trace)?;
    let layer = &net.layers[layer_index];
    let input = &trace.clouds[layer_index];
    let stored = &trace.clouds[layer_index + 1];

    let mut affine = PointCloud::with_capacity(layer.out_dim(), input.len());
    let mut buf = vec![0.0; layer.out_dim()];
    for (k, x) in input.iter().enumerate() {
        let (pre, post) = layer.apply(x);
        let scale = 1.0 + cloud::norm(&post);
        if cloud::distance(&post, stored.point(k)) > 1e-9 * scale {
            return Err(Error::TraceMismatch(format!(
                "point {k} of cloud {} does not match layer {} applied to cloud {layer_index}",
                layer_index + 1,
                layer_index + 1
            )));
        }
        buf.copy_from_slice(&pre);
        affine.push(&buf)?;
    }

    let linear = decompose_linear(&layer.weights)?;
    let svd = linalg::svd(&layer.weights);
    let translation_norm = cloud::norm(&layer.bias);
    let relu = match layer.activation {
        Activation::Relu if !affine.is_empty() => Some(classify_relu_action(&affine)?),
        _ => None,
    };
    let moves = derive_moves(&linear, &svd, translation_norm, relu.as_ref());
    Ok(MoveReport {
        layer: layer_index + 1,
        activation: layer.activation,
        linear,
        translation_norm,
        relu,
        moves,
    })
}

/// [`layer_move_summary`] for every layer in order.
pub fn network_move_summary(net: &Network, trace: &ActivationTrace) -> Result<Vec<MoveReport>> {
    (0..net.num_layers())
        .map(|i| layer_move_summary(net, i, trace))
        .collect()
}
