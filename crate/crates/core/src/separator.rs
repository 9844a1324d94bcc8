//! Explicit separators for labelled point sets.
//!
//! [`urysohn_pair`] and [`urysohn_multiclass`] build the distance-quotient
//! functions `d(x,A) / (d(x,A) + d(x,B))`, which are defined and continuous on
//! all of ℝ^d whenever the stored sets are disjoint. [`lift_to_rk`] pads such
//! a function with zero coordinates. [`disc_separability_check`] decides, with
//! a certificate, whether class images sit in pairwise disjoint convex hulls,
//! and [`kernel_collision_witness`] produces two points that a dimension-
//! reducing first layer cannot tell apart.

use serde::{Deserialize, Serialize};

use crate::cloud::{self, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Default tolerance below which two input sets are considered to collide.
pub const SET_COLLISION_TOLERANCE: f64 = 1e-12;
/// Default tolerance for collisions between class images.
pub const IMAGE_COLLISION_TOLERANCE: f64 = 1e-9;
/// Default bound on `‖W p1 − W p2‖` for kernel witnesses.
pub const WITNESS_RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum FieldKind {
    Pair { zero: PointCloud, one: PointCloud },
    Multiclass { classes: Vec<PointCloud> },
}

/// A closed-form continuous map ℝ^d → ℝ defined by distances to stored sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dim: usize,
    kind: FieldKind,
}

impl ScalarField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The reference sets, in the order they were supplied.
    pub fn reference_sets(&self) -> Vec<&PointCloud> {
        match &self.kind {
            FieldKind::Pair { zero, one } => vec![zero, one],
            FieldKind::Multiclass { classes } => classes.iter().collect(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
                context: "scalar field evaluation",
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("scalar field input"));
        }
        Ok(match &self.kind {
            FieldKind::Pair { zero, one } => {
                quotient(cloud::distance_to_set(x, zero), cloud::distance_to_set(x, one))
            }
            FieldKind::Multiclass { classes } => {
                let d: Vec<f64> = classes.iter().map(|c| cloud::distance_to_set(x, c)).collect();
                multiclass_value(&d)
            }
        })
    }
}

/// `f = 1 + Σ_{i=2..n} f_i` with `f_i` separating classes `1..i−1` (value 0)
/// from classes `i..n` (value 1), given the distance to every class.
fn multiclass_value(class_distances: &[f64]) -> f64 {
    let n = class_distances.len();
    let mut below = f64::INFINITY;
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix_min[i] = suffix_min[i + 1].min(class_distances[i]);
    }
    let mut value = 1.0;
    for i in 1..n {
        below = below.min(class_distances[i - 1]);
        value += quotient(below, suffix_min[i]);
    }
    value
}

#[inline]
fn quotient(to_zero_set: f64, to_one_set: f64) -> f64 {
    to_zero_set / (to_zero_set + to_one_set)
}

/// The nearest cross pair between two sets, if it is within `tol`.
fn find_collision(a: &PointCloud, b: &PointCloud, tol: f64) -> Option<(usize, usize, f64)> {
    let tol2 = tol * tol;
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d2 = cloud::squared_distance(p, q);
            if d2 <= tol2 && best.is_none_or(|(_, _, bd)| d2 < bd) {
                best = Some((i, j, d2));
            }
        }
    }
    best.map(|(i, j, d2)| (i, j, d2.sqrt()))
}

fn check_sets(sets: &[&PointCloud]) -> Result<usize> {
    let dim = sets[0].dim();
    for s in sets {
        if s.is_empty() {
            return Err(Error::InvalidArgument("separator reference sets must be nonempty".into()));
        }
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: s.dim(),
                context: "separator reference sets",
            });
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("separator reference set"));
        }
    }
    Ok(dim)
}

/// Urysohn function with `f ≡ 0` on `a` and `f ≡ 1` on `b`.
pub fn urysohn_pair(a: &PointCloud, b: &PointCloud) -> Result<ScalarField> {
    urysohn_pair_with_tolerance(a, b, SET_COLLISION_TOLERANCE)
}

pub fn urysohn_pair_with_tolerance(a: &PointCloud, b: &PointCloud, tol: f64) -> Result<ScalarField> {
    let dim = check_sets(&[a, b])?;
    if let Some((i, j, d)) = find_collision(a, b, tol) {
        return Err(Error::Collision {
            left_index: i,
            right_index: j,
            distance: d,
        });
    }
    Ok(ScalarField {
        dim,
        kind: FieldKind::Pair {
            zero: a.clone(),
            one: b.clone(),
        },
    })
}

/// n-class Urysohn function: with classes numbered 1…n in the order given,
/// `f` equals `j` on every point of class `j`.
pub fn urysohn_multiclass(classes: &[PointCloud]) -> Result<ScalarField> {
    urysohn_multiclass_with_tolerance(classes, SET_COLLISION_TOLERANCE)
}

pub fn urysohn_multiclass_with_tolerance(classes: &[PointCloud], tol: f64) -> Result<ScalarField> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("need at least one class".into()));
    }
    let refs: Vec<&PointCloud> = classes.iter().collect();
    let dim = check_sets(&refs)?;
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            if let Some((pi, pj, d)) = find_collision(&classes[i], &classes[j], tol) {
                return Err(Error::Collision {
                    left_index: pi,
                    right_index: pj,
                    distance: d,
                });
            }
        }
    }
    Ok(ScalarField {
        dim,
        kind: FieldKind::Multiclass {
            classes: classes.to_vec(),
        },
    })
}

/// `x ↦ (f(x), 0, …, 0) ∈ ℝ^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    pub field: ScalarField,
    pub k: usize,
}

impl LiftedField {
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        out[0] = self.field.evaluate(x)?;
        Ok(out)
    }

    /// Image of every point of `cloud`.
    pub fn image(&self, cloud: &PointCloud) -> Result<PointCloud> {
        let mut out = PointCloud::with_capacity(self.k, cloud.len());
        for p in cloud.iter() {
            out.push(&self.evaluate(p)?)?;
        }
        Ok(out)
    }
}

pub fn lift_to_rk(field: ScalarField, k: usize) -> Result<LiftedField> {
    if k == 0 {
        return Err(Error::InvalidArgument("target dimension k must be >= 1".into()));
    }
    Ok(LiftedField { field, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparabilityStatus {
    SeparableByConvexDiscs,
    Collision,
    Inconclusive,
}

/// Two coincident points with different labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionWitness {
    pub class_a: usize,
    pub index_a: usize,
    pub point_a: Vec<f64>,
    pub class_b: usize,
    pub index_b: usize,
    pub point_b: Vec<f64>,
    pub distance: f64,
}

/// Hyperplane `⟨normal, x⟩ = offset` with class `class_a` strictly on the
/// positive side and `class_b` strictly on the negative side. `margin` is the
/// smallest value of `⟨normal, a⟩ − ⟨normal, b⟩` over the two sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatingHyperplane {
    pub class_a: usize,
    pub class_b: usize,
    pub normal: Vec<f64>,
    pub offset: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityVerdict {
    pub status: SeparabilityStatus,
    /// Present only for [`SeparabilityStatus::Collision`].
    pub collision: Option<CollisionWitness>,
    /// One certificate per class pair for
    /// [`SeparabilityStatus::SeparableByConvexDiscs`]; for `Inconclusive`, the
    /// certificates found before the first overlapping pair.
    pub hyperplanes: Vec<SeparatingHyperplane>,
    /// Class pair whose hulls could not be separated, for `Inconclusive`.
    pub overlapping_pair: Option<(usize, usize)>,
}

/// Decides whether the class images can be enclosed in pairwise disjoint
/// convex discs.
///
/// Disjoint convex hulls are a sufficient certificate (thicken each hull
/// slightly), two differently labelled points within `1e-9` are a proof of
/// failure, and anything else is reported as inconclusive.
pub fn disc_separability_check(class_images: &[PointCloud]) -> Result<SeparabilityVerdict> {
    disc_separability_check_with_tolerance(class_images, IMAGE_COLLISION_TOLERANCE)
}

pub fn disc_separability_check_with_tolerance(
    class_images: &[PointCloud],
    collision_tol: f64,
) -> Result<SeparabilityVerdict> {
    if class_images.len() < 2 {
        return Err(Error::InvalidArgument("need at least two class images".into()));
    }
    let refs: Vec<&PointCloud> = class_images.iter().collect();
    check_sets(&refs)?;

    for a in 0..class_images.len() {
        for b in a + 1..class_images.len() {
            if let Some((i, j, d)) = find_collision(&class_images[a], &class_images[b], collision_tol) {
                return Ok(SeparabilityVerdict {
                    status: SeparabilityStatus::Collision,
                    collision: Some(CollisionWitness {
                        class_a: a,
                        index_a: i,
                        point_a: class_images[a].point(i).to_vec(),
                        class_b: b,
                        index_b: j,
                        point_b: class_images[b].point(j).to_vec(),
                        distance: d,
                    }),
                    hyperplanes: Vec::new(),
                    overlapping_pair: None,
                });
            }
        }
    }

    let mut hyperplanes = Vec::new();
    for a in 0..class_images.len() {
        for b in a + 1..class_images.len() {
            match separate_hulls(&class_images[a], &class_images[b]) {
                Some((normal, offset, margin)) => hyperplanes.push(SeparatingHyperplane {
                    class_a: a,
                    class_b: b,
                    normal,
                    offset,
                    margin,
                }),
                None => {
                    return Ok(SeparabilityVerdict {
                        status: SeparabilityStatus::Inconclusive,
                        collision: None,
                        hyperplanes,
                        overlapping_pair: Some((a, b)),
                    })
                }
            }
        }
    }
    Ok(SeparabilityVerdict {
        status: SeparabilityStatus::SeparableByConvexDiscs,
        collision: None,
        hyperplanes,
        overlapping_pair: None,
    })
}

/// Strictly separating hyperplane between conv(a) and conv(b), verified
/// against every point, or `None` when the hulls (numerically) meet.
pub fn separate_hulls(a: &PointCloud, b: &PointCloud) -> Option<(Vec<f64>, f64, f64)> {
    let w = min_norm_point(a, b);
    let wn = cloud::norm(&w);
    if wn == 0.0 || !wn.is_finite() {
        return None;
    }
    let min_a = a.iter().map(|p| cloud::dot(&w, p)).fold(f64::INFINITY, f64::min);
    let max_b = b.iter().map(|p| cloud::dot(&w, p)).fold(f64::NEG_INFINITY, f64::max);
    let margin = min_a - max_b;
    let scale = a
        .iter()
        .chain(b.iter())
        .map(cloud::norm)
        .fold(0.0f64, f64::max)
        .max(1.0);
    // Demand a margin well above the rounding noise in the dot products.
    if margin > 1e-12 * wn * scale {
        Some((w, 0.5 * (min_a + max_b), margin))
    } else {
        None
    }
}

/// Wolfe's minimum-norm-point algorithm on the Minkowski difference
/// conv(a) − conv(b), driven by its linear minimisation oracle. The returned
/// vector is (approximately) the shortest `p − q` with `p ∈ conv(a)` and
/// `q ∈ conv(b)`; it is zero or tiny when the hulls intersect.
pub fn min_norm_point(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let dim = a.dim();
    let vertex = |ia: usize, ib: usize| -> Vec<f64> {
        a.point(ia).iter().zip(b.point(ib)).map(|(x, y)| x - y).collect()
    };
    let oracle = |x: &[f64]| -> (usize, usize) {
        let ia = argmin_by(a.iter().map(|p| cloud::dot(x, p)));
        let ib = argmin_by(b.iter().map(|p| -cloud::dot(x, p)));
        (ia, ib)
    };
    let scale2 = {
        let ra = a.iter().map(cloud::norm).fold(0.0f64, f64::max);
        let rb = b.iter().map(cloud::norm).fold(0.0f64, f64::max);
        ((ra + rb) * (ra + rb)).max(f64::MIN_POSITIVE)
    };

    let mut ids: Vec<(usize, usize)> = vec![(0, 0)];
    let mut corral: Vec<Vec<f64>> = vec![vertex(0, 0)];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = corral[0].clone();

    let max_major = 200 * (dim + 1) + 1000;
    for _ in 0..max_major {
        let xx = cloud::dot(&x, &x);
        if xx <= 1e-24 * scale2 {
            break;
        }
        let (ia, ib) = oracle(&x);
        let q = vertex(ia, ib);
        if xx - cloud::dot(&x, &q) <= 1e-13 * scale2 || ids.contains(&(ia, ib)) {
            break;
        }
        ids.push((ia, ib));
        corral.push(q);
        weights.push(0.0);

        // Minor cycles: move to the affine minimiser of the corral, dropping
        // points whose weight would turn negative.
        loop {
            let Some(alpha) = affine_minimizer(&corral) else {
                ids.pop();
                corral.pop();
                weights.pop();
                return x;
            };
            if alpha.iter().all(|&v| v > 1e-15) {
                weights = alpha;
                x = combine(&corral, &weights, dim);
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &al)| al <= 1e-15)
                .map(|(&w, &al)| if w - al > 0.0 { w / (w - al) } else { 0.0 })
                .fold(1.0f64, f64::min);
            for (w, al) in weights.iter_mut().zip(&alpha) {
                *w = theta * al + (1.0 - theta) * *w;
            }
            let mut keep = weights.iter().map(|&w| w > 1e-15).collect::<Vec<_>>();
            if keep.iter().all(|&k| k) {
                // Numerical stall: drop the smallest weight.
                let drop = argmin_by(weights.iter().copied());
                keep[drop] = false;
            }
            let mut idx = 0;
            corral.retain(|_| {
                idx += 1;
                keep[idx - 1]
            });
            idx = 0;
            ids.retain(|_| {
                idx += 1;
                keep[idx - 1]
            });
            weights = weights
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(&w, _)| w)
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            x = combine(&corral, &weights, dim);
            if corral.len() == 1 {
                break;
            }
        }
    }
    x
}

fn combine(points: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (p, &w) in points.iter().zip(weights) {
        for (xi, pi) in x.iter_mut().zip(p) {
            *xi += w * pi;
        }
    }
    x
}

/// Weights α (Σα = 1) of the point of minimum norm in the affine hull of
/// `points`, or `None` if the points are affinely dependent.
fn affine_minimizer(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = points.len();
    if m == 1 {
        return Some(vec![1.0]);
    }
    let base = &points[0];
    let diffs: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(x, y)| x - y).collect())
        .collect();
    let mut gram = Matrix::zeros(m - 1, m - 1);
    let mut rhs = vec![0.0; m - 1];
    for i in 0..m - 1 {
        for j in i..m - 1 {
            let v = cloud::dot(&diffs[i], &diffs[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        rhs[i] = -cloud::dot(&diffs[i], base);
    }
    let beta = linalg::solve(&gram, &rhs)?;
    let mut alpha = Vec::with_capacity(m);
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta);
    Some(alpha)
}

fn argmin_by(values: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::INFINITY;
    let mut idx = 0;
    for (i, v) in values.enumerate() {
        if v < best {
            best = v;
            idx = i;
        }
    }
    idx
}

/// Two points along a kernel direction of a dimension-reducing matrix: one in
/// the inner ball, one in the outer shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWitness {
    /// Unit kernel direction, sign-normalised so its largest-magnitude entry
    /// is positive.
    pub direction: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// `‖W p1 − W p2‖`.
    pub residual: f64,
}

/// For `W: ℝⁿ → ℝᵏ` with `k < n`, returns `p1 = s₁·v̂` and `p2 = s₂·v̂` with
/// `W p1 = W p2`, `‖p1‖ ≤ inner_radius` and `shell.0 ≤ ‖p2‖ ≤ shell.1`.
///
/// `v̂` is the right singular vector of the smallest singular value. With the
/// default radii (0.9, [1, 2]) the scales are `s₁ = 0.5` and `s₂ = 1.5`; in
/// general `s₁ = min(0.5, inner/2)` when `inner < 0.5` and `s₂` is the middle
/// of the shell.
pub fn kernel_collision_witness(
    w: &Matrix,
    inner_radius: f64,
    shell: (f64, f64),
) -> Result<KernelWitness> {
    let (k, n) = (w.rows(), w.cols());
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "kernel witness needs a dimension-reducing map (k < n), got {k}x{n}"
        )));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("weight matrix"));
    }
    if !(inner_radius > 0.0 && inner_radius < shell.0 && shell.0 <= shell.1) {
        return Err(Error::InvalidArgument(format!(
            "radii must satisfy 0 < inner < shell start <= shell end, got {inner_radius}, {shell:?}"
        )));
    }
    let decomposition = linalg::svd(w);
    let mut direction = decomposition.v.column(n - 1);
    let norm = cloud::norm(&direction);
    direction.iter_mut().for_each(|v| *v /= norm);
    let lead = argmin_by(direction.iter().map(|v| -v.abs()));
    if direction[lead] < 0.0 {
        direction.iter_mut().for_each(|v| *v = -*v);
    }
    let s1 = if inner_radius >= 0.5 { 0.5 } else { inner_radius / 2.0 };
    let s2 = 0.5 * (shell.0 + shell.1);
    let p1: Vec<f64> = direction.iter().map(|v| s1 * v).collect();
    let p2: Vec<f64> = direction.iter().map(|v| s2 * v).collect();
    let diff: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a - b).collect();
    let residual = cloud::norm(&w.matvec(&diff)?);
    Ok(KernelWitness {
        direction,
        p1,
        p2,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Shape, ShapeSpec};

    fn line(values: &[f64]) -> PointCloud {
        PointCloud::from_flat(1, values.to_vec()).unwrap()
    }

    #[test]
    fn pair_values_on_the_line() {
        let f = urysohn_pair(&line(&[0.0]), &line(&[1.0])).unwrap();
        assert_eq!(f.evaluate(&[0.0]).unwrap(), 0.0);
        assert_eq!(f.evaluate(&[1.0]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[0.5]).unwrap(), 0.5);
        assert!(f.evaluate(&[0.5, 1.0]).is_err());
        assert!(f.evaluate(&[f64::NAN]).is_err());
    }

    #[test]
    fn pair_rejects_colliding_sets() {
        let err = urysohn_pair(&line(&[0.0, 3.0]), &line(&[1.0, 3.0])).unwrap_err();
        match err {
            Error::Collision {
                left_index,
                right_index,
                ..
            } => assert_eq!((left_index, right_index), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pair_is_exact_on_annulus_classes() {
        let data = generate(&ShapeSpec::new(Shape::default_annulus(), 200, 4)).unwrap();
        let a = data.class_points(0);
        let b = data.class_points(1);
        let f = urysohn_pair(&a, &b).unwrap();
        assert!(a.iter().all(|p| f.evaluate(p).unwrap() == 0.0));
        assert!(b.iter().all(|p| f.evaluate(p).unwrap() == 1.0));
    }

    #[test]
    fn multiclass_hand_values() {
        let classes = vec![line(&[0.0]), line(&[5.0]), line(&[10.0])];
        let f = urysohn_multiclass(&classes).unwrap();
        assert_eq!(f.evaluate(&[0.0]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[5.0]).unwrap(), 2.0);
        assert_eq!(f.evaluate(&[10.0]).unwrap(), 3.0);
        // Between classes 1 and 2: f = 1 + 2.5/(2.5+2.5) + 2.5/(2.5+7.5).
        assert!((f.evaluate(&[2.5]).unwrap() - 1.75).abs() < 1e-15);
    }

    #[test]
    fn multiclass_of_two_is_one_plus_pair() {
        let a = PointCloud::from_rows(&[[0.0, 0.0], [0.5, 0.1]]).unwrap();
        let b = PointCloud::from_rows(&[[2.0, 1.0], [3.0, -1.0]]).unwrap();
        let pair = urysohn_pair(&a, &b).unwrap();
        let multi = urysohn_multiclass(&[a, b]).unwrap();
        for x in [[0.3, 0.2], [-4.0, 7.0], [2.5, 0.0], [1.0, 1.0]] {
            assert_eq!(multi.evaluate(&x).unwrap(), 1.0 + pair.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn multiclass_equidistant_point_is_strictly_inside_range() {
        // Vertices of an equilateral triangle; the centroid is equidistant.
        let s = 3f64.sqrt() / 2.0;
        let classes = vec![
            PointCloud::from_rows(&[[1.0, 0.0]]).unwrap(),
            PointCloud::from_rows(&[[-0.5, s]]).unwrap(),
            PointCloud::from_rows(&[[-0.5, -s]]).unwrap(),
        ];
        let v = urysohn_multiclass(&classes).unwrap().evaluate(&[0.0, 0.0]).unwrap();
        assert!(v > 1.0 && v < 3.0, "{v}");
    }

    #[test]
    fn lift_pads_with_zeros() {
        let f = urysohn_pair(&line(&[0.0]), &line(&[1.0])).unwrap();
        let same = lift_to_rk(f.clone(), 1).unwrap();
        assert_eq!(same.evaluate(&[0.25]).unwrap(), vec![f.evaluate(&[0.25]).unwrap()]);
        let lifted = lift_to_rk(f, 3).unwrap();
        assert_eq!(lifted.evaluate(&[0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(lifted.evaluate(&[1.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(lift_to_rk(lifted.field.clone(), 0).is_err());
    }

    #[test]
    fn lifted_images_are_separable() {
        let data = generate(&ShapeSpec::new(Shape::default_annulus(), 60, 8)).unwrap();
        let classes = data.classes();
        let f = urysohn_multiclass(&classes).unwrap();
        let lifted = lift_to_rk(f, 3).unwrap();
        let images: Vec<PointCloud> = classes.iter().map(|c| lifted.image(c).unwrap()).collect();
        let verdict = disc_separability_check(&images).unwrap();
        assert_eq!(verdict.status, SeparabilityStatus::SeparableByConvexDiscs);
    }

    #[test]
    fn intervals_are_separable() {
        let a = line(&[0.0, 0.05, 0.1]);
        let b = line(&[0.9, 0.95, 1.0]);
        let verdict = disc_separability_check(&[a, b]).unwrap();
        assert_eq!(verdict.status, SeparabilityStatus::SeparableByConvexDiscs);
        let h = &verdict.hyperplanes[0];
        assert!(h.margin > 0.0);
    }

    #[test]
    fn identical_points_collide() {
        let a = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        let b = PointCloud::from_rows(&[[5.0, 5.0], [1.0, 2.0]]).unwrap();
        let verdict = disc_separability_check(&[a, b]).unwrap();
        assert_eq!(verdict.status, SeparabilityStatus::Collision);
        let w = verdict.collision.unwrap();
        assert_eq!((w.index_a, w.index_b), (1, 1));
        assert_eq!(w.point_a, vec![1.0, 2.0]);
    }

    #[test]
    fn xor_is_inconclusive() {
        let a = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let b = PointCloud::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let verdict = disc_separability_check(&[a, b]).unwrap();
        assert_eq!(verdict.status, SeparabilityStatus::Inconclusive);
        assert_eq!(verdict.overlapping_pair, Some((0, 1)));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = PointCloud::from_rows(&[[0.0, 0.0]]).unwrap();
        let b = PointCloud::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            disc_separability_check(&[a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn explicit_kernel_witness() {
        let w = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let wit = kernel_collision_witness(&w, 0.9, (1.0, 2.0)).unwrap();
        assert_eq!(wit.direction, vec![0.0, 0.0, 1.0]);
        assert_eq!(wit.p1, vec![0.0, 0.0, 0.5]);
        assert_eq!(wit.p2, vec![0.0, 0.0, 1.5]);
        assert_eq!(wit.residual, 0.0);
    }

    #[test]
    fn kernel_witness_requires_reduction() {
        assert!(kernel_collision_witness(&Matrix::identity(3), 0.9, (1.0, 2.0)).is_err());
        let w = Matrix::from_rows(&[[1.0, f64::NAN, 0.0]]).unwrap();
        assert!(kernel_collision_witness(&w, 0.9, (1.0, 2.0)).is_err());
    }
}
