//! Seeded samplers for labelled manifolds.
//!
//! Each [`Shape`] is a finite union of compact pieces in ℝ^d together with a
//! region predicate per class. Samples are drawn uniformly in parameter space
//! (radii and angles), not uniformly with respect to surface area, and every
//! returned point satisfies its class predicate exactly: candidates that fail
//! the predicate after floating-point rounding are rejected and redrawn.
//!
//! The random stream is ChaCha8 seeded from [`ShapeSpec::seed`], so a spec
//! produces bit-identical samples on every platform.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::{self, PointCloud};
use crate::error::{Error, Result};

/// Default number of samples per class.
pub const DEFAULT_POINTS_PER_CLASS: usize = 2000;

/// Tolerance for the on-surface equation of torus samples.
pub const SURFACE_TOLERANCE: f64 = 1e-9;

/// Sampled points with class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPointSet {
    pub points: PointCloud,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub shape_tag: String,
}

impl LabeledPointSet {
    /// Builds a set and checks the structural invariants (matching lengths,
    /// labels in range, every class present). Class disjointness is checked
    /// separately by [`LabeledPointSet::min_interclass_distance`] because it
    /// is quadratic in the number of points.
    pub fn new(
        points: PointCloud,
        labels: Vec<usize>,
        num_classes: usize,
        shape_tag: impl Into<String>,
    ) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: labels.len(),
                context: "labels per point",
            });
        }
        if points.dim() == 0 {
            return Err(Error::InvalidArgument("points must have dimension >= 1".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let mut seen = vec![false; num_classes];
        for (i, &l) in labels.iter().enumerate() {
            if l >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {l} of point {i} is out of range for {num_classes} classes"
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("class {missing} has no points")));
        }
        Ok(Self {
            points,
            labels,
            num_classes,
            shape_tag: shape_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// The points of one class, in dataset order.
    pub fn class_points(&self, class: usize) -> PointCloud {
        self.points.select(&self.class_indices(class))
    }

    pub fn classes(&self) -> Vec<PointCloud> {
        (0..self.num_classes).map(|c| self.class_points(c)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Smallest distance between two points carrying different labels,
    /// with the index pair realising it.
    pub fn min_interclass_distance(&self) -> (f64, Option<(usize, usize)>) {
        let mut best = f64::INFINITY;
        let mut pair = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.labels[i] == self.labels[j] {
                    continue;
                }
                let d = cloud::squared_distance(self.points.point(i), self.points.point(j));
                if d < best {
                    best = d;
                    pair = Some((i, j));
                }
            }
        }
        (best.sqrt(), pair)
    }

    /// Appends a labelled point, returning its index.
    pub fn push(&mut self, point: &[f64], label: usize) -> Result<usize> {
        if label >= self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        self.points.push(point)?;
        self.labels.push(label);
        Ok(self.labels.len() - 1)
    }
}

/// How the annulus is split into classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnnulusLabeling {
    /// Concentric bands of equal width from the inner to the outer radius,
    /// class 0 innermost, separated by radial gaps of width `gap`.
    Radial { classes: usize, gap: f64 },
    /// Equal angular sectors, class `c` starting at angle `c·2π/classes`,
    /// each trimmed by `gap / 2` radians at both ends.
    Sectors { classes: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Planar annulus `inner_radius ≤ ‖x‖ ≤ outer_radius`.
    #[serde(rename = "annulus2d")]
    Annulus2D {
        inner_radius: f64,
        outer_radius: f64,
        labeling: AnnulusLabeling,
    },
    /// Ring torus `(√(x²+y²) − R)² + z² = r²` whose major angle is cut into
    /// `bands.len()` equal arcs; arc `i` carries class `bands[i]` and is
    /// trimmed by `gap` radians at both ends. The default bands
    /// `[0, 1, 0, 2]` put one class on two rings around a ring of a second
    /// class, with a third class on the remaining quarter.
    #[serde(rename = "torus3d")]
    Torus3D {
        major_radius: f64,
        minor_radius: f64,
        bands: Vec<usize>,
        gap: f64,
    },
    /// Solid ball `‖x‖ ≤ inner_radius` (class 0) inside the spherical shell
    /// `shell_inner ≤ ‖x‖ ≤ shell_outer` (class 1), in ℝ^dim.
    BallShell {
        dim: usize,
        inner_radius: f64,
        shell_inner: f64,
        shell_outer: f64,
    },
    /// Two torus surfaces forming a Hopf link. Class 0 has its core circle
    /// in the xy-plane centred at the origin; class 1 has its core circle in
    /// the xz-plane centred at `(R, 0, 0)`. Every point of either core circle
    /// lies at distance exactly R from the other, so the surfaces are
    /// disjoint whenever `minor_radius < R / 2`.
    LinkedTori { major_radius: f64, minor_radius: f64 },
}

impl Shape {
    pub fn default_annulus() -> Self {
        Shape::Annulus2D {
            inner_radius: 1.0,
            outer_radius: 2.0,
            labeling: AnnulusLabeling::Radial {
                classes: 2,
                gap: 0.2,
            },
        }
    }

    pub fn default_torus() -> Self {
        Shape::Torus3D {
            major_radius: 2.0,
            minor_radius: 0.7,
            bands: vec![0, 1, 0, 2],
            gap: 0.05,
        }
    }

    pub fn default_ball_shell() -> Self {
        Shape::BallShell {
            dim: 3,
            inner_radius: 0.9,
            shell_inner: 1.0,
            shell_outer: 2.0,
        }
    }

    pub fn default_linked_tori() -> Self {
        Shape::LinkedTori {
            major_radius: 1.0,
            minor_radius: 0.25,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Shape::Annulus2D { .. } => 2,
            Shape::Torus3D { .. } | Shape::LinkedTori { .. } => 3,
            Shape::BallShell { dim, .. } => *dim,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Shape::Annulus2D { labeling, .. } => match labeling {
                AnnulusLabeling::Radial { classes, .. } | AnnulusLabeling::Sectors { classes, .. } => {
                    *classes
                }
            },
            Shape::Torus3D { bands, .. } => bands.iter().max().map_or(0, |m| m + 1),
            Shape::BallShell { .. } | Shape::LinkedTori { .. } => 2,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Shape::Annulus2D { .. } => "annulus2d",
            Shape::Torus3D { .. } => "torus3d",
            Shape::BallShell { .. } => "ball_shell",
            Shape::LinkedTori { .. } => "linked_tori",
        }
    }

    /// Checks parameter sanity and that the class regions are disjoint.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidShape(msg));
        match self {
            Shape::Annulus2D {
                inner_radius,
                outer_radius,
                labeling,
            } => {
                if !(*inner_radius > 0.0 && outer_radius > inner_radius && outer_radius.is_finite()) {
                    return bad(format!(
                        "annulus radii must satisfy 0 < inner < outer, got {inner_radius} and {outer_radius}"
                    ));
                }
                match labeling {
                    AnnulusLabeling::Radial { classes, gap } => {
                        if *classes < 2 {
                            return bad("annulus needs at least 2 classes".into());
                        }
                        let width = outer_radius - inner_radius;
                        if !(*gap > 0.0) {
                            return bad(format!(
                                "radial gap must be positive to keep bands disjoint, got {gap}"
                            ));
                        }
                        if *gap * (*classes as f64 - 1.0) >= width {
                            return bad(format!(
                                "radial gaps ({gap} x {}) leave no room for bands in a width-{width} annulus",
                                classes - 1
                            ));
                        }
                    }
                    AnnulusLabeling::Sectors { classes, gap } => {
                        if *classes < 2 {
                            return bad("annulus needs at least 2 classes".into());
                        }
                        let width = TAU / *classes as f64;
                        if !(*gap > 0.0 && *gap < width) {
                            return bad(format!(
                                "sector gap must lie in (0, {width}) for {classes} sectors, got {gap}"
                            ));
                        }
                    }
                }
            }
            Shape::Torus3D {
                major_radius,
                minor_radius,
                bands,
                gap,
            } => {
                if !(*minor_radius > 0.0 && major_radius > minor_radius && major_radius.is_finite()) {
                    return bad(format!(
                        "ring torus needs 0 < minor < major, got minor {minor_radius}, major {major_radius}"
                    ));
                }
                if bands.len() < 2 {
                    return bad("torus labeling needs at least two arcs".into());
                }
                let n = self.num_classes();
                if n < 2 {
                    return bad("torus labeling needs at least two classes".into());
                }
                for c in 0..n {
                    if !bands.contains(&c) {
                        return bad(format!("torus class {c} is not assigned to any arc"));
                    }
                }
                let width = TAU / bands.len() as f64;
                if !(*gap > 0.0 && 2.0 * gap < width) {
                    return bad(format!(
                        "torus gap must lie in (0, {}) for {} arcs, got {gap}",
                        width / 2.0,
                        bands.len()
                    ));
                }
            }
            Shape::BallShell {
                dim,
                inner_radius,
                shell_inner,
                shell_outer,
            } => {
                if *dim < 1 {
                    return bad("ball/shell dimension must be >= 1".into());
                }
                if !(*inner_radius > 0.0 && inner_radius < shell_inner && shell_inner < shell_outer) {
                    return bad(format!(
                        "ball/shell radii must satisfy 0 < inner < shell_inner < shell_outer, got \
                         {inner_radius}, {shell_inner}, {shell_outer}"
                    ));
                }
                if !shell_outer.is_finite() {
                    return bad("shell radius must be finite".into());
                }
            }
            Shape::LinkedTori {
                major_radius,
                minor_radius,
            } => {
                if !(*minor_radius > 0.0 && major_radius.is_finite()) {
                    return bad("linked tori radii must be positive and finite".into());
                }
                if !(2.0 * minor_radius < *major_radius) {
                    return bad(format!(
                        "linked tori overlap: minor radius {minor_radius} must be below half the \
                         major radius {major_radius}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// The exact region predicate of `class`.
    pub fn contains(&self, class: usize, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim() || class >= self.num_classes() {
            return false;
        }
        match self {
            Shape::Annulus2D {
                inner_radius,
                outer_radius,
                labeling,
            } => {
                let r = cloud::norm(x);
                match labeling {
                    AnnulusLabeling::Radial { classes, gap } => {
                        let (lo, hi) = radial_band(*inner_radius, *outer_radius, *classes, *gap, class);
                        r >= lo && r <= hi
                    }
                    AnnulusLabeling::Sectors { classes, gap } => {
                        if !(r >= *inner_radius && r <= *outer_radius) {
                            return false;
                        }
                        let (lo, hi) = arc(*classes, class, gap / 2.0);
                        angle_in(x[1].atan2(x[0]), lo, hi)
                    }
                }
            }
            Shape::Torus3D {
                major_radius,
                minor_radius,
                bands,
                gap,
            } => {
                if torus_residual(x, *major_radius, *minor_radius) > SURFACE_TOLERANCE {
                    return false;
                }
                let phi = x[1].atan2(x[0]);
                bands.iter().enumerate().any(|(i, &c)| {
                    c == class && {
                        let (lo, hi) = arc(bands.len(), i, *gap);
                        angle_in(phi, lo, hi)
                    }
                })
            }
            Shape::BallShell {
                inner_radius,
                shell_inner,
                shell_outer,
                ..
            } => {
                let r = cloud::norm(x);
                if class == 0 {
                    r <= *inner_radius
                } else {
                    r >= *shell_inner && r <= *shell_outer
                }
            }
            Shape::LinkedTori {
                major_radius,
                minor_radius,
            } => {
                let local = linked_local(class, x, *major_radius);
                torus_residual(&local, *major_radius, *minor_radius) <= SURFACE_TOLERANCE
            }
        }
    }

    fn sample_candidate(&self, class: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Shape::Annulus2D {
                inner_radius,
                outer_radius,
                labeling,
            } => match labeling {
                AnnulusLabeling::Radial { classes, gap } => {
                    let (lo, hi) = radial_band(*inner_radius, *outer_radius, *classes, *gap, class);
                    let r = rng.random_range(lo..=hi);
                    let t = rng.random_range(0.0..TAU);
                    vec![r * t.cos(), r * t.sin()]
                }
                AnnulusLabeling::Sectors { classes, gap } => {
                    let (lo, hi) = arc(*classes, class, gap / 2.0);
                    let r = rng.random_range(*inner_radius..=*outer_radius);
                    let t = rng.random_range(lo..=hi);
                    vec![r * t.cos(), r * t.sin()]
                }
            },
            Shape::Torus3D {
                major_radius,
                minor_radius,
                bands,
                gap,
            } => {
                let arcs: Vec<usize> = (0..bands.len()).filter(|&i| bands[i] == class).collect();
                let which = arcs[rng.random_range(0..arcs.len())];
                let (lo, hi) = arc(bands.len(), which, *gap);
                let phi = rng.random_range(lo..=hi);
                let theta = rng.random_range(0.0..TAU);
                torus_point(*major_radius, *minor_radius, phi, theta)
            }
            Shape::BallShell {
                dim,
                inner_radius,
                shell_inner,
                shell_outer,
            } => {
                let direction = unit_vector(*dim, rng);
                let r = if class == 0 {
                    rng.random_range(0.0..=*inner_radius)
                } else {
                    rng.random_range(*shell_inner..=*shell_outer)
                };
                direction.into_iter().map(|d| d * r).collect()
            }
            Shape::LinkedTori {
                major_radius,
                minor_radius,
            } => {
                let phi = rng.random_range(0.0..TAU);
                let theta = rng.random_range(0.0..TAU);
                let p = torus_point(*major_radius, *minor_radius, phi, theta);
                if class == 0 {
                    p
                } else {
                    // Rotate the axis from z to y and shift by (R, 0, 0).
                    vec![p[0] + major_radius, p[2], p[1]]
                }
            }
        }
    }
}

/// Full sampling request: a shape, a per-class count and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub shape: Shape,
    #[serde(default = "default_points_per_class")]
    pub points_per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_points_per_class() -> usize {
    DEFAULT_POINTS_PER_CLASS
}

impl ShapeSpec {
    pub fn new(shape: Shape, points_per_class: usize, seed: u64) -> Self {
        Self {
            shape,
            points_per_class,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_class == 0 {
            return Err(Error::InvalidShape("points_per_class must be positive".into()));
        }
        self.shape.validate()
    }
}

const MAX_REJECTIONS: usize = 1_000_000;

/// Samples `points_per_class` points from every class region, class by
/// class, in label order.
pub fn generate(spec: &ShapeSpec) -> Result<LabeledPointSet> {
    spec.validate()?;
    let shape = &spec.shape;
    let n = shape.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points = PointCloud::with_capacity(shape.ambient_dim(), n * spec.points_per_class);
    let mut labels = Vec::with_capacity(n * spec.points_per_class);
    for class in 0..n {
        for _ in 0..spec.points_per_class {
            let mut attempts = 0;
            let p = loop {
                let candidate = shape.sample_candidate(class, &mut rng);
                if shape.contains(class, &candidate) {
                    break candidate;
                }
                attempts += 1;
                if attempts > MAX_REJECTIONS {
                    return Err(Error::InvalidShape(format!(
                        "class {class} region rejected {MAX_REJECTIONS} consecutive samples"
                    )));
                }
            };
            points.push(&p)?;
            labels.push(class);
        }
    }
    LabeledPointSet::new(points, labels, n, shape.tag())
}

fn radial_band(inner: f64, outer: f64, classes: usize, gap: f64, class: usize) -> (f64, f64) {
    let band = (outer - inner - gap * (classes as f64 - 1.0)) / classes as f64;
    let lo = inner + class as f64 * (band + gap);
    let hi = if class + 1 == classes { outer } else { lo + band };
    (lo, hi)
}

/// Arc `index` of `count` equal arcs of the circle, trimmed by `trim` at both ends.
fn arc(count: usize, index: usize, trim: f64) -> (f64, f64) {
    let width = TAU / count as f64;
    let lo = index as f64 * width + trim;
    (lo, lo + width - 2.0 * trim)
}

/// Whether angle `a ∈ (−π, π]` lies in `[lo, hi] ⊂ [0, 2π]` modulo 2π.
fn angle_in(a: f64, lo: f64, hi: f64) -> bool {
    let a = if a < 0.0 { a + TAU } else { a };
    (a >= lo && a <= hi) || (a + TAU >= lo && a + TAU <= hi)
}

fn torus_point(major: f64, minor: f64, phi: f64, theta: f64) -> Vec<f64> {
    let ring = major + minor * theta.cos();
    vec![ring * phi.cos(), ring * phi.sin(), minor * theta.sin()]
}

/// `|√((√(x²+y²) − R)² + z²) − r|`: distance from the torus surface.
pub fn torus_residual(x: &[f64], major: f64, minor: f64) -> f64 {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    (((rho - major).powi(2) + x[2] * x[2]).sqrt() - minor).abs()
}

/// Coordinates of `x` in the frame of linked torus `class` (axis along z,
/// centred at the origin).
fn linked_local(class: usize, x: &[f64], major: f64) -> [f64; 3] {
    if class == 0 {
        [x[0], x[1], x[2]]
    } else {
        [x[0] - major, x[2], x[1]]
    }
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = cloud::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
