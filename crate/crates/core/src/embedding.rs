//! Isomap projections and ε-graph components of point clouds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::cloud::{self, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

pub const DEFAULT_NEIGHBORS: usize = 10;
pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_EPS_FACTOR: f64 = 3.0;

/// All-pairs shortest-path lengths over a neighbourhood graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicDistances {
    pub n: usize,
    /// Row-major n×n; `f64::INFINITY` between disconnected nodes.
    pub data: Vec<f64>,
    pub connected: bool,
}

impl GeodesicDistances {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Symmetrised k-nearest-neighbour adjacency lists with Euclidean edge weights.
pub fn knn_graph(cloud: &PointCloud, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = cloud.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        dists.clear();
        let p = cloud.point(i);
        dists.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (cloud::distance(p, cloud.point(j)), j)),
        );
        let kk = k.min(dists.len());
        if kk < dists.len() {
            dists.select_nth_unstable_by(kk, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        for &(d, j) in &dists[..kk] {
            adj[i].push((j, d));
            adj[j].push((i, d));
        }
    }
    for list in &mut adj {
        list.sort_by_key(|e| e.0);
        list.dedup_by(|a, b| a.0 == b.0);
    }
    adj
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize, dist: &mut [f64], heap: &mut BinaryHeap<State>) {
    dist.iter_mut().for_each(|d| *d = f64::INFINITY);
    dist[source] = 0.0;
    heap.clear();
    heap.push(State {
        dist: 0.0,
        node: source,
    });
    while let Some(State { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(State { dist: nd, node: next });
            }
        }
    }
}

/// Shortest paths from every node, `O(n · (n + E) log n)`.
pub fn geodesic_distances(adj: &[Vec<(usize, f64)>]) -> GeodesicDistances {
    let n = adj.len();
    let mut data = vec![0.0; n * n];
    let mut heap = BinaryHeap::new();
    for (s, row) in data.chunks_exact_mut(n.max(1)).enumerate().take(n) {
        dijkstra(adj, s, row, &mut heap);
    }
    // Floating-point sums along reversed paths can differ in the last bit.
    for i in 0..n {
        for j in i + 1..n {
            let m = data[i * n + j].min(data[j * n + i]);
            data[i * n + j] = m;
            data[j * n + i] = m;
        }
    }
    let connected = data.iter().all(|d| d.is_finite());
    GeodesicDistances { n, data, connected }
}

fn component_sizes(adj: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let mut uf = UnionFind::new(adj.len());
    for (i, list) in adj.iter().enumerate() {
        for &(j, _) in list {
            uf.union(i, j);
        }
    }
    let mut sizes: Vec<usize> = uf.sizes().into_iter().filter(|&s| s > 0).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsResult {
    /// n × target_dim, row-major.
    pub coords: PointCloud,
    /// Top `target_dim` eigenvalues of the double-centred Gram matrix, unclamped.
    pub eigenvalues: Vec<f64>,
}

/// Classical MDS of a full distance matrix (row-major n×n).
///
/// Negative eigenvalues are reported as is and clamped to zero for coordinates.
pub fn classical_mds(dist: &[f64], n: usize, target_dim: usize) -> Result<MdsResult> {
    if dist.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            actual: dist.len(),
            context: "distance matrix",
        });
    }
    if target_dim == 0 || target_dim > n {
        return Err(Error::InvalidArgument(format!(
            "target dimension {target_dim} for {n} points"
        )));
    }
    let mut b = Matrix::zeros(n, n);
    let mut row_means = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let d = dist[i * n + j];
            let d2 = d * d;
            b[(i, j)] = d2;
            s += d2;
        }
        row_means[i] = s / n as f64;
    }
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (b[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    let pairs = linalg::top_symmetric_eigenpairs(&b, target_dim, EIGEN_TOLERANCE)?;
    let mut coords = PointCloud::with_capacity(target_dim, n);
    let scales: Vec<f64> = pairs.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let mut row = vec![0.0; target_dim];
    for i in 0..n {
        for c in 0..target_dim {
            row[c] = pairs.vectors[c][i] * scales[c];
        }
        coords.push(&row)?;
    }
    Ok(MdsResult {
        coords,
        eigenvalues: pairs.values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsomapEmbedding {
    pub coords: PointCloud,
    pub eigenvalues: Vec<f64>,
    /// `1 − ρ²` between geodesic and embedded pairwise distances.
    pub residual_variance: f64,
    pub k: usize,
    #[serde(skip)]
    pub geodesic: Option<GeodesicDistances>,
}

/// Isomap: kNN graph, graph geodesics, then classical MDS.
pub fn isomap(cloud: &PointCloud, k: usize, target_dim: usize) -> Result<IsomapEmbedding> {
    let n = cloud.len();
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!(
            "isomap needs 1 <= k < number of points, got k = {k} for {n} points"
        )));
    }
    if target_dim == 0 {
        return Err(Error::InvalidArgument("isomap target dimension must be positive".into()));
    }
    if !cloud.is_finite() {
        return Err(Error::NonFinite("isomap input"));
    }
    let adj = knn_graph(cloud, k);
    let geo = geodesic_distances(&adj);
    if !geo.connected {
        return Err(Error::DisconnectedGraph {
            k,
            component_sizes: component_sizes(&adj),
        });
    }
    let mds = classical_mds(&geo.data, n, target_dim)?;
    let residual_variance = residual_variance(&geo.data, &mds.coords);
    Ok(IsomapEmbedding {
        coords: mds.coords,
        eigenvalues: mds.eigenvalues,
        residual_variance,
        k,
        geodesic: Some(geo),
    })
}

/// `1 − ρ²` where ρ is the Pearson correlation between the upper triangle of
/// `dist` and the pairwise distances of `coords`.
pub fn residual_variance(dist: &[f64], coords: &PointCloud) -> f64 {
    let n = coords.len();
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let x = dist[i * n + j];
            let y = cloud::distance(coords.point(i), coords.point(j));
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
            m += 1.0;
        }
    }
    if m == 0.0 {
        return 0.0;
    }
    let cov = sxy / m - (sx / m) * (sy / m);
    let vx = sxx / m - (sx / m).powi(2);
    let vy = syy / m - (sy / m).powi(2);
    if vx <= 0.0 || vy <= 0.0 {
        return if vx <= 0.0 && vy <= 0.0 { 0.0 } else { 1.0 };
    }
    let rho = cov / (vx * vy).sqrt();
    (1.0 - rho * rho).max(0.0)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.size[rb] = 0;
    }

    fn sizes(&mut self) -> Vec<usize> {
        (0..self.parent.len())
            .map(|i| if self.parent[i] == i { self.size[i] } else { 0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentAssignment {
    /// Component of each point, numbered from 0 in order of first appearance.
    pub ids: Vec<usize>,
    pub count: usize,
    pub eps: f64,
}

impl ComponentAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count];
        for &id in &self.ids {
            s[id] += 1;
        }
        s
    }
}

/// Connected components of the graph joining points at distance `≤ eps`.
pub fn epsilon_components(cloud: &PointCloud, eps: f64) -> Result<ComponentAssignment> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be positive and finite, got {eps}")));
    }
    let n = cloud.len();
    let mut uf = UnionFind::new(n);
    let eps2 = eps * eps;
    // Sweep along the first coordinate: pairs farther apart there cannot link.
    let mut order: Vec<usize> = (0..n).collect();
    let key = |i: usize| cloud.point(i).first().copied().unwrap_or(0.0);
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    for (a, &i) in order.iter().enumerate() {
        let ki = key(i);
        for &j in &order[a + 1..] {
            if key(j) - ki > eps {
                break;
            }
            if cloud::squared_distance(cloud.point(i), cloud.point(j)) <= eps2 {
                uf.union(i, j);
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut root_id = vec![usize::MAX; n];
    let mut count = 0;
    for i in 0..n {
        let r = uf.find(i);
        if root_id[r] == usize::MAX {
            root_id[r] = count;
            count += 1;
        }
        ids[i] = root_id[r];
    }
    Ok(ComponentAssignment { ids, count, eps })
}

/// Median over points of the distance to the nearest other point.
pub fn median_nearest_neighbor_distance(cloud: &PointCloud) -> Option<f64> {
    let n = cloud.len();
    if n < 2 {
        return None;
    }
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| cloud::squared_distance(cloud.point(i), cloud.point(j)))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    Some(if n % 2 == 1 {
        nn[n / 2]
    } else {
        0.5 * (nn[n / 2 - 1] + nn[n / 2])
    })
}

/// Default ε: three times the median nearest-neighbour distance.
pub fn default_eps(cloud: &PointCloud) -> Option<f64> {
    median_nearest_neighbor_distance(cloud).map(|d| DEFAULT_EPS_FACTOR * d)
}

/// How ε is chosen for [`epsilon_components`] on a class subset of a layer cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsRule {
    Fixed { value: f64 },
    /// `factor ×` median nearest-neighbour distance of the subset.
    MedianNn { factor: f64 },
    /// `factor ×` diameter of the whole layer cloud, all classes included.
    Diameter { factor: f64 },
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::MedianNn {
            factor: DEFAULT_EPS_FACTOR,
        }
    }
}

impl EpsRule {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            EpsRule::Fixed { value } => value,
            EpsRule::MedianNn { factor } | EpsRule::Diameter { factor } => factor,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("eps parameter must be positive, got {v}")))
        }
    }

    /// ε for `subset` inside `layer`. A degenerate scale (all points
    /// coincide) resolves to the smallest positive float so that coincident
    /// points still link.
    pub fn resolve(&self, subset: &PointCloud, layer: &PointCloud) -> f64 {
        let eps = match *self {
            EpsRule::Fixed { value } => value,
            EpsRule::MedianNn { factor } => factor * median_nearest_neighbor_distance(subset).unwrap_or(0.0),
            EpsRule::Diameter { factor } => factor * layer.diameter(),
        };
        if eps > 0.0 {
            eps
        } else {
            f64::MIN_POSITIVE
        }
    }
}
