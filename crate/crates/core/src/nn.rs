//! Dense ReLU networks with a softmax head.
//!
//! A network is the composition `f_L ∘ ⋯ ∘ f_1` with `f_i(x) = σ(W_i x + b_i)`.
//! [`head`] evaluates the first `i` layers, [`forward`] all of them, and
//! [`trace_activations`] records every intermediate point cloud of a dataset.
//! [`train`] fits the parameters with full-batch (or mini-batch) Adam on the
//! softmax cross-entropy, computed through log-sum-exp.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::data::LabeledPointSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::simplex;

/// Initial bias of ReLU units, keeping narrow layers from starting dead.
pub const RELU_BIAS_INIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, pre: &[f64], out: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (o, &z) in out.iter_mut().zip(pre) {
                    *o = z.max(0.0);
                }
            }
            Activation::Identity => out.copy_from_slice(pre),
            Activation::Softmax => simplex::softmax_into(pre, out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// A ReLU network through the given widths with a softmax last layer:
    /// `dims = [d_in, h_1, …, d_out]`.
    pub fn relu_softmax(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidNetwork("need at least an input and an output width".into()));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Softmax
                } else {
                    Activation::Relu
                };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect();
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::InvalidNetwork(format!("layer {i} has a zero dimension")));
            }
            if l.activation == Activation::Softmax && i + 1 != self.layers.len() {
                return Err(Error::InvalidNetwork(format!(
                    "softmax is only allowed as the last layer, found at layer {i}"
                )));
            }
            if let Some(next) = self.layers.get(i + 1) {
                if next.in_dim != l.out_dim {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i} outputs {} values but layer {} expects {}",
                        l.out_dim,
                        i + 1,
                        next.in_dim
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Whether every hidden layer is ReLU and the last is softmax.
    pub fn is_softmax_classifier(&self) -> bool {
        let (last, hidden) = self.layers.split_last().expect("validated: nonempty");
        last.activation == Activation::Softmax && hidden.iter().all(|l| l.activation == Activation::Relu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// out × in.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                expected: weights.rows(),
                actual: bias.len(),
                context: "layer bias",
            });
        }
        if !weights.is_finite() || !bias.iter().all(|b| b.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.in_dim(), self.out_dim(), self.activation)
    }

    /// `W x + b`.
    #[inline]
    pub fn affine_into(&self, x: &[f64], pre: &mut [f64]) {
        self.weights.matvec_into(x, pre);
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
    }

    /// `σ(W x + b)`, returning the pre-activation as well.
    pub fn apply(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pre = vec![0.0; self.out_dim()];
        self.affine_into(x, &mut pre);
        let mut post = vec![0.0; self.out_dim()];
        self.activation.apply(&pre, &mut post);
        (pre, post)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub epochs_run: usize,
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let net = Self {
            layers,
            seed: 0,
            epochs_run: 0,
        };
        net.spec().validate()?;
        Ok(net)
    }

    /// Random initialisation: He-normal weights (variance 2/in) for ReLU
    /// layers, Glorot-normal (variance 2/(in+out)) otherwise. ReLU biases
    /// start at [`RELU_BIAS_INIT`], all others at zero.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = init_layers(spec, &mut rng);
        Ok(Self {
            layers,
            seed,
            epochs_run: 0,
        })
    }

    pub fn spec(&self) -> NetworkSpec {
        NetworkSpec {
            layers: self.layers.iter().map(Layer::spec).collect(),
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }
}

fn init_layers(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    spec.layers
        .iter()
        .map(|l| {
            let var = match l.activation {
                Activation::Relu => 2.0 / l.in_dim as f64,
                _ => 2.0 / (l.in_dim + l.out_dim) as f64,
            };
            let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
            let bias = if l.activation == Activation::Relu {
                RELU_BIAS_INIT
            } else {
                0.0
            };
            let data = (0..l.in_dim * l.out_dim).map(|_| normal.sample(rng)).collect();
            Layer {
                weights: Matrix::from_row_major(l.out_dim, l.in_dim, data).expect("sized buffer"),
                bias: vec![bias; l.out_dim],
                activation: l.activation,
            }
        })
        .collect()
}

fn check_input(net: &Network, x: &[f64]) -> Result<()> {
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: x.len(),
            context: "network input",
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("network input"));
    }
    Ok(())
}

/// `Net^[i](x) = f_i ∘ ⋯ ∘ f_1 (x)`, with `Net^[0]` the identity.
pub fn head(net: &Network, i: usize, x: &[f64]) -> Result<Vec<f64>> {
    if i > net.num_layers() {
        return Err(Error::InvalidArgument(format!(
            "head index {i} exceeds the {} layers of the network",
            net.num_layers()
        )));
    }
    check_input(net, x)?;
    let mut current = x.to_vec();
    for layer in &net.layers[..i] {
        current = layer.apply(&current).1;
    }
    Ok(current)
}

/// `Net(x) = Net^[L](x)`.
pub fn forward(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    head(net, net.num_layers(), x)
}

/// Per-layer images of a dataset: `clouds[i] = Net^[i](X)` for `i = 0..=L`,
/// and `pre_activations[i] = W_{i+1} clouds[i] + b_{i+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub clouds: Vec<PointCloud>,
    pub pre_activations: Vec<PointCloud>,
    pub labels: Vec<usize>,
}

impl ActivationTrace {
    pub fn num_layers(&self) -> usize {
        self.clouds.len().saturating_sub(1)
    }

    pub fn output(&self) -> &PointCloud {
        self.clouds.last().expect("trace has the input cloud")
    }

    /// Indices of the points carrying `class`.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn trace_activations(net: &Network, data: &LabeledPointSet) -> Result<ActivationTrace> {
    trace_cloud(net, &data.points, data.labels.clone())
}

pub fn trace_cloud(net: &Network, points: &PointCloud, labels: Vec<usize>) -> Result<ActivationTrace> {
    if points.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: points.dim(),
            context: "trace input",
        });
    }
    if labels.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: labels.len(),
            context: "trace labels",
        });
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("trace input"));
    }
    let mut clouds = vec![points.clone()];
    let mut pre_activations = Vec::with_capacity(net.num_layers());
    for layer in &net.layers {
        let src = clouds.last().expect("nonempty");
        let mut pre = PointCloud::with_capacity(layer.out_dim(), src.len());
        let mut post = PointCloud::with_capacity(layer.out_dim(), src.len());
        for x in src.iter() {
            let (z, a) = layer.apply(x);
            pre.push(&z)?;
            post.push(&a)?;
        }
        pre_activations.push(pre);
        clouds.push(post);
    }
    Ok(ActivationTrace {
        clouds,
        pre_activations,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 1000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("Adam betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive".into());
        }
        Ok(())
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    fn clear(&mut self) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }
}

struct Scratch {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Scratch {
    fn new(net: &Network) -> Self {
        let widest = net
            .layers
            .iter()
            .map(|l| l.out_dim().max(l.in_dim()))
            .max()
            .unwrap_or(1);
        Self {
            pre: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
            post: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
            delta: vec![0.0; widest],
            delta_prev: vec![0.0; widest],
        }
    }
}

/// Cross-entropy of one sample, accumulating its gradient into `grads`.
fn accumulate_sample(net: &Network, x: &[f64], label: usize, grads: &mut Gradients, s: &mut Scratch) -> f64 {
    let depth = net.layers.len();
    for (l, layer) in net.layers.iter().enumerate() {
        let (before, after) = s.post.split_at_mut(l);
        let input = if l == 0 { x } else { &before[l - 1] };
        layer.affine_into(input, &mut s.pre[l]);
        if l + 1 < depth {
            layer.activation.apply(&s.pre[l], &mut after[0]);
        }
    }
    let logits = &s.pre[depth - 1];
    let lse = simplex::log_sum_exp(logits);
    let loss = lse - logits[label];

    let out_dim = logits.len();
    for (k, &z) in logits.iter().enumerate() {
        s.delta[k] = (z - lse).exp() - if k == label { 1.0 } else { 0.0 };
    }
    for l in (0..depth).rev() {
        let layer = &net.layers[l];
        let (n_out, n_in) = (layer.out_dim(), layer.in_dim());
        let input: &[f64] = if l == 0 { x } else { &s.post[l - 1] };
        let gw = &mut grads.weights[l];
        for r in 0..n_out {
            let d = s.delta[r];
            grads.biases[l][r] += d;
            if d != 0.0 {
                for (g, &a) in gw.row_mut(r).iter_mut().zip(input) {
                    *g += d * a;
                }
            }
        }
        if l == 0 {
            break;
        }
        let prev_act = net.layers[l - 1].activation;
        for c in 0..n_in {
            let mut acc = 0.0;
            for r in 0..n_out {
                acc += layer.weights[(r, c)] * s.delta[r];
            }
            let deriv = match prev_act {
                Activation::Relu => {
                    if s.pre[l - 1][c] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Identity => 1.0,
                Activation::Softmax => unreachable!("softmax only appears last"),
            };
            s.delta_prev[c] = acc * deriv;
        }
        std::mem::swap(&mut s.delta, &mut s.delta_prev);
        let _ = out_dim;
    }
    loss
}

/// Mean softmax cross-entropy over the selected samples and its gradient.
///
/// The network's last layer must be softmax; its activation is folded into
/// the loss through log-sum-exp, so probabilities are never formed.
pub fn loss_and_gradients(
    net: &Network,
    points: &PointCloud,
    labels: &[usize],
    indices: &[usize],
) -> Result<(f64, Gradients)> {
    check_classifier(net)?;
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = Scratch::new(net);
    let loss = batch_loss(net, points, labels, indices, &mut grads, &mut scratch);
    Ok((loss, grads))
}

fn batch_loss(
    net: &Network,
    points: &PointCloud,
    labels: &[usize],
    indices: &[usize],
    grads: &mut Gradients,
    scratch: &mut Scratch,
) -> f64 {
    grads.clear();
    let mut total = 0.0;
    for &i in indices {
        total += accumulate_sample(net, points.point(i), labels[i], grads, scratch);
    }
    let inv = 1.0 / indices.len() as f64;
    grads.scale(inv);
    total * inv
}

/// Mean cross-entropy without gradients.
pub fn mean_loss(net: &Network, data: &LabeledPointSet) -> Result<f64> {
    check_classifier(net)?;
    let mut total = 0.0;
    for (x, &y) in data.points.iter().zip(&data.labels) {
        let mut current = x.to_vec();
        let depth = net.layers.len();
        for layer in &net.layers[..depth - 1] {
            current = layer.apply(&current).1;
        }
        let mut logits = vec![0.0; net.output_dim()];
        net.layers[depth - 1].affine_into(&current, &mut logits);
        total += simplex::log_sum_exp(&logits) - logits[y];
    }
    Ok(total / data.len() as f64)
}

fn check_classifier(net: &Network) -> Result<()> {
    let last = net.layers.last().ok_or_else(|| Error::InvalidNetwork("empty network".into()))?;
    if last.activation != Activation::Softmax {
        return Err(Error::InvalidNetwork(
            "cross-entropy training needs a softmax last layer".into(),
        ));
    }
    Ok(())
}

/// Fraction of points whose output argmax equals the label (ties go to the
/// lowest index).
pub fn accuracy(net: &Network, data: &LabeledPointSet) -> Result<f64> {
    let mut correct = 0usize;
    for (x, &y) in data.points.iter().zip(&data.labels) {
        let out = forward(net, x)?;
        if simplex::argmax(&out) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub network: Network,
    /// Mean training loss of every epoch, measured during the epoch.
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub final_accuracy: f64,
}

struct Adam {
    m: Gradients,
    v: Gradients,
    step: i32,
}

impl Adam {
    fn new(net: &Network) -> Self {
        Self {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
        }
    }

    fn update(&mut self, net: &mut Network, g: &Gradients, hp: &Hyperparams) {
        self.step += 1;
        let c1 = 1.0 - hp.beta1.powi(self.step);
        let c2 = 1.0 - hp.beta2.powi(self.step);
        let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
            *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= hp.learning_rate * mh / (vh.sqrt() + hp.epsilon);
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let params = layer.weights.as_mut_slice();
            let ms = self.m.weights[l].as_mut_slice();
            let vs = self.v.weights[l].as_mut_slice();
            for (((p, m), v), &gw) in params.iter_mut().zip(ms).zip(vs).zip(g.weights[l].as_slice()) {
                upd(p, m, v, gw);
            }
            for (((p, m), v), &gb) in layer
                .bias
                .iter_mut()
                .zip(&mut self.m.biases[l])
                .zip(&mut self.v.biases[l])
                .zip(&g.biases[l])
            {
                upd(p, m, v, gb);
            }
        }
    }
}

/// Trains a freshly initialised network on `data`.
///
/// Deterministic in `(spec, data, hp)`: the same ChaCha8 stream seeded with
/// `hp.seed` drives initialisation and mini-batch shuffling.
pub fn train(spec: &NetworkSpec, data: &LabeledPointSet, hp: &Hyperparams) -> Result<TrainingOutcome> {
    spec.validate()?;
    hp.validate()?;
    if spec.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
        return Err(Error::InvalidNetwork("training needs a softmax last layer".into()));
    }
    if spec.output_dim() != data.num_classes {
        return Err(Error::DimensionMismatch {
            expected: data.num_classes,
            actual: spec.output_dim(),
            context: "network output width vs number of classes",
        });
    }
    if spec.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: spec.input_dim(),
            context: "network input width vs data dimension",
        });
    }
    if !data.points.is_finite() {
        return Err(Error::NonFinite("training data"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut net = Network {
        layers: init_layers(spec, &mut rng),
        seed: hp.seed,
        epochs_run: 0,
    };
    let mut adam = Adam::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut scratch = Scratch::new(&net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch = hp.batch_size.unwrap_or(data.len()).min(data.len());
    let mut loss_history = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let loss = batch_loss(&net, &data.points, &data.labels, chunk, &mut grads, &mut scratch);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.update(&mut net, &grads, hp);
        }
        let epoch_loss = epoch_loss / data.len() as f64;
        loss_history.push(epoch_loss);
        net.epochs_run = epoch + 1;
        if net.layers.iter().any(|l| !l.weights.is_finite() || !l.bias.iter().all(|b| b.is_finite())) {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
    }

    let final_loss = mean_loss(&net, data)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: hp.epochs,
            loss: final_loss,
        });
    }
    let final_accuracy = accuracy(&net, data)?;
    Ok(TrainingOutcome {
        network: net,
        loss_history,
        final_loss,
        final_accuracy,
    })
}
