//! Dense multilayer perceptron with ReLU hidden layers and an exact backward pass.
//!
//! Weights of layer `l` are stored as a `(out, in)` row-major matrix, so the
//! pre-activation of a batch is `Z = A W^T + b`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Output nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Mutually exclusive classes.
    Softmax,
    /// Independent binary outputs (multi-label findings).
    SigmoidPerOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    head: Head,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    layer_dims: Vec<usize>,
    /// `pre[l]` is the affine output of layer `l`.
    pre: Vec<Matrix>,
    /// `acts[0]` is the input; `acts[l + 1]` is the activation of layer `l`.
    /// The last entry holds the head probabilities.
    acts: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> &Matrix {
        self.acts.last().expect("trace has at least one layer")
    }

    pub fn into_probabilities(mut self) -> Matrix {
        self.acts.pop().expect("trace has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.acts[0].rows()
    }

    /// Output logits (pre-activation of the final layer).
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("trace has at least one layer")
    }

    /// ReLU outputs of every hidden layer, first to last.
    pub fn hidden_activations(&self) -> &[Matrix] {
        &self.acts[1..self.acts.len() - 1]
    }

    /// Activation feeding the output layer.
    pub fn penultimate(&self) -> &Matrix {
        &self.acts[self.acts.len() - 2]
    }
}

/// Per-layer gradients, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| w.scale(factor));
        self.biases
            .iter_mut()
            .for_each(|b| b.iter_mut().for_each(|v| *v *= factor));
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// All entries in the same order as [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub(crate) fn is_congruent(&self, model: &MlpModel) -> bool {
        self.weights.len() == model.weights.len()
            && self
                .weights
                .iter()
                .zip(&model.weights)
                .all(|(g, w)| g.rows() == w.rows() && g.cols() == w.cols())
            && self
                .biases
                .iter()
                .zip(&model.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    fn validate_dims(layer_dims: &[usize], head: Head) -> Result<()> {
        if layer_dims.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "an MLP needs input, at least one hidden layer and output, got dims {layer_dims:?}"
            )));
        }
        if layer_dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer dims must be > 0, got {layer_dims:?}"
            )));
        }
        if head == Head::Softmax && *layer_dims.last().unwrap() < 2 {
            return Err(Error::InvalidConfig(
                "softmax head needs at least 2 outputs".into(),
            ));
        }
        Ok(())
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(layer_dims: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        Self::validate_dims(layer_dims, head)?;
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            head,
        })
    }

    pub fn zeros(layer_dims: &[usize], head: Head) -> Result<Self> {
        Self::validate_dims(layer_dims, head)?;
        let weights = layer_dims
            .windows(2)
            .map(|p| Matrix::zeros(p[1], p[0]))
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            head,
        })
    }

    /// Builds a model from explicit `(out, in)` weight matrices and biases.
    pub fn from_parameters(weights: Vec<Matrix>, biases: Vec<Vec<f64>>, head: Head) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::shape(
                "MlpModel::from_parameters",
                "one bias vector per weight matrix",
                format!("{} weights, {} biases", weights.len(), biases.len()),
            ));
        }
        let mut dims = vec![weights[0].cols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.cols() != *dims.last().unwrap() {
                return Err(Error::shape(
                    format!("layer {l} input"),
                    dims.last().unwrap(),
                    w.cols(),
                ));
            }
            if b.len() != w.rows() {
                return Err(Error::shape(format!("layer {l} bias"), w.rows(), b.len()));
            }
            dims.push(w.rows());
        }
        Self::validate_dims(&dims, head)?;
        Ok(Self {
            layer_dims: dims,
            weights,
            biases,
            head,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    /// Visits every parameter mutably in [`MlpModel::parameters`] order.
    pub fn for_each_parameter_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut i = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.data_mut().iter_mut().chain(b.iter_mut()) {
                f(i, v);
                i += 1;
            }
        }
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::shape(
                "forward input columns",
                self.input_dim(),
                inputs.cols(),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<ForwardTrace> {
        self.check_input(inputs)?;
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(inputs.clone());
        for l in 0..n_layers {
            let mut z = acts[l].matmul_transposed(&self.weights[l]);
            for r in 0..z.rows() {
                z.row_mut(r)
                    .iter_mut()
                    .zip(&self.biases[l])
                    .for_each(|(v, b)| *v += b);
            }
            let mut a = z.clone();
            if l + 1 < n_layers {
                a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                match self.head {
                    Head::Softmax => {
                        for r in 0..a.rows() {
                            softmax_in_place(a.row_mut(r));
                        }
                    }
                    Head::SigmoidPerOutput => {
                        a.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
                    }
                }
            }
            pre.push(z);
            acts.push(a);
        }
        Ok(ForwardTrace {
            layer_dims: self.layer_dims.clone(),
            pre,
            acts,
        })
    }

    /// Head probabilities only.
    pub fn probabilities(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.forward(inputs)?.into_probabilities())
    }

    /// Exact gradient of a scalar loss given `d loss / d probabilities`.
    pub fn backward(&self, trace: &ForwardTrace, grad_probs: &Matrix) -> Result<GradientSet> {
        if trace.layer_dims != self.layer_dims {
            return Err(Error::shape(
                "backward trace",
                format!("{:?}", self.layer_dims),
                format!("{:?}", trace.layer_dims),
            ));
        }
        let probs = trace.probabilities();
        if grad_probs.rows() != probs.rows() || grad_probs.cols() != probs.cols() {
            return Err(Error::shape(
                "backward upstream gradient",
                format!("{}x{}", probs.rows(), probs.cols()),
                format!("{}x{}", grad_probs.rows(), grad_probs.cols()),
            ));
        }

        // d loss / d logits through the head.
        let mut delta = Matrix::zeros(probs.rows(), probs.cols());
        match self.head {
            Head::Softmax => {
                for r in 0..probs.rows() {
                    let p = probs.row(r);
                    let g = grad_probs.row(r);
                    let inner = dot(p, g);
                    for (d, (pj, gj)) in delta.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
                        *d = pj * (gj - inner);
                    }
                }
            }
            Head::SigmoidPerOutput => {
                for ((d, p), g) in delta
                    .data_mut()
                    .iter_mut()
                    .zip(probs.data())
                    .zip(grad_probs.data())
                {
                    *d = g * p * (1.0 - p);
                }
            }
        }

        let mut grads = GradientSet::zeros_like(self);
        for l in (0..self.weights.len()).rev() {
            let input = &trace.acts[l];
            let gw = &mut grads.weights[l];
            for r in 0..delta.rows() {
                let d = delta.row(r);
                let a = input.row(r);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    grads.biases[l][o] += dv;
                    for (gv, av) in gw.row_mut(o).iter_mut().zip(a) {
                        *gv += dv * av;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let below = &trace.pre[l - 1];
            let mut next = Matrix::zeros(delta.rows(), w.cols());
            for r in 0..delta.rows() {
                let d = delta.row(r);
                let dst = next.row_mut(r);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    for (x, wv) in dst.iter_mut().zip(w.row(o)) {
                        *x += dv * wv;
                    }
                }
                for (x, z) in dst.iter_mut().zip(below.row(r)) {
                    if *z <= 0.0 {
                        *x = 0.0;
                    }
                }
            }
            delta = next;
        }
        Ok(grads)
    }

    /// Argmax class per row (softmax head).
    pub fn predict_classes(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        if self.head != Head::Softmax {
            return Err(Error::InvalidConfig(
                "class prediction needs a softmax head; use predict_binary".into(),
            ));
        }
        let probs = self.probabilities(inputs)?;
        Ok(probs.iter_rows().map(argmax).collect())
    }

    /// Per-output `p >= threshold` decisions (sigmoid head).
    pub fn predict_binary(&self, inputs: &Matrix, thresholds: &[f64]) -> Result<Vec<Vec<u8>>> {
        self.check_thresholds(thresholds)?;
        let probs = self.probabilities(inputs)?;
        Ok(probs
            .iter_rows()
            .map(|row| {
                row.iter()
                    .zip(thresholds)
                    .map(|(p, t)| u8::from(*p >= *t))
                    .collect()
            })
            .collect())
    }

    fn check_thresholds(&self, thresholds: &[f64]) -> Result<()> {
        if self.head != Head::SigmoidPerOutput {
            return Err(Error::InvalidConfig(
                "thresholded prediction needs a sigmoid head".into(),
            ));
        }
        if thresholds.len() != self.output_dim() {
            return Err(Error::InvalidConfig(format!(
                "sigmoid head needs one threshold per output: expected {}, got {}",
                self.output_dim(),
                thresholds.len()
            )));
        }
        Ok(())
    }

    /// Max softmax probability per sample.
    pub fn confidence(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        if self.head != Head::Softmax {
            return Err(Error::InvalidConfig(
                "max-probability confidence needs a softmax head; use threshold_margin".into(),
            ));
        }
        let probs = self.probabilities(inputs)?;
        Ok(probs
            .iter_rows()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect())
    }

    /// `|p - threshold|` per sample and output (sigmoid head).
    pub fn threshold_margin(&self, inputs: &Matrix, thresholds: &[f64]) -> Result<Matrix> {
        self.check_thresholds(thresholds)?;
        let mut probs = self.probabilities(inputs)?;
        let cols = probs.cols();
        for (i, v) in probs.data_mut().iter_mut().enumerate() {
            *v = (*v - thresholds[i % cols]).abs();
        }
        Ok(probs)
    }

    /// Last-hidden-layer activations.
    pub fn penultimate_features(&self, inputs: &Matrix) -> Result<Matrix> {
        let trace = self.forward(inputs)?;
        Ok(trace.penultimate().clone())
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// Versioned on-disk representation of a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub head: Head,
    /// Row-major `(out, in)` weights per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

pub const MODEL_FORMAT: &str = "rldlab-mlp";
pub const MODEL_VERSION: u32 = 1;

impl MlpModel {
    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            layer_dims: self.layer_dims.clone(),
            head: self.head,
            weights: self.weights.iter().map(|w| w.data().to_vec()).collect(),
            biases: self.biases.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model document {} v{} (expected {MODEL_FORMAT} v{MODEL_VERSION})",
                doc.format, doc.version
            )));
        }
        if doc.weights.len() + 1 != doc.layer_dims.len() {
            return Err(Error::shape(
                "model document layers",
                doc.layer_dims.len().saturating_sub(1),
                doc.weights.len(),
            ));
        }
        let weights = doc
            .weights
            .into_iter()
            .zip(doc.layer_dims.windows(2))
            .map(|(w, d)| Matrix::from_vec(d[1], d[0], w))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parameters(weights, doc.biases, doc.head)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}
