//! The two classifier families: the two-branch 1D-CNN and the dense MLP
//! baseline, with hand-written reverse-mode gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{argmax, cross_entropy, relu_backward_in_place, relu_in_place, softmax};
use super::layers::{Conv1dLayer, DenseLayer};
use super::tensor::Tensor2;
use crate::dataset::FeatureTensor;
use crate::error::{Error, Result};

/// One gradient vector per parameter group, same order as `params()`.
pub type Gradients = Vec<Vec<f64>>;

pub trait Classifier {
    type Input;

    fn logits(&self, input: &Self::Input) -> Result<Vec<f64>>;

    /// Mean cross-entropy over the batch and its gradient.
    fn loss_and_gradients(&self, inputs: &[&Self::Input], labels: &[usize]) -> Result<(f64, Gradients)>;

    fn params(&self) -> Vec<&[f64]>;

    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn probabilities(&self, input: &Self::Input) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }

    fn predict(&self, input: &Self::Input) -> Result<usize> {
        Ok(argmax(&self.logits(input)?))
    }

    fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Dense layers with ReLU between them and raw logits out of the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseStack {
    pub layers: Vec<DenseLayer>,
}

impl DenseStack {
    pub fn glorot(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        DenseStack {
            layers: widths.windows(2).map(|w| DenseLayer::glorot(w[0], w[1], rng)).collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    /// Returns every activation, input first and logits last.
    fn forward_all(&self, x: Tensor2) -> Result<Vec<Tensor2>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(acts.last().expect("non-empty"))?;
            if i + 1 < self.layers.len() {
                relu_in_place(y.data_mut());
            }
            acts.push(y);
        }
        Ok(acts)
    }

    fn backward(&self, acts: &[Tensor2], grad_logits: Tensor2, grads: &mut [Vec<f64>], want_input_grad: bool) -> Option<Tensor2> {
        let mut grad = grad_logits;
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                relu_backward_in_place(acts[i + 1].data(), grad.data_mut());
            }
            let (gw, rest) = grads[2 * i..].split_at_mut(1);
            let need_input = want_input_grad || i > 0;
            match self.layers[i].backward(&acts[i], &grad, &mut gw[0], &mut rest[0], need_input) {
                Some(g) => grad = g,
                None => return None,
            }
        }
        Some(grad)
    }

    fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Softmax cross-entropy over a batch of logits: mean loss and `d loss / d logits`.
fn softmax_cross_entropy(logits: &Tensor2, labels: &[usize]) -> Result<(f64, Tensor2)> {
    logits.check_finite("logits")?;
    let batch = logits.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    for (b, &label) in labels.iter().enumerate() {
        if label >= logits.cols() {
            return Err(Error::Shape(format!("label {label} out of range for {} classes", logits.cols())));
        }
        let probs = softmax(logits.row(b));
        loss += cross_entropy(&probs, label);
        let row = grad.row_mut(b);
        for (k, p) in probs.iter().enumerate() {
            row[k] = (p - if k == label { 1.0 } else { 0.0 }) / batch;
        }
    }
    Ok((loss / batch, grad))
}

fn check_batch(inputs: usize, labels: usize) -> Result<()> {
    if inputs == 0 || inputs != labels {
        return Err(Error::Shape(format!("batch of {inputs} inputs with {labels} labels")));
    }
    Ok(())
}

fn check_gradients(grads: &Gradients) -> Result<()> {
    if grads.iter().flatten().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericFault("gradients".into()))
    }
}

/// Shapes of the two-branch CNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    pub wavelength_len: usize,
    pub wavelength_channels: usize,
    pub component_len: usize,
    pub component_channels: usize,
    pub conv_layers: usize,
    pub kernels: usize,
    pub kernel_size: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        CnnArch {
            wavelength_len: 4,
            wavelength_channels: 10,
            component_len: 6,
            component_channels: 10,
            conv_layers: 2,
            kernels: 3,
            kernel_size: 5,
            hidden: 200,
            classes: 4,
        }
    }
}

impl CnnArch {
    pub fn flatten_dim(&self) -> usize {
        (self.wavelength_len + self.component_len) * self.kernels
    }
}

/// Two convolutional branches (wavelength-ordered probes, node-ordered
/// ROADM readings), flattened, concatenated and fed to a ReLU hidden layer
/// and a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub wavelength: Vec<Conv1dLayer>,
    pub component: Vec<Conv1dLayer>,
    pub head: DenseStack,
}

fn conv_branch(in_channels: usize, arch: &CnnArch, rng: &mut ChaCha8Rng) -> Result<Vec<Conv1dLayer>> {
    (0..arch.conv_layers)
        .map(|i| {
            let c = if i == 0 { in_channels } else { arch.kernels };
            Conv1dLayer::glorot(c, arch.kernels, arch.kernel_size, rng)
        })
        .collect()
}

/// Post-ReLU activations of a branch, input first.
fn branch_forward(layers: &[Conv1dLayer], x: &Tensor2) -> Result<Vec<Tensor2>> {
    let mut acts = vec![x.clone()];
    for layer in layers {
        let mut y = layer.forward(acts.last().expect("non-empty"))?;
        relu_in_place(y.data_mut());
        acts.push(y);
    }
    Ok(acts)
}

fn branch_backward(layers: &[Conv1dLayer], acts: &[Tensor2], grad_out: Tensor2, grads: &mut [Vec<f64>]) {
    let mut grad = grad_out;
    for i in (0..layers.len()).rev() {
        relu_backward_in_place(acts[i + 1].data(), grad.data_mut());
        let (gw, rest) = grads[2 * i..].split_at_mut(1);
        grad = layers[i].backward(&acts[i], &grad, &mut gw[0], &mut rest[0]);
    }
}

impl CnnModel {
    pub fn new(arch: CnnArch, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wavelength = conv_branch(arch.wavelength_channels, &arch, &mut rng)?;
        let component = conv_branch(arch.component_channels, &arch, &mut rng)?;
        let head = DenseStack::glorot(&[arch.flatten_dim(), arch.hidden, arch.classes], &mut rng);
        Ok(CnnModel {
            arch,
            wavelength,
            component,
            head,
        })
    }

    fn check_input(&self, x: &FeatureTensor) -> Result<()> {
        let a = &self.arch;
        if x.wavelength.shape() != (a.wavelength_len, a.wavelength_channels)
            || x.component.shape() != (a.component_len, a.component_channels)
        {
            return Err(Error::Shape(format!(
                "cnn expects {}x{} and {}x{} branches, got {:?} and {:?}",
                a.wavelength_len,
                a.wavelength_channels,
                a.component_len,
                a.component_channels,
                x.wavelength.shape(),
                x.component.shape()
            )));
        }
        x.wavelength.check_finite("wavelength input")?;
        x.component.check_finite("component input")
    }

    fn flatten(&self, inputs: &[&FeatureTensor]) -> Result<(Vec<Vec<Tensor2>>, Vec<Vec<Tensor2>>, Tensor2)> {
        let mut wl_acts = Vec::with_capacity(inputs.len());
        let mut cp_acts = Vec::with_capacity(inputs.len());
        let mut flat = Tensor2::zeros(inputs.len(), self.arch.flatten_dim());
        for (b, x) in inputs.iter().enumerate() {
            self.check_input(x)?;
            let wl = branch_forward(&self.wavelength, &x.wavelength)?;
            let cp = branch_forward(&self.component, &x.component)?;
            let row = flat.row_mut(b);
            let wl_out = wl.last().expect("non-empty").data();
            let cp_out = cp.last().expect("non-empty").data();
            row[..wl_out.len()].copy_from_slice(wl_out);
            row[wl_out.len()..].copy_from_slice(cp_out);
            wl_acts.push(wl);
            cp_acts.push(cp);
        }
        Ok((wl_acts, cp_acts, flat))
    }

    fn group_counts(&self) -> (usize, usize) {
        (2 * self.wavelength.len(), 2 * self.component.len())
    }
}

impl Classifier for CnnModel {
    type Input = FeatureTensor;

    fn logits(&self, input: &FeatureTensor) -> Result<Vec<f64>> {
        let (_, _, flat) = self.flatten(&[input])?;
        let acts = self.head.forward_all(flat)?;
        let logits = acts.last().expect("non-empty");
        logits.check_finite("cnn forward")?;
        Ok(logits.row(0).to_vec())
    }

    fn loss_and_gradients(&self, inputs: &[&FeatureTensor], labels: &[usize]) -> Result<(f64, Gradients)> {
        check_batch(inputs.len(), labels.len())?;
        let (wl_acts, cp_acts, flat) = self.flatten(inputs)?;
        let acts = self.head.forward_all(flat)?;
        let (loss, grad_logits) = softmax_cross_entropy(acts.last().expect("non-empty"), labels)?;

        let mut grads: Gradients = self.params().iter().map(|p| vec![0.0; p.len()]).collect();
        let (n_wl, n_cp) = self.group_counts();
        let (conv_grads, head_grads) = grads.split_at_mut(n_wl + n_cp);
        let grad_flat = self
            .head
            .backward(&acts, grad_logits, head_grads, true)
            .expect("input gradient requested");
        let (wl_grads, cp_grads) = conv_grads.split_at_mut(n_wl);

        let wl_size = self.arch.wavelength_len * self.arch.kernels;
        for (b, (wl, cp)) in wl_acts.iter().zip(&cp_acts).enumerate() {
            let row = grad_flat.row(b);
            let g_wl = Tensor2::from_vec(self.arch.wavelength_len, self.arch.kernels, row[..wl_size].to_vec())?;
            let g_cp = Tensor2::from_vec(self.arch.component_len, self.arch.kernels, row[wl_size..].to_vec())?;
            branch_backward(&self.wavelength, wl, g_wl, wl_grads);
            branch_backward(&self.component, cp, g_cp, cp_grads);
        }
        if !loss.is_finite() {
            return Err(Error::NumericFault("cnn loss".into()));
        }
        check_gradients(&grads)?;
        Ok((loss, grads))
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in self.wavelength.iter().chain(&self.component) {
            out.push(&layer.weights);
            out.push(&layer.bias);
        }
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.wavelength.iter_mut().chain(self.component.iter_mut()) {
            out.push(&mut layer.weights);
            out.push(&mut layer.bias);
        }
        out.extend(self.head.params_mut());
        out
    }
}

/// Fully connected baseline over the flattened (encoding-free) features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub stack: DenseStack,
}

impl MlpModel {
    /// Four hidden layers of 100 units and one output unit per class.
    pub fn baseline(input_dim: usize, classes: usize, seed: u64) -> Self {
        Self::new(input_dim, &[100, 100, 100, 100], classes, seed)
    }

    pub fn new(input_dim: usize, hidden: &[usize], classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(classes);
        MlpModel {
            stack: DenseStack::glorot(&widths, &mut rng),
        }
    }

    fn batch_matrix(&self, inputs: &[&Vec<f64>]) -> Result<Tensor2> {
        let dim = self.stack.in_dim();
        let mut x = Tensor2::zeros(inputs.len(), dim);
        for (b, v) in inputs.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Shape(format!("mlp expects {dim} inputs, got {}", v.len())));
            }
            x.row_mut(b).copy_from_slice(v);
        }
        x.check_finite("mlp input")?;
        Ok(x)
    }
}

impl Classifier for MlpModel {
    type Input = Vec<f64>;

    fn logits(&self, input: &Vec<f64>) -> Result<Vec<f64>> {
        let acts = self.stack.forward_all(self.batch_matrix(&[input])?)?;
        let logits = acts.last().expect("non-empty");
        logits.check_finite("mlp forward")?;
        Ok(logits.row(0).to_vec())
    }

    fn loss_and_gradients(&self, inputs: &[&Vec<f64>], labels: &[usize]) -> Result<(f64, Gradients)> {
        check_batch(inputs.len(), labels.len())?;
        let acts = self.stack.forward_all(self.batch_matrix(inputs)?)?;
        let (loss, grad_logits) = softmax_cross_entropy(acts.last().expect("non-empty"), labels)?;
        let mut grads: Gradients = self.params().iter().map(|p| vec![0.0; p.len()]).collect();
        self.stack.backward(&acts, grad_logits, &mut grads, false);
        if !loss.is_finite() {
            return Err(Error::NumericFault("mlp loss".into()));
        }
        check_gradients(&grads)?;
        Ok((loss, grads))
    }

    fn params(&self) -> Vec<&[f64]> {
        self.stack.params()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.stack.params_mut()
    }
}
