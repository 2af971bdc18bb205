//! A small differentiable network core: dense and valid-padding convolution
//! layers with ReLU, trained by softmax cross-entropy.
//!
//! The last layer's output is the pre-softmax activation vector `A^l`. Two
//! backward entry points are exposed: parameter gradients of the loss (for
//! SGD) and input gradients of a single raw logit `A_p^l` (for VoG).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VogError};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Valid padding, stride 1, square kernel.
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Relu,
    Flatten,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layers: Vec<Layer>,
    /// channels x height x width
    pub input_shape: [usize; 3],
    pub num_classes: usize,
}

impl ModelSpec {
    /// Fully connected ReLU network over a flattened input.
    pub fn mlp(input_shape: [usize; 3], hidden: &[usize], num_classes: usize) -> Self {
        let mut layers = vec![Layer::Flatten];
        let mut width = input_shape.iter().product::<usize>();
        for &h in hidden {
            layers.push(Layer::Dense {
                inputs: width,
                outputs: h,
            });
            layers.push(Layer::Relu);
            width = h;
        }
        layers.push(Layer::Dense {
            inputs: width,
            outputs: num_classes,
        });
        Self {
            layers,
            input_shape,
            num_classes,
        }
    }

    /// `conv(k) -> relu -> flatten -> dense(hidden) -> relu -> dense(C)`.
    pub fn small_convnet(
        input_shape: [usize; 3],
        channels: usize,
        kernel: usize,
        hidden: usize,
        num_classes: usize,
    ) -> Self {
        let [c, h, w] = input_shape;
        let flat = channels * (h + 1 - kernel) * (w + 1 - kernel);
        Self {
            layers: vec![
                Layer::Conv {
                    in_channels: c,
                    out_channels: channels,
                    kernel,
                },
                Layer::Relu,
                Layer::Flatten,
                Layer::Dense {
                    inputs: flat,
                    outputs: hidden,
                },
                Layer::Relu,
                Layer::Dense {
                    inputs: hidden,
                    outputs: num_classes,
                },
            ],
            input_shape,
            num_classes,
        }
    }

    /// Output shape of every layer, after checking that consecutive layers compose.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.iter().any(|&d| d == 0) {
            return Err(VogError::validation("input_shape extents must be positive"));
        }
        if self.num_classes < 2 {
            return Err(VogError::validation("num_classes must be at least 2"));
        }
        let mut shape = self.input_shape.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let numel: usize = shape.iter().product();
            shape = match *layer {
                Layer::Dense { inputs, outputs } => {
                    if inputs != numel || outputs == 0 {
                        return Err(VogError::validation(format!(
                            "layer {i}: dense expects {inputs} inputs, incoming shape is {shape:?}"
                        )));
                    }
                    vec![outputs]
                }
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    if shape.len() != 3 || shape[0] != in_channels {
                        return Err(VogError::validation(format!(
                            "layer {i}: conv expects {in_channels} channels x H x W, incoming shape is {shape:?}"
                        )));
                    }
                    if kernel == 0 || out_channels == 0 || kernel > shape[1] || kernel > shape[2] {
                        return Err(VogError::validation(format!(
                            "layer {i}: kernel {kernel} does not fit incoming shape {shape:?}"
                        )));
                    }
                    vec![out_channels, shape[1] + 1 - kernel, shape[2] + 1 - kernel]
                }
                Layer::Relu => shape,
                Layer::Flatten => vec![numel],
            };
            out.push(shape.clone());
        }
        if shape != [self.num_classes] {
            return Err(VogError::validation(format!(
                "final layer must output {} class scores, got shape {shape:?}",
                self.num_classes
            )));
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                Layer::Dense { inputs, outputs } => inputs * outputs + outputs,
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                } => out_channels * in_channels * kernel * kernel + out_channels,
                _ => 0,
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Weights and biases, one slot per layer (`None` for stateless layers).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub layers: Vec<Option<LayerParams>>,
    pub seed: u64,
}

fn param_shapes(layer: &Layer) -> Option<(Vec<usize>, Vec<usize>)> {
    match *layer {
        Layer::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
        Layer::Conv {
            in_channels,
            out_channels,
            kernel,
        } => Some((
            vec![out_channels, in_channels, kernel, kernel],
            vec![out_channels],
        )),
        _ => None,
    }
}

impl Params {
    /// He-style uniform initialization, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.layer_shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layers
            .iter()
            .map(|layer| {
                param_shapes(layer).map(|(w_shape, b_shape)| {
                    let fan_in: usize = w_shape[1..].iter().product();
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let mut weight = Tensor::zeros(&w_shape);
                    for w in weight.data_mut() {
                        *w = rng.random_range(-bound..bound);
                    }
                    LayerParams {
                        weight,
                        bias: Tensor::zeros(&b_shape),
                    }
                })
            })
            .collect();
        Ok(Self { layers, seed })
    }

    pub fn zeros_like(spec: &ModelSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .map(|layer| {
                param_shapes(layer).map(|(w, b)| LayerParams {
                    weight: Tensor::zeros(&w),
                    bias: Tensor::zeros(&b),
                })
            })
            .collect();
        Self { layers, seed: 0 }
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(VogError::Shape {
                context: "params layer count",
                expected: vec![spec.layers.len()],
                got: vec![self.layers.len()],
            });
        }
        for (slot, layer) in self.layers.iter().zip(&spec.layers) {
            match (slot, param_shapes(layer)) {
                (None, None) => {}
                (Some(p), Some((w, b))) => {
                    if p.weight.shape() != w.as_slice() {
                        return Err(VogError::Shape {
                            context: "weight",
                            expected: w,
                            got: p.weight.shape().to_vec(),
                        });
                    }
                    if p.bias.shape() != b.as_slice() {
                        return Err(VogError::Shape {
                            context: "bias",
                            expected: b,
                            got: p.bias.shape().to_vec(),
                        });
                    }
                }
                _ => {
                    return Err(VogError::validation(
                        "parameter slots do not match the layer list",
                    ))
                }
            }
        }
        Ok(())
    }

    /// Every weight and bias tensor in layer order (weight before bias).
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|p| [&p.weight, &p.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flatten()
            .flat_map(|p| [&mut p.weight, &mut p.bias])
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data_mut().fill(value);
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Params) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += alpha * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

/// A model specification bound to concrete parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Params,
}

impl Model {
    pub fn new(spec: ModelSpec, params: Params) -> Result<Self> {
        spec.layer_shapes()?;
        params.check_against(&spec)?;
        Ok(Self { spec, params })
    }

    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let params = Params::init(&spec, seed)?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn into_params(self) -> Params {
        self.params
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.spec.input_shape {
            return Err(VogError::Shape {
                context: "model input",
                expected: self.spec.input_shape.to_vec(),
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn check_class(&self, what: &'static str, index: usize) -> Result<()> {
        if index >= self.spec.num_classes {
            return Err(VogError::Index {
                what,
                index,
                bound: self.spec.num_classes,
            });
        }
        Ok(())
    }

    /// Forward pass returning the input of every layer plus the final output.
    fn forward_trace(&self, x: &Tensor) -> Vec<Tensor> {
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        acts.push(x.clone());
        for (layer, slot) in self.spec.layers.iter().zip(&self.params.layers) {
            let input = acts.last().expect("trace starts with the input");
            let out = match *layer {
                Layer::Dense { inputs, outputs } => {
                    let p = slot.as_ref().expect("dense layer has params");
                    dense_forward(input.data(), p, inputs, outputs)
                }
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let p = slot.as_ref().expect("conv layer has params");
                    conv_forward(input, p, in_channels, out_channels, kernel)
                }
                Layer::Relu => input.map(|v| if v > 0.0 { v } else { 0.0 }),
                Layer::Flatten => Tensor::from_vec(input.data().to_vec()),
            };
            acts.push(out);
        }
        acts
    }

    /// Backpropagate `grad_out` (the gradient w.r.t. the logits). Accumulates
    /// parameter gradients into `param_grads` when given and returns the
    /// gradient w.r.t. the input when `want_input` is set.
    fn backward(
        &self,
        acts: &[Tensor],
        grad_out: Vec<f64>,
        mut param_grads: Option<&mut Params>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let mut grad = grad_out;
        let n = self.spec.layers.len();
        let first_param = self.params.layers.iter().position(Option::is_some);
        for idx in (0..n).rev() {
            let input = &acts[idx];
            let need_dx = want_input || first_param.is_some_and(|f| idx > f);
            let slot_grad = param_grads
                .as_deref_mut()
                .and_then(|g| g.layers[idx].as_mut());
            grad = match self.spec.layers[idx] {
                Layer::Dense { inputs, outputs } => {
                    let p = self.params.layers[idx].as_ref().expect("dense params");
                    dense_backward(input.data(), &grad, p, slot_grad, inputs, outputs, need_dx)
                }
                Layer::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let p = self.params.layers[idx].as_ref().expect("conv params");
                    conv_backward(
                        input,
                        &grad,
                        p,
                        slot_grad,
                        in_channels,
                        out_channels,
                        kernel,
                        need_dx,
                    )
                }
                Layer::Relu => grad
                    .iter()
                    .zip(input.data())
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect(),
                Layer::Flatten => grad,
            };
            if !need_dx {
                return None;
            }
        }
        Some(grad)
    }

    /// Pre-softmax activations `A^l` for one input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let out = self
            .forward_trace(x)
            .pop()
            .expect("trace holds the output");
        if !out.is_finite() {
            return Err(VogError::validation("non-finite activation in forward pass"));
        }
        Ok(out)
    }

    /// Softmax cross-entropy loss for label `y` and its gradient for every parameter.
    pub fn loss_and_grad(&self, x: &Tensor, y: usize) -> Result<(f64, Params)> {
        let mut grads = Params::zeros_like(&self.spec);
        let loss = self.accumulate_loss_grad(x, y, &mut grads)?;
        Ok((loss, grads))
    }

    /// Like [`Model::loss_and_grad`] but adds into an existing gradient buffer.
    pub fn accumulate_loss_grad(&self, x: &Tensor, y: usize, grads: &mut Params) -> Result<f64> {
        self.check_input(x)?;
        self.check_class("label", y)?;
        let acts = self.forward_trace(x);
        let logits = acts.last().expect("output").data();
        let loss = log_sum_exp(logits) - logits[y];
        let mut delta = softmax(logits);
        delta[y] -= 1.0;
        self.backward(&acts, delta, Some(grads), false);
        Ok(loss)
    }

    /// `dA_p^l / dx`: gradient of the raw class score `p` with respect to every
    /// input element, shaped like the input.
    pub fn input_gradient(&self, x: &Tensor, p: usize) -> Result<Tensor> {
        self.check_input(x)?;
        self.check_class("class", p)?;
        let acts = self.forward_trace(x);
        let mut seed = vec![0.0; self.spec.num_classes];
        seed[p] = 1.0;
        let grad = self
            .backward(&acts, seed, None, true)
            .expect("input gradient requested");
        Tensor::new(x.shape().to_vec(), grad)
    }

    /// Predicted class (argmax of the logits, lowest index on ties) and softmax probabilities.
    pub fn predict(&self, x: &Tensor) -> Result<(usize, Vec<f64>)> {
        let logits = self.forward(x)?;
        Ok((argmax(logits.data()), softmax(logits.data())))
    }
}

fn dense_forward(x: &[f64], p: &LayerParams, inputs: usize, outputs: usize) -> Tensor {
    let w = p.weight.data();
    let b = p.bias.data();
    let out = (0..outputs)
        .map(|o| {
            let row = &w[o * inputs..(o + 1) * inputs];
            b[o] + dot(row, x)
        })
        .collect();
    Tensor::from_vec(out)
}

fn dense_backward(
    x: &[f64],
    g: &[f64],
    p: &LayerParams,
    grads: Option<&mut LayerParams>,
    inputs: usize,
    outputs: usize,
    need_dx: bool,
) -> Vec<f64> {
    if let Some(gp) = grads {
        let dw = gp.weight.data_mut();
        for o in 0..outputs {
            let go = g[o];
            if go != 0.0 {
                for (d, &xi) in dw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                    *d += go * xi;
                }
            }
        }
        for (d, &go) in gp.bias.data_mut().iter_mut().zip(g) {
            *d += go;
        }
    }
    if !need_dx {
        return Vec::new();
    }
    let w = p.weight.data();
    let mut dx = vec![0.0; inputs];
    for o in 0..outputs {
        let go = g[o];
        if go != 0.0 {
            for (d, &wi) in dx.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                *d += go * wi;
            }
        }
    }
    dx
}

fn conv_forward(x: &Tensor, p: &LayerParams, ic: usize, oc: usize, k: usize) -> Tensor {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let xd = x.data();
    let wd = p.weight.data();
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.fill(p.bias.data()[o]);
        for c in 0..ic {
            for u in 0..k {
                for v in 0..k {
                    let wv = wd[((o * ic + c) * k + u) * k + v];
                    for i in 0..oh {
                        let src = &xd[(c * h + i + u) * w + v..][..ow];
                        for (dst, &s) in plane[i * ow..(i + 1) * ow].iter_mut().zip(src) {
                            *dst += wv * s;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![oc, oh, ow], out).expect("conv output shape")
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &Tensor,
    g: &[f64],
    p: &LayerParams,
    grads: Option<&mut LayerParams>,
    ic: usize,
    oc: usize,
    k: usize,
    need_dx: bool,
) -> Vec<f64> {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let xd = x.data();
    if let Some(gp) = grads {
        let dw = gp.weight.data_mut();
        for o in 0..oc {
            let plane = &g[o * oh * ow..(o + 1) * oh * ow];
            for c in 0..ic {
                for u in 0..k {
                    for v in 0..k {
                        let mut acc = 0.0;
                        for i in 0..oh {
                            let src = &xd[(c * h + i + u) * w + v..][..ow];
                            acc += dot(&plane[i * ow..(i + 1) * ow], src);
                        }
                        dw[((o * ic + c) * k + u) * k + v] += acc;
                    }
                }
            }
        }
        for (o, db) in gp.bias.data_mut().iter_mut().enumerate() {
            *db += g[o * oh * ow..(o + 1) * oh * ow].iter().sum::<f64>();
        }
    }
    if !need_dx {
        return Vec::new();
    }
    let wd = p.weight.data();
    let mut dx = vec![0.0; ic * h * w];
    for o in 0..oc {
        let plane = &g[o * oh * ow..(o + 1) * oh * ow];
        for c in 0..ic {
            for u in 0..k {
                for v in 0..k {
                    let wv = wd[((o * ic + c) * k + u) * k + v];
                    for i in 0..oh {
                        let dst = &mut dx[(c * h + i + u) * w + v..][..ow];
                        for (d, &gv) in dst.iter_mut().zip(&plane[i * ow..(i + 1) * ow]) {
                            *d += wv * gv;
                        }
                    }
                }
            }
        }
    }
    dx
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model() -> Model {
        let spec = ModelSpec {
            layers: vec![Layer::Dense {
                inputs: 2,
                outputs: 2,
            }],
            input_shape: [1, 1, 2],
            num_classes: 2,
        };
        let params = Params {
            layers: vec![Some(LayerParams {
                weight: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
                bias: Tensor::zeros(&[2]),
            })],
            seed: 0,
        };
        Model::new(spec, params).unwrap()
    }

    fn input(v: Vec<f64>, shape: [usize; 3]) -> Tensor {
        Tensor::new(shape.to_vec(), v).unwrap()
    }

    #[test]
    fn identity_forward() {
        let m = identity_model();
        let out = m.forward(&input(vec![0.3, 0.7], [1, 1, 2])).unwrap();
        assert_eq!(out.data(), &[0.3, 0.7]);
    }

    #[test]
    fn zero_input_zero_bias_linear_net() {
        let spec = ModelSpec {
            layers: vec![
                Layer::Flatten,
                Layer::Dense {
                    inputs: 4,
                    outputs: 3,
                },
                Layer::Dense {
                    inputs: 3,
                    outputs: 2,
                },
            ],
            input_shape: [1, 2, 2],
            num_classes: 2,
        };
        let m = Model::init(spec, 3).unwrap();
        let out = m.forward(&Tensor::zeros(&[1, 2, 2])).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m = identity_model();
        let err = m.forward(&input(vec![1.0, 2.0, 3.0], [1, 1, 3])).unwrap_err();
        match err {
            VogError::Shape { expected, got, .. } => {
                assert_eq!(expected, vec![1, 1, 2]);
                assert_eq!(got, vec![1, 1, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uniform_logits_give_ln2_loss() {
        let spec = ModelSpec::mlp([1, 1, 2], &[], 2);
        let mut m = Model::init(spec, 0).unwrap();
        m.params_mut().fill(0.0);
        let (loss, _) = m.loss_and_grad(&input(vec![0.4, -1.0], [1, 1, 2]), 1).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_logit_has_vanishing_loss() {
        let mut m = identity_model();
        let (loss, _) = m.loss_and_grad(&input(vec![50.0, -50.0], [1, 1, 2]), 0).unwrap();
        assert!(loss < 1e-40);
        m.params_mut().fill(0.0);
        assert!(m.loss_and_grad(&input(vec![0.0, 0.0], [1, 1, 2]), 2).is_err());
    }

    #[test]
    fn linear_input_gradient_is_weight_row() {
        let spec = ModelSpec {
            layers: vec![Layer::Dense {
                inputs: 3,
                outputs: 2,
            }],
            input_shape: [1, 1, 3],
            num_classes: 2,
        };
        let m = Model::init(spec, 11).unwrap();
        let w = m.params().layers[0].as_ref().unwrap().weight.data().to_vec();
        for x in [vec![0.0, 0.0, 0.0], vec![5.0, -2.0, 0.5]] {
            let g = m.input_gradient(&input(x, [1, 1, 3]), 1).unwrap();
            assert_eq!(g.data(), &w[3..6]);
        }
        assert!(matches!(
            m.input_gradient(&Tensor::zeros(&[1, 1, 3]), 2),
            Err(VogError::Index { .. })
        ));
    }

    #[test]
    fn dead_relu_unit_contributes_nothing() {
        // hidden unit 1 has a large negative bias, so it is inactive for these inputs
        let spec = ModelSpec::mlp([1, 1, 2], &[2], 2);
        let params = Params {
            layers: vec![
                None,
                Some(LayerParams {
                    weight: Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
                    bias: Tensor::from_vec(vec![0.0, -100.0]),
                }),
                None,
                Some(LayerParams {
                    weight: Tensor::new(vec![2, 2], vec![1.0, 7.0, -1.0, 5.0]).unwrap(),
                    bias: Tensor::zeros(&[2]),
                }),
            ],
            seed: 0,
        };
        let m = Model::new(spec, params).unwrap();
        let g = m.input_gradient(&input(vec![1.0, 1.0], [1, 1, 2]), 0).unwrap();
        assert_eq!(g.data(), &[1.0, 2.0]);
    }

    #[test]
    fn predict_argmax_and_ties() {
        assert_eq!(argmax(&[2.0, 5.0, 1.0]), 1);
        assert_eq!(argmax(&[3.0, 3.0]), 0);
        let p = softmax(&[0.0, 0.0, 0.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let (cls, probs) = identity_model()
            .predict(&input(vec![0.2, 0.9], [1, 1, 2]))
            .unwrap();
        assert_eq!(cls, 1);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[0.3, -1.2, 2.5, 0.0]);
        let b = softmax(&[1000.3, 998.8, 1002.5, 1000.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_params() {
        let spec = ModelSpec::small_convnet([2, 6, 6], 3, 3, 5, 4);
        let a = Params::init(&spec, 42).unwrap();
        let b = Params::init(&spec, 42).unwrap();
        let c = Params::init(&spec, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spec_validation_rejects_broken_chains() {
        let bad = ModelSpec {
            layers: vec![
                Layer::Flatten,
                Layer::Dense {
                    inputs: 5,
                    outputs: 2,
                },
            ],
            input_shape: [1, 2, 2],
            num_classes: 2,
        };
        assert!(bad.layer_shapes().is_err());
        let wrong_classes = ModelSpec {
            num_classes: 3,
            ..ModelSpec::mlp([1, 2, 2], &[4], 2)
        };
        assert!(wrong_classes.layer_shapes().is_err());
        let conv_after_flatten = ModelSpec {
            layers: vec![
                Layer::Flatten,
                Layer::Conv {
                    in_channels: 1,
                    out_channels: 1,
                    kernel: 1,
                },
            ],
            input_shape: [1, 2, 2],
            num_classes: 2,
        };
        assert!(conv_after_flatten.layer_shapes().is_err());
    }
}
