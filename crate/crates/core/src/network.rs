//! A small convolutional network on `N x N` images, trained with SGD and
//! heavy-ball momentum on an l1 loss.
//!
//! Every layer is a 3x3 convolution (stride 1, zero padding) followed by a
//! ReLU, except the last which is linear. An optional global skip adds the
//! input to the output.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

const TAPS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkArch {
    pub side: usize,
    pub layers: Vec<ConvSpec>,
    pub residual: bool,
}

impl NetworkArch {
    pub fn new(side: usize, layers: Vec<ConvSpec>, residual: bool) -> Result<Self> {
        let arch = Self { side, layers, residual };
        arch.validate()?;
        Ok(arch)
    }

    /// Builds `1 -> c_1 -> ... -> c_k -> 1`.
    pub fn with_channels(side: usize, hidden: &[usize], residual: bool) -> Result<Self> {
        let mut chans = vec![1];
        chans.extend_from_slice(hidden);
        chans.push(1);
        let layers = chans.windows(2).map(|w| ConvSpec { in_channels: w[0], out_channels: w[1] }).collect();
        Self::new(side, layers, residual)
    }

    /// Three layers, `1 -> 16 -> 16 -> 1`, no skip.
    pub fn default_for(side: usize) -> Self {
        Self::with_channels(side, &[16, 16], false).expect("static architecture is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(Error::invalid("network side must be positive"));
        }
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::invalid("network needs at least one layer")),
        };
        if first.in_channels != 1 || last.out_channels != 1 {
            return Err(Error::invalid("network must map one channel to one channel"));
        }
        for w in self.layers.windows(2) {
            if w[0].out_channels != w[1].in_channels {
                return Err(Error::invalid("consecutive layer channel counts disagree"));
            }
        }
        if self.layers.iter().any(|l| l.in_channels == 0 || l.out_channels == 0) {
            return Err(Error::invalid("layer with zero channels"));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Index `((o * in + i) * 3 + ky) * 3 + kx`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn zeros(spec: ConvSpec) -> Self {
        Self { weights: vec![0.0; spec.out_channels * spec.in_channels * TAPS], bias: vec![0.0; spec.out_channels] }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub arch: NetworkArch,
    pub layers: Vec<LayerParams>,
    pub seed: u64,
}

/// Gradient with the same layout as [`NetworkParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    fn zeros(arch: &NetworkArch) -> Self {
        Self { layers: arch.layers.iter().map(|&s| LayerParams::zeros(s)).collect() }
    }

    fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.values())
    }
}

impl NetworkParams {
    /// He-style initialization: weights `N(0, 2/fan_in)`, zero biases.
    pub fn init(arch: NetworkArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layers
            .iter()
            .map(|&spec| {
                let scale = (2.0 / (spec.in_channels * TAPS) as f64).sqrt();
                let mut layer = LayerParams::zeros(spec);
                for w in &mut layer.weights {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *w = scale * g;
                }
                layer
            })
            .collect();
        Ok(Self { arch, layers, seed })
    }

    /// [`init`](Self::init) with the output layer zeroed, so an untrained
    /// residual branch contributes nothing and training starts from the base
    /// reconstruction.
    pub fn init_zero_output(arch: NetworkArch, seed: u64) -> Result<Self> {
        let mut params = Self::init(arch, seed)?;
        if let Some(last) = params.layers.last_mut() {
            last.weights.fill(0.0);
        }
        Ok(params)
    }

    /// All weights and biases zero.
    pub fn zeros(arch: NetworkArch) -> Result<Self> {
        arch.validate()?;
        let layers = arch.layers.iter().map(|&s| LayerParams::zeros(s)).collect();
        Ok(Self { arch, layers, seed: 0 })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.values())
    }

    /// Checks shapes against the architecture and that every value is finite.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        check_len(self.arch.layers.len(), self.layers.len())?;
        for (spec, layer) in self.arch.layers.iter().zip(&self.layers) {
            check_len(spec.in_channels * spec.out_channels * TAPS, layer.weights.len())?;
            check_len(spec.out_channels, layer.bias.len())?;
        }
        if self.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }

    /// Evaluates the network on an `N x N` image stored row-major.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.arch.pixels(), x.len())?;
        Ok(self.forward_cached(x).output)
    }

    fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let side = self.arch.side;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for (l, (spec, layer)) in self.arch.layers.iter().zip(&self.layers).enumerate() {
            let mut out = vec![0.0; spec.out_channels * side * side];
            conv_forward(&current, *spec, side, layer, &mut out);
            inputs.push(current);
            if l != last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            current = out;
        }
        if self.arch.residual {
            for (o, xi) in current.iter_mut().zip(x) {
                *o += xi;
            }
        }
        ForwardCache { inputs, output: current }
    }

    /// Reverse pass given `d loss / d output`.
    fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Gradients {
        let side = self.arch.side;
        let mut grads = Gradients::zeros(&self.arch);
        let mut upstream = grad_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let spec = self.arch.layers[l];
            let input = &cache.inputs[l];
            conv_param_grad(&upstream, input, spec, side, &mut grads.layers[l]);
            if l == 0 {
                break;
            }
            let mut down = vec![0.0; spec.in_channels * side * side];
            conv_adjoint(&upstream, spec, side, &self.layers[l].weights, &mut down);
            // input of layer l is relu(pre-activation); subgradient 0 at the kink
            for (d, &a) in down.iter_mut().zip(input) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            upstream = down;
        }
        grads
    }
}

struct ForwardCache {
    /// Input of each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

/// Row range `[lo, hi)` of outputs touched by tap offset `d` on a grid of `side`.
#[inline]
fn tap_range(d: isize, side: usize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (side as isize - d).min(side as isize).max(0) as usize;
    (lo, hi)
}

fn conv_forward(input: &[f64], spec: ConvSpec, side: usize, layer: &LayerParams, out: &mut [f64]) {
    let plane = side * side;
    for o in 0..spec.out_channels {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.fill(layer.bias[o]);
        for i in 0..spec.in_channels {
            let src = &input[i * plane..(i + 1) * plane];
            let w = &layer.weights[(o * spec.in_channels + i) * TAPS..][..TAPS];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = tap_range(dy, side);
                for kx in 0..3 {
                    let wv = w[ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let dx = kx as isize - 1;
                    let (x0, x1) = tap_range(dx, side);
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let d = &mut dst[y * side + x0..y * side + x1];
                        let s = &src[sy * side + (x0 as isize + dx) as usize..][..x1 - x0];
                        for (a, b) in d.iter_mut().zip(s) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
}

/// Transpose of the linear part of [`conv_forward`].
fn conv_adjoint(grad_out: &[f64], spec: ConvSpec, side: usize, weights: &[f64], grad_in: &mut [f64]) {
    let plane = side * side;
    grad_in.fill(0.0);
    for o in 0..spec.out_channels {
        let g = &grad_out[o * plane..(o + 1) * plane];
        for i in 0..spec.in_channels {
            let dst = &mut grad_in[i * plane..(i + 1) * plane];
            let w = &weights[(o * spec.in_channels + i) * TAPS..][..TAPS];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = tap_range(dy, side);
                for kx in 0..3 {
                    let wv = w[ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let dx = kx as isize - 1;
                    let (x0, x1) = tap_range(dx, side);
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let s = &g[y * side + x0..y * side + x1];
                        let d = &mut dst[sy * side + (x0 as isize + dx) as usize..][..x1 - x0];
                        for (a, b) in d.iter_mut().zip(s) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
}

fn conv_param_grad(grad_out: &[f64], input: &[f64], spec: ConvSpec, side: usize, acc: &mut LayerParams) {
    let plane = side * side;
    for o in 0..spec.out_channels {
        let g = &grad_out[o * plane..(o + 1) * plane];
        acc.bias[o] += g.iter().sum::<f64>();
        for i in 0..spec.in_channels {
            let src = &input[i * plane..(i + 1) * plane];
            let w = &mut acc.weights[(o * spec.in_channels + i) * TAPS..][..TAPS];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = tap_range(dy, side);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = tap_range(dx, side);
                    let mut sum = 0.0;
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let gg = &g[y * side + x0..y * side + x1];
                        let s = &src[sy * side + (x0 as isize + dx) as usize..][..x1 - x0];
                        sum += gg.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                    }
                    w[ky * 3 + kx] += sum;
                }
            }
        }
    }
}

/// A fixed linear map applied to the network output before the loss.
pub trait OutputProjection {
    fn project(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Adjoint of [`project`](Self::project); orthogonal projectors are self-adjoint.
    fn project_adjoint(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.project(x)
    }

    fn project_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.project(x)).collect()
    }

    /// Batched adjoint; defaults to [`project_many`](Self::project_many) like the single-vector case.
    fn project_adjoint_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.project_many(xs)
    }
}

/// No projection.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl OutputProjection for Identity {
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

/// One training example: the prediction is `base + P(N(input))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: Vec<f64>,
    pub base: Vec<f64>,
    pub target: Vec<f64>,
}

/// `(1/K) sum_k ||target_k - prediction_k||_1`.
pub fn loss_mae(pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("MAE of an empty batch"));
    }
    let mut total = 0.0;
    for (prediction, target) in pairs {
        check_len(target.len(), prediction.len())?;
        total += prediction.iter().zip(target.iter()).map(|(p, t)| (t - p).abs()).sum::<f64>();
    }
    Ok(total / pairs.len() as f64)
}

fn forward_batch(
    params: &NetworkParams,
    batch: &[TrainingSample],
    projection: &dyn OutputProjection,
) -> Result<(Vec<ForwardCache>, Vec<Vec<f64>>)> {
    let n = params.arch.pixels();
    let mut caches = Vec::with_capacity(batch.len());
    for sample in batch {
        check_len(n, sample.input.len())?;
        check_len(n, sample.base.len())?;
        check_len(n, sample.target.len())?;
        let cache = params.forward_cached(&sample.input);
        if cache.output.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network forward pass"));
        }
        caches.push(cache);
    }
    let outputs: Vec<Vec<f64>> = caches.iter().map(|c| c.output.clone()).collect();
    let projected = projection.project_many(&outputs)?;
    let predictions =
        projected.iter().zip(batch).map(|(p, s)| s.base.iter().zip(p).map(|(b, q)| b + q).collect()).collect();
    Ok((caches, predictions))
}

/// MAE of `base + P(N(input))` against the targets of a batch.
pub fn batch_loss(params: &NetworkParams, batch: &[TrainingSample], projection: &dyn OutputProjection) -> Result<f64> {
    let (_, predictions) = forward_batch(params, batch, projection)?;
    let pairs: Vec<(&[f64], &[f64])> =
        predictions.iter().zip(batch).map(|(p, s)| (p.as_slice(), s.target.as_slice())).collect();
    loss_mae(&pairs)
}

/// Loss and exact reverse-mode gradient of
/// `(1/K) sum_k ||target_k - base_k - P(N(input_k))||_1`.
///
/// The l1 subgradient at a zero residual is taken as 0.
pub fn loss_and_gradient(
    params: &NetworkParams,
    batch: &[TrainingSample],
    projection: &dyn OutputProjection,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient of an empty batch"));
    }
    let k = batch.len() as f64;
    let (caches, predictions) = forward_batch(params, batch, projection)?;
    let mut loss = 0.0;
    let mut signs = Vec::with_capacity(batch.len());
    for (prediction, sample) in predictions.iter().zip(batch) {
        let sign: Vec<f64> = prediction
            .iter()
            .zip(&sample.target)
            .map(|(p, t)| {
                let r = t - p;
                loss += r.abs();
                // d|t - p| / dp
                if r > 0.0 {
                    -1.0
                } else if r < 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        signs.push(sign);
    }
    let grad_outs = projection.project_adjoint_many(&signs)?;
    let mut grads = Gradients::zeros(&params.arch);
    for (cache, grad_out) in caches.iter().zip(&grad_outs) {
        grads.add_scaled(&params.backward(cache, grad_out), 1.0 / k);
    }
    Ok((loss / k, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub velocity: Gradients,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epoch: usize,
}

impl TrainState {
    pub fn new(arch: &NetworkArch, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(Self { velocity: Gradients::zeros(arch), learning_rate, momentum, epoch: 0 })
    }
}

/// Heavy-ball update: `v <- m v + g`, `theta <- theta - lr v`.
pub fn sgd_momentum_step(params: &mut NetworkParams, grads: &Gradients, state: &mut TrainState) -> Result<()> {
    check_len(params.layers.len(), grads.layers.len())?;
    check_len(params.layers.len(), state.velocity.layers.len())?;
    let (lr, m) = (state.learning_rate, state.momentum);
    for ((p, g), v) in params.layers.iter_mut().zip(&grads.layers).zip(&mut state.velocity.layers) {
        check_len(p.weights.len(), g.weights.len())?;
        check_len(p.bias.len(), g.bias.len())?;
        for ((pw, gw), vw) in p.weights.iter_mut().zip(&g.weights).zip(&mut v.weights) {
            *vw = m * *vw + gw;
            *pw -= lr * *vw;
        }
        for ((pb, gb), vb) in p.bias.iter_mut().zip(&g.bias).zip(&mut v.bias) {
            *vb = m * *vb + gb;
            *pb -= lr * *vb;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Mini-batch size; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Multiplies the l1 loss before differentiation, e.g. `1/N^2` to
    /// optimize the per-pixel mean instead of the per-image sum.
    pub loss_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, momentum: 0.99, epochs: 10, batch_size: 10, seed: 0, loss_scale: 1.0 }
    }
}

/// Runs `config.epochs` epochs of shuffled mini-batch SGD with momentum.
///
/// Returns the mean per-sample l1 loss of every epoch, measured on the
/// mini-batches before each update. `on_epoch` sees `(epoch, loss)`.
pub fn train(
    params: &mut NetworkParams,
    samples: &[TrainingSample],
    projection: &dyn OutputProjection,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let mut state = TrainState::new(&params.arch, config.learning_rate * config.loss_scale, config.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch_size = if config.batch_size == 0 { samples.len() } else { config.batch_size };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<TrainingSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (loss, grads) = loss_and_gradient(params, &batch, projection)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            sgd_momentum_step(params, &grads, &mut state)?;
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() || params.values().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        state.epoch = epoch + 1;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 10_000;

/// Spectral norm of one layer's linear map by power iteration on `W^T W`.
pub fn layer_spectral_norm(params: &NetworkParams, layer: usize) -> Result<f64> {
    let spec = params.arch.layers[layer];
    let side = params.arch.side;
    let weights = &params.layers[layer].weights;
    let linear = LayerParams { weights: weights.clone(), bias: vec![0.0; spec.out_channels] };
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(0.0);
    }
    let n_in = spec.in_channels * side * side;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ layer as u64);
    let mut v: Vec<f64> = (0..n_in).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    let mut out = vec![0.0; spec.out_channels * side * side];
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        conv_forward(&v, spec, side, &linear, &mut out);
        conv_adjoint(&out, spec, side, weights, &mut v);
        // ||W^T W v|| with ||v|| = 1 approaches sigma_max^2
        let next = normalize(&mut v).sqrt();
        if next == 0.0 {
            return Ok(0.0);
        }
        if (next - estimate).abs() <= POWER_TOL * next {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::PowerIteration(POWER_MAX_ITER))
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = crate::norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Product of per-layer spectral norms (ReLU is 1-Lipschitz); the skip adds 1.
pub fn lipschitz_upper_bound(params: &NetworkParams) -> Result<f64> {
    params.validate()?;
    let mut product = 1.0;
    for l in 0..params.layers.len() {
        product *= layer_spectral_norm(params, l)?;
        if product == 0.0 {
            break;
        }
    }
    Ok(if params.arch.residual { product + 1.0 } else { product })
}
