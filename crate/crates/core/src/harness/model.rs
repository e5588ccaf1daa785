//! Compact convolutional reference classifier with hand-written backprop.
//!
//! Input is the spectrogram as a single-channel image with subcarriers as
//! rows and time as columns. Three blocks of 3x3 same-padded convolution,
//! ReLU and 2x2 max pooling (floor) are followed by global average pooling
//! and an affine map to class scores.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::NUM_CLASSES;
use crate::rng::Stream;
use crate::spectro::Spectrogram;

/// Something that scores spectrograms.
pub trait Classifier: Send + Sync {
    fn scores(&self, x: &Spectrogram) -> [f64; NUM_CLASSES];

    fn predict(&self, x: &Spectrogram) -> usize {
        argmax(&self.scores(x))
    }
}

/// A classifier trained by gradient descent on a flat parameter vector.
pub trait Trainable: Classifier + Clone {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// Adds the cross-entropy gradient for one sample into `grad` and
    /// returns the loss.
    fn accumulate_gradient(&self, x: &Spectrogram, label: usize, grad: &mut [f64]) -> f64;
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Softmax cross-entropy loss and its gradient with respect to the scores.
pub fn cross_entropy(scores: &[f64; NUM_CLASSES], label: usize) -> (f64, [f64; NUM_CLASSES]) {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = scores.map(|s| (s - m).exp());
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + m - scores[label];
    let mut grad = exps.map(|e| e / z);
    grad[label] -= 1.0;
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Feature counts of the three convolution blocks.
    pub channels: Vec<usize>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { channels: vec![16, 32, 64] }
    }
}

const K: usize = 3;

#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    cin: usize,
    cout: usize,
    w_off: usize,
    b_off: usize,
}

impl ConvLayer {
    fn weight_len(&self) -> usize {
        self.cout * self.cin * K * K
    }
}

/// The reference network.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactCnn {
    config: ClassifierConfig,
    params: Vec<f64>,
}

struct Layout {
    convs: Vec<ConvLayer>,
    fc_w: usize,
    fc_b: usize,
    features: usize,
    total: usize,
}

fn layout(channels: &[usize]) -> Layout {
    let mut convs = Vec::new();
    let mut off = 0;
    let mut cin = 1;
    for &cout in channels {
        let layer = ConvLayer { cin, cout, w_off: off, b_off: off + cout * cin * K * K };
        off = layer.b_off + cout;
        convs.push(layer);
        cin = cout;
    }
    let fc_w = off;
    let fc_b = fc_w + NUM_CLASSES * cin;
    Layout { convs, fc_w, fc_b, features: cin, total: fc_b + NUM_CLASSES }
}

/// out[o] += sum_i W[o,i] * in[i], same padding. Planes are `hh x ww`.
fn conv_forward(input: &[f64], layer: &ConvLayer, params: &[f64], hh: usize, ww: usize) -> Vec<f64> {
    let plane = hh * ww;
    let weights = &params[layer.w_off..layer.w_off + layer.weight_len()];
    let bias = &params[layer.b_off..layer.b_off + layer.cout];
    let mut out = vec![0.0; layer.cout * plane];
    if plane == 0 {
        return out;
    }
    for o in 0..layer.cout {
        let out_p = &mut out[o * plane..(o + 1) * plane];
        out_p.fill(bias[o]);
        for i in 0..layer.cin {
            let in_p = &input[i * plane..(i + 1) * plane];
            for dy in 0..K {
                for dx in 0..K {
                    let wv = weights[((o * layer.cin + i) * K + dy) * K + dx];
                    let (x0, x1) = (1usize.saturating_sub(dx), (ww + 1).saturating_sub(dx).min(ww));
                    for y in 0..hh {
                        let sy = y + dy;
                        if sy < 1 || sy > hh {
                            continue;
                        }
                        let src = &in_p[(sy - 1) * ww + x0 + dx - 1..(sy - 1) * ww + x1 + dx - 1];
                        let dst = &mut out_p[y * ww + x0..y * ww + x1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients and, if `din` is given, the input
/// gradient for a conv layer.
fn conv_backward(
    input: &[f64],
    dout: &[f64],
    layer: &ConvLayer,
    params: &[f64],
    grad: &mut [f64],
    mut din: Option<&mut [f64]>,
    hh: usize,
    ww: usize,
) {
    let plane = hh * ww;
    if plane == 0 {
        return;
    }
    for o in 0..layer.cout {
        let dout_p = &dout[o * plane..(o + 1) * plane];
        grad[layer.b_off + o] += dout_p.iter().sum::<f64>();
        for i in 0..layer.cin {
            let in_p = &input[i * plane..(i + 1) * plane];
            for dy in 0..K {
                for dx in 0..K {
                    let widx = ((o * layer.cin + i) * K + dy) * K + dx;
                    let wv = params[layer.w_off + widx];
                    let (x0, x1) = (1usize.saturating_sub(dx), (ww + 1).saturating_sub(dx).min(ww));
                    let mut acc = 0.0;
                    for y in 0..hh {
                        let sy = y + dy;
                        if sy < 1 || sy > hh {
                            continue;
                        }
                        let s0 = (sy - 1) * ww + x0 + dx - 1;
                        let src = &in_p[s0..s0 + (x1 - x0)];
                        let g = &dout_p[y * ww + x0..y * ww + x1];
                        acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(din) = din.as_deref_mut() {
                            let dst = &mut din[i * plane + s0..i * plane + s0 + (x1 - x0)];
                            for (d, gv) in dst.iter_mut().zip(g) {
                                *d += wv * gv;
                            }
                        }
                    }
                    grad[layer.w_off + widx] += acc;
                }
            }
        }
    }
}

/// 2x2 max pooling with floor; returns pooled planes and argmax indices.
fn pool_forward(input: &[f64], c: usize, hh: usize, ww: usize) -> (Vec<f64>, Vec<usize>) {
    let (ph, pw) = (hh / 2, ww / 2);
    let mut out = Vec::with_capacity(c * ph * pw);
    let mut idx = Vec::with_capacity(c * ph * pw);
    for ch in 0..c {
        let base = ch * hh * ww;
        for y in 0..ph {
            for x in 0..pw {
                let cands = [
                    base + 2 * y * ww + 2 * x,
                    base + 2 * y * ww + 2 * x + 1,
                    base + (2 * y + 1) * ww + 2 * x,
                    base + (2 * y + 1) * ww + 2 * x + 1,
                ];
                let best = cands.into_iter().fold(cands[0], |b, j| if input[j] > input[b] { j } else { b });
                out.push(input[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

struct BlockCache {
    input: Vec<f64>,
    /// Post-ReLU activations.
    act: Vec<f64>,
    pool_idx: Vec<usize>,
    hh: usize,
    ww: usize,
}

impl CompactCnn {
    /// Smallest height or width that keeps a nonempty plane after every pool.
    pub fn min_input_side(config: &ClassifierConfig) -> usize {
        1 << config.channels.len()
    }

    /// He-normal convolution weights, scaled-normal output weights, zero biases.
    pub fn new(config: ClassifierConfig, seed: u64) -> Self {
        let lay = layout(&config.channels);
        let mut params = vec![0.0; lay.total];
        let mut stream = Stream::derive(seed, &[crate::rng::tag(b"init")]);
        for l in &lay.convs {
            let std = (2.0 / (l.cin * K * K) as f64).sqrt();
            for p in &mut params[l.w_off..l.w_off + l.weight_len()] {
                let z: f64 = StandardNormal.sample(&mut stream);
                *p = std * z;
            }
        }
        let std = (1.0 / lay.features as f64).sqrt();
        for p in &mut params[lay.fc_w..lay.fc_b] {
            let z: f64 = StandardNormal.sample(&mut stream);
            *p = std * z;
        }
        Self { config, params }
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Replaces the parameters; the length must match.
    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    fn image(x: &Spectrogram) -> Vec<f64> {
        let (w, h) = (x.width(), x.height());
        let mut img = vec![0.0; w * h];
        for t in 0..w {
            for (k, v) in x.column(t).iter().enumerate() {
                img[k * w + t] = *v;
            }
        }
        img
    }

    fn forward(&self, x: &Spectrogram) -> (Vec<BlockCache>, Vec<f64>, [f64; NUM_CLASSES]) {
        let lay = layout(&self.config.channels);
        let (mut hh, mut ww) = (x.height(), x.width());
        let mut cur = Self::image(x);
        let mut caches = Vec::with_capacity(lay.convs.len());
        for l in &lay.convs {
            let mut act = conv_forward(&cur, l, &self.params, hh, ww);
            for v in &mut act {
                *v = v.max(0.0);
            }
            let (pooled, pool_idx) = pool_forward(&act, l.cout, hh, ww);
            caches.push(BlockCache { input: cur, act, pool_idx, hh, ww });
            cur = pooled;
            hh /= 2;
            ww /= 2;
        }
        let plane = (hh * ww).max(1);
        let feats: Vec<f64> = (0..lay.features)
            .map(|c| if hh * ww == 0 { 0.0 } else { cur[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64 })
            .collect();
        let mut scores = [0.0; NUM_CLASSES];
        for (j, s) in scores.iter_mut().enumerate() {
            let row = &self.params[lay.fc_w + j * lay.features..lay.fc_w + (j + 1) * lay.features];
            *s = self.params[lay.fc_b + j] + row.iter().zip(&feats).map(|(a, b)| a * b).sum::<f64>();
        }
        caches.push(BlockCache { input: cur, act: Vec::new(), pool_idx: Vec::new(), hh, ww });
        (caches, feats, scores)
    }
}

impl Classifier for CompactCnn {
    fn scores(&self, x: &Spectrogram) -> [f64; NUM_CLASSES] {
        self.forward(x).2
    }
}

impl Trainable for CompactCnn {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_gradient(&self, x: &Spectrogram, label: usize, grad: &mut [f64]) -> f64 {
        let lay = layout(&self.config.channels);
        let (mut caches, feats, scores) = self.forward(x);
        let (loss, dscores) = cross_entropy(&scores, label);

        let mut dfeats = vec![0.0; lay.features];
        for (j, &ds) in dscores.iter().enumerate() {
            grad[lay.fc_b + j] += ds;
            let w0 = lay.fc_w + j * lay.features;
            for c in 0..lay.features {
                grad[w0 + c] += ds * feats[c];
                dfeats[c] += ds * self.params[w0 + c];
            }
        }

        // Through global average pooling.
        let last = caches.pop().expect("head cache");
        let plane = last.hh * last.ww;
        let mut dcur = vec![0.0; last.input.len()];
        if plane > 0 {
            for c in 0..lay.features {
                dcur[c * plane..(c + 1) * plane].fill(dfeats[c] / plane as f64);
            }
        }

        for (li, (l, cache)) in lay.convs.iter().zip(caches.iter()).enumerate().rev() {
            // Unpool, then gate by ReLU.
            let mut dact = vec![0.0; cache.act.len()];
            for (g, &j) in dcur.iter().zip(&cache.pool_idx) {
                dact[j] += g;
            }
            for (d, a) in dact.iter_mut().zip(&cache.act) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            if li == 0 {
                conv_backward(&cache.input, &dact, l, &self.params, grad, None, cache.hh, cache.ww);
            } else {
                let mut din = vec![0.0; cache.input.len()];
                conv_backward(&cache.input, &dact, l, &self.params, grad, Some(&mut din), cache.hh, cache.ww);
                dcur = din;
            }
        }
        loss
    }
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }
}
