//! TinyNet: a three-layer per-pixel edge predictor with hand-written
//! forward and backward passes.
//!
//! ```text
//! conv 3x3 (1 -> 8) + ReLU -> conv 3x3 (8 -> 8) + ReLU -> conv 1x1 (8 -> 1) + sigmoid
//! ```
//!
//! 3x3 convolutions use edge-replication padding, so the output has the
//! input's size. Everything is `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::map::SoftMap;

pub const HIDDEN: usize = 8;

/// Names and shapes of the parameter tensors, in storage order.
pub const TENSOR_SHAPES: [(&str, &[usize]); 6] = [
    ("conv1.weight", &[HIDDEN, 1, 3, 3]),
    ("conv1.bias", &[HIDDEN]),
    ("conv2.weight", &[HIDDEN, HIDDEN, 3, 3]),
    ("conv2.bias", &[HIDDEN]),
    ("conv3.weight", &[1, HIDDEN]),
    ("conv3.bias", &[1]),
];

pub fn tensor_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// A flat list of tensors with [`TENSOR_SHAPES`] layout. Used for the
/// parameters, their gradients, and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tensors: Vec<Vec<f64>>,
}

impl Params {
    pub fn zeros() -> Self {
        Self {
            tensors: TENSOR_SHAPES
                .iter()
                .map(|(_, s)| vec![0.0; tensor_len(s)])
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors.iter_mut().flatten()
    }

    /// `self += other * scale`, elementwise.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b * scale;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.iter_mut().for_each(|v| *v *= s);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    pub params: Params,
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    height: usize,
    width: usize,
    input: Vec<f64>,
    hidden1: Vec<f64>,
    hidden2: Vec<f64>,
    output: Vec<f64>,
}

impl ForwardCache {
    /// Fails when non-finite parameters pushed an output to NaN.
    pub fn output(&self) -> Result<SoftMap> {
        SoftMap::new(self.height, self.width, self.output.clone()).map_err(|_| Error::NonFiniteOutput)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row/column index lookup with edge replication for offsets -1, 0, +1.
fn neighbours(n: usize) -> Vec<[usize; 3]> {
    (0..n)
        .map(|i| [i.saturating_sub(1), i, (i + 1).min(n - 1)])
        .collect()
}

/// 3x3 replicate-padded convolution, `in_ch` planes to `out_ch` planes.
fn conv3x3(
    input: &[f64],
    in_ch: usize,
    out_ch: usize,
    weight: &[f64],
    bias: &[f64],
    h: usize,
    w: usize,
) -> Vec<f64> {
    let rows = neighbours(h);
    let cols = neighbours(w);
    let plane = h * w;
    let mut out = vec![0.0; out_ch * plane];
    for o in 0..out_ch {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..in_ch {
            let src = &input[i * plane..(i + 1) * plane];
            let k = &weight[(o * in_ch + i) * 9..(o * in_ch + i + 1) * 9];
            for r in 0..h {
                let rr = rows[r];
                for c in 0..w {
                    let cc = cols[c];
                    let mut acc = 0.0;
                    for (kr, &sr) in rr.iter().enumerate() {
                        let row = &src[sr * w..];
                        acc += k[kr * 3] * row[cc[0]] + k[kr * 3 + 1] * row[cc[1]] + k[kr * 3 + 2] * row[cc[2]];
                    }
                    dst[r * w + c] += acc;
                }
            }
        }
    }
    out
}

/// Backward of [`conv3x3`]: accumulates weight and bias gradients and
/// returns the input gradient when `want_input` is set.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    in_ch: usize,
    out_ch: usize,
    weight: &[f64],
    grad_out: &[f64],
    h: usize,
    w: usize,
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let rows = neighbours(h);
    let cols = neighbours(w);
    let plane = h * w;
    let mut grad_in = want_input.then(|| vec![0.0; in_ch * plane]);
    for o in 0..out_ch {
        let go = &grad_out[o * plane..(o + 1) * plane];
        grad_bias[o] += go.iter().sum::<f64>();
        for i in 0..in_ch {
            let src = &input[i * plane..(i + 1) * plane];
            let base = (o * in_ch + i) * 9;
            let k = &weight[base..base + 9];
            let mut gk = [0.0f64; 9];
            for r in 0..h {
                for c in 0..w {
                    let g = go[r * w + c];
                    if g == 0.0 {
                        continue;
                    }
                    for (kr, &sr) in rows[r].iter().enumerate() {
                        for (kc, &sc) in cols[c].iter().enumerate() {
                            gk[kr * 3 + kc] += g * src[sr * w + sc];
                        }
                    }
                    if let Some(gi) = grad_in.as_mut() {
                        let gi = &mut gi[i * plane..(i + 1) * plane];
                        for (kr, &sr) in rows[r].iter().enumerate() {
                            for (kc, &sc) in cols[c].iter().enumerate() {
                                gi[sr * w + sc] += g * k[kr * 3 + kc];
                            }
                        }
                    }
                }
            }
            for (dst, g) in grad_weight[base..base + 9].iter_mut().zip(gk) {
                *dst += g;
            }
        }
    }
    grad_in
}

impl TinyNet {
    pub fn zeros() -> Self {
        Self {
            params: Params::zeros(),
        }
    }

    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::zeros();
        for (tensor, (name, shape)) in params.tensors.iter_mut().zip(TENSOR_SHAPES) {
            if name.ends_with("bias") {
                continue;
            }
            let fan_in: usize = shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            tensor
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-bound..=bound));
        }
        Self { params }
    }

    pub fn forward_cached(&self, image: &SoftMap) -> ForwardCache {
        let (h, w) = image.dims();
        let t = &self.params.tensors;
        let input = image.values().to_vec();
        let mut hidden1 = conv3x3(&input, 1, HIDDEN, &t[0], &t[1], h, w);
        hidden1.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut hidden2 = conv3x3(&hidden1, HIDDEN, HIDDEN, &t[2], &t[3], h, w);
        hidden2.iter_mut().for_each(|v| *v = v.max(0.0));
        let plane = h * w;
        let output = (0..plane)
            .map(|p| {
                let z = t[5][0]
                    + (0..HIDDEN)
                        .map(|c| t[4][c] * hidden2[c * plane + p])
                        .sum::<f64>();
                sigmoid(z)
            })
            .collect();
        ForwardCache {
            height: h,
            width: w,
            input,
            hidden1,
            hidden2,
            output,
        }
    }

    pub fn forward(&self, image: &SoftMap) -> Result<SoftMap> {
        self.forward_cached(image).output()
    }

    /// Parameter gradients given dL/d(output) per pixel.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &[f64]) -> Result<Params> {
        let (h, w) = (cache.height, cache.width);
        let plane = h * w;
        if loss_grad.len() != plane {
            return Err(Error::DimensionMismatch {
                expected: (h, w),
                actual: (loss_grad.len() / w.max(1), w),
            });
        }
        let t = &self.params.tensors;
        let mut grads = Params::zeros();

        let dz3: Vec<f64> = loss_grad
            .iter()
            .zip(&cache.output)
            .map(|(g, y)| g * y * (1.0 - y))
            .collect();
        grads.tensors[5][0] = dz3.iter().sum();
        let mut dz2 = vec![0.0; HIDDEN * plane];
        for c in 0..HIDDEN {
            let a2 = &cache.hidden2[c * plane..(c + 1) * plane];
            grads.tensors[4][c] = a2.iter().zip(&dz3).map(|(a, d)| a * d).sum();
            for p in 0..plane {
                if a2[p] > 0.0 {
                    dz2[c * plane + p] = t[4][c] * dz3[p];
                }
            }
        }

        let (g2w, rest) = grads.tensors.split_at_mut(3);
        let mut da1 = conv3x3_backward(
            &cache.hidden1,
            HIDDEN,
            HIDDEN,
            &t[2],
            &dz2,
            h,
            w,
            &mut g2w[2],
            &mut rest[0],
            true,
        )
        .expect("input gradient requested");
        for (d, a) in da1.iter_mut().zip(&cache.hidden1) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }
        let (g1w, g1b) = g2w.split_at_mut(1);
        conv3x3_backward(
            &cache.input,
            1,
            HIDDEN,
            &t[0],
            &da1,
            h,
            w,
            &mut g1w[0],
            &mut g1b[0],
            false,
        );
        Ok(grads)
    }
}
