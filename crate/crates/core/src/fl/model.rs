//! Small classifiers trained by the devices, stored as flat parameter vectors.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use crate::error::{Error, Result};

/// Model architecture; parameters live in one flat `Vec<f64>` whose layout
/// is fixed by the variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    /// Multinomial logistic regression.
    Logistic { input: usize, classes: usize },
    /// `input -> hidden (ReLU) -> classes`.
    Mlp { input: usize, hidden: usize, classes: usize },
    /// Single-channel `side x side` images:
    /// conv3x3-16, ReLU, pool2, conv3x3-32, ReLU, pool2, dense-128, ReLU, dense-classes.
    Cnn { side: usize, classes: usize },
}

const CNN_C1: usize = 16;
const CNN_C2: usize = 32;
const CNN_DENSE: usize = 128;

impl Architecture {
    pub fn classes(&self) -> usize {
        match *self {
            Architecture::Logistic { classes, .. }
            | Architecture::Mlp { classes, .. }
            | Architecture::Cnn { classes, .. } => classes,
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Logistic { input, .. } | Architecture::Mlp { input, .. } => input,
            Architecture::Cnn { side, .. } => side * side,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Logistic { input, classes } => classes * input + classes,
            Architecture::Mlp { input, hidden, classes } => hidden * input + hidden + classes * hidden + classes,
            Architecture::Cnn { side, classes } => {
                let flat = CNN_C2 * (side / 4) * (side / 4);
                (CNN_C1 * 9 + CNN_C1) + (CNN_C2 * CNN_C1 * 9 + CNN_C2) + (CNN_DENSE * flat + CNN_DENSE) + (classes * CNN_DENSE + classes)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes() < 2 {
            return Err(Error::invalid("classes", "need at least two classes"));
        }
        match *self {
            Architecture::Cnn { side, .. } if side < 4 || side % 4 != 0 => {
                Err(Error::invalid("side", format!("CNN input side must be a positive multiple of 4, got {side}")))
            }
            Architecture::Mlp { hidden: 0, .. } => Err(Error::invalid("hidden", "must be positive")),
            _ if self.input_dim() == 0 => Err(Error::invalid("input", "must be positive")),
            _ => Ok(()),
        }
    }

    /// He-normal weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        let mut layer = |params: &mut Vec<f64>, weights: usize, biases: usize, fan_in: usize| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            params.extend((0..weights).map(|_| normal.sample(rng)));
            params.extend(std::iter::repeat_n(0.0, biases));
        };
        match *self {
            Architecture::Logistic { input, classes } => layer(&mut params, classes * input, classes, input),
            Architecture::Mlp { input, hidden, classes } => {
                layer(&mut params, hidden * input, hidden, input);
                layer(&mut params, classes * hidden, classes, hidden);
            }
            Architecture::Cnn { side, classes } => {
                let flat = CNN_C2 * (side / 4) * (side / 4);
                layer(&mut params, CNN_C1 * 9, CNN_C1, 9);
                layer(&mut params, CNN_C2 * CNN_C1 * 9, CNN_C2, CNN_C1 * 9);
                layer(&mut params, CNN_DENSE * flat, CNN_DENSE, flat);
                layer(&mut params, classes * CNN_DENSE, classes, CNN_DENSE);
            }
        }
        params
    }

    /// Class scores for one sample.
    pub fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        match *self {
            Architecture::Logistic { input, classes } => dense(&params[..classes * input], &params[classes * input..], x, classes),
            Architecture::Mlp { input, hidden, classes } => {
                let (w1, rest) = params.split_at(hidden * input);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(classes * hidden);
                let mut h = dense(w1, b1, x, hidden);
                relu(&mut h);
                dense(w2, b2, &h, classes)
            }
            Architecture::Cnn { side, classes } => Cnn::new(side, classes).forward(params, x).logits,
        }
    }

    pub fn predict(&self, params: &[f64], x: &[f64]) -> usize {
        argmax(&self.logits(params, x))
    }

    /// Mean cross-entropy over `batch`; accumulates the mean gradient into `grad`.
    pub fn loss_grad(&self, params: &[f64], data: &Dataset, batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for &i in batch {
            let (x, y) = (data.sample(i), data.labels[i] as usize);
            loss += match *self {
                Architecture::Logistic { input, classes } => {
                    let (w, b) = params.split_at(classes * input);
                    let logits = dense(w, b, x, classes);
                    let (l, d) = softmax_cross_entropy(&logits, y);
                    let (gw, gb) = grad.split_at_mut(classes * input);
                    dense_backward(w, x, &d, gw, gb, None, scale);
                    l
                }
                Architecture::Mlp { input, hidden, classes } => {
                    let (w1, rest) = params.split_at(hidden * input);
                    let (b1, rest) = rest.split_at(hidden);
                    let (w2, b2) = rest.split_at(classes * hidden);
                    let pre = dense(w1, b1, x, hidden);
                    let mut h = pre.clone();
                    relu(&mut h);
                    let logits = dense(w2, b2, &h, classes);
                    let (l, d) = softmax_cross_entropy(&logits, y);
                    let (gw1, rest) = grad.split_at_mut(hidden * input);
                    let (gb1, rest) = rest.split_at_mut(hidden);
                    let (gw2, gb2) = rest.split_at_mut(classes * hidden);
                    let mut dh = vec![0.0; hidden];
                    dense_backward(w2, &h, &d, gw2, gb2, Some(&mut dh), scale);
                    for (g, p) in dh.iter_mut().zip(&pre) {
                        if *p <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    dense_backward(w1, x, &dh, gw1, gb1, None, scale);
                    l
                }
                Architecture::Cnn { side, classes } => Cnn::new(side, classes).backward(params, x, y, grad, scale),
            };
        }
        loss * scale
    }

    /// Top-1 accuracy in percent.
    pub fn accuracy(&self, params: &[f64], data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = (0..data.len())
            .filter(|&i| self.predict(params, data.sample(i)) == data.labels[i] as usize)
            .count();
        100.0 * correct as f64 / data.len() as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `W x + b` with `W` row-major `out x in`.
fn dense(w: &[f64], b: &[f64], x: &[f64], out: usize) -> Vec<f64> {
    let n = x.len();
    (0..out)
        .map(|o| b[o] + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

fn dense_backward(w: &[f64], x: &[f64], d: &[f64], gw: &mut [f64], gb: &mut [f64], dx: Option<&mut [f64]>, scale: f64) {
    let n = x.len();
    for (o, &dout) in d.iter().enumerate() {
        let ds = dout * scale;
        gb[o] += ds;
        for (g, xi) in gw[o * n..(o + 1) * n].iter_mut().zip(x) {
            *g += ds * xi;
        }
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for (o, &dout) in d.iter().enumerate() {
            for (v, wi) in dx.iter_mut().zip(&w[o * n..(o + 1) * n]) {
                *v += dout * wi;
            }
        }
    }
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut d: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = -(d[label].max(1e-300)).ln();
    d[label] -= 1.0;
    (loss, d)
}

/// Parameter offsets and activations of the four-layer CNN.
struct Cnn {
    side: usize,
    classes: usize,
}

struct CnnActivations {
    c1: Vec<f64>,
    p1: Vec<f64>,
    p1_idx: Vec<usize>,
    c2: Vec<f64>,
    p2: Vec<f64>,
    p2_idx: Vec<usize>,
    d1_pre: Vec<f64>,
    d1: Vec<f64>,
    logits: Vec<f64>,
}

impl Cnn {
    fn new(side: usize, classes: usize) -> Self {
        Cnn { side, classes }
    }

    fn flat(&self) -> usize {
        CNN_C2 * (self.side / 4) * (self.side / 4)
    }

    /// (conv1 w, conv1 b, conv2 w, conv2 b, d1 w, d1 b, d2 w, d2 b) offsets.
    fn offsets(&self) -> [usize; 9] {
        let sizes = [
            CNN_C1 * 9,
            CNN_C1,
            CNN_C2 * CNN_C1 * 9,
            CNN_C2,
            CNN_DENSE * self.flat(),
            CNN_DENSE,
            self.classes * CNN_DENSE,
            self.classes,
        ];
        let mut off = [0; 9];
        for i in 0..8 {
            off[i + 1] = off[i] + sizes[i];
        }
        off
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> CnnActivations {
        let o = self.offsets();
        let s = self.side;
        let mut c1 = conv3x3(x, 1, s, &params[o[0]..o[1]], &params[o[1]..o[2]], CNN_C1);
        relu(&mut c1);
        let (p1, p1_idx) = maxpool2(&c1, CNN_C1, s);
        let mut c2 = conv3x3(&p1, CNN_C1, s / 2, &params[o[2]..o[3]], &params[o[3]..o[4]], CNN_C2);
        relu(&mut c2);
        let (p2, p2_idx) = maxpool2(&c2, CNN_C2, s / 2);
        let d1_pre = dense(&params[o[4]..o[5]], &params[o[5]..o[6]], &p2, CNN_DENSE);
        let mut d1 = d1_pre.clone();
        relu(&mut d1);
        let logits = dense(&params[o[6]..o[7]], &params[o[7]..o[8]], &d1, self.classes);
        CnnActivations {
            c1,
            p1,
            p1_idx,
            c2,
            p2,
            p2_idx,
            d1_pre,
            d1,
            logits,
        }
    }

    fn backward(&self, params: &[f64], x: &[f64], label: usize, grad: &mut [f64], scale: f64) -> f64 {
        let o = self.offsets();
        let s = self.side;
        let act = self.forward(params, x);
        let (loss, d_logits) = softmax_cross_entropy(&act.logits, label);

        let mut d_d1 = vec![0.0; CNN_DENSE];
        {
            let (head, tail) = grad.split_at_mut(o[7]);
            dense_backward(&params[o[6]..o[7]], &act.d1, &d_logits, &mut head[o[6]..], &mut tail[..self.classes], Some(&mut d_d1), scale);
        }
        for (g, p) in d_d1.iter_mut().zip(&act.d1_pre) {
            if *p <= 0.0 {
                *g = 0.0;
            }
        }
        let mut d_p2 = vec![0.0; self.flat()];
        {
            let (head, tail) = grad.split_at_mut(o[5]);
            dense_backward(&params[o[4]..o[5]], &act.p2, &d_d1, &mut head[o[4]..], &mut tail[..CNN_DENSE], Some(&mut d_p2), scale);
        }
        let mut d_c2 = vec![0.0; act.c2.len()];
        for (i, &src) in act.p2_idx.iter().enumerate() {
            if act.c2[src] > 0.0 {
                d_c2[src] += d_p2[i];
            }
        }
        let mut d_p1 = vec![0.0; act.p1.len()];
        {
            let (head, tail) = grad.split_at_mut(o[3]);
            conv3x3_backward(&act.p1, CNN_C1, s / 2, &params[o[2]..o[3]], &d_c2, CNN_C2, &mut head[o[2]..], &mut tail[..CNN_C2], Some(&mut d_p1), scale);
        }
        let mut d_c1 = vec![0.0; act.c1.len()];
        for (i, &src) in act.p1_idx.iter().enumerate() {
            if act.c1[src] > 0.0 {
                d_c1[src] += d_p1[i];
            }
        }
        let (head, tail) = grad.split_at_mut(o[1]);
        conv3x3_backward(x, 1, s, &params[o[0]..o[1]], &d_c1, CNN_C1, head, &mut tail[..CNN_C1], None, scale);
        loss
    }
}

/// Same-padded 3x3 convolution, channel-major `C x side x side` tensors.
fn conv3x3(input: &[f64], c_in: usize, side: usize, w: &[f64], b: &[f64], c_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; c_out * side * side];
    for co in 0..c_out {
        let plane = &mut out[co * side * side..(co + 1) * side * side];
        plane.iter_mut().for_each(|v| *v = b[co]);
        for ci in 0..c_in {
            let src = &input[ci * side * side..(ci + 1) * side * side];
            let k = &w[(co * c_in + ci) * 9..(co * c_in + ci + 1) * 9];
            for r in 0..side {
                for c in 0..side {
                    let mut acc = 0.0;
                    for dr in 0..3 {
                        let rr = r as isize + dr as isize - 1;
                        if rr < 0 || rr >= side as isize {
                            continue;
                        }
                        for dc in 0..3 {
                            let cc = c as isize + dc as isize - 1;
                            if cc < 0 || cc >= side as isize {
                                continue;
                            }
                            acc += k[dr * 3 + dc] * src[rr as usize * side + cc as usize];
                        }
                    }
                    plane[r * side + c] += acc;
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    c_in: usize,
    side: usize,
    w: &[f64],
    d_out: &[f64],
    c_out: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    mut d_in: Option<&mut [f64]>,
    scale: f64,
) {
    for co in 0..c_out {
        let dplane = &d_out[co * side * side..(co + 1) * side * side];
        gb[co] += scale * dplane.iter().sum::<f64>();
        for ci in 0..c_in {
            let src = &input[ci * side * side..(ci + 1) * side * side];
            let widx = (co * c_in + ci) * 9;
            for r in 0..side {
                for c in 0..side {
                    let g = dplane[r * side + c];
                    if g == 0.0 {
                        continue;
                    }
                    for dr in 0..3 {
                        let rr = r as isize + dr as isize - 1;
                        if rr < 0 || rr >= side as isize {
                            continue;
                        }
                        for dc in 0..3 {
                            let cc = c as isize + dc as isize - 1;
                            if cc < 0 || cc >= side as isize {
                                continue;
                            }
                            let at = rr as usize * side + cc as usize;
                            gw[widx + dr * 3 + dc] += scale * g * src[at];
                            if let Some(d) = d_in.as_deref_mut() {
                                d[ci * side * side + at] += g * w[widx + dr * 3 + dc];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max-pool; returns pooled values and the flat source index of each maximum.
fn maxpool2(input: &[f64], channels: usize, side: usize) -> (Vec<f64>, Vec<usize>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(channels * half * half);
    let mut idx = Vec::with_capacity(channels * half * half);
    for ch in 0..channels {
        let base = ch * side * side;
        for r in 0..half {
            for c in 0..half {
                let mut best = base + 2 * r * side + 2 * c;
                for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
                    let at = base + (2 * r + dr) * side + 2 * c + dc;
                    if input[at] > input[best] {
                        best = at;
                    }
                }
                out.push(input[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}
