//! Independent float64 reference implementations used by gradient and
//! oracle checks. Everything here recomputes results from first principles
//! (naive loops, no shared kernels with the production path) so tests can
//! treat it as a second opinion.
//!
//! Compiled only for tests (`cfg(test)`) or under the `testutil` feature,
//! which downstream test suites enable; production builds never see it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{Layer, Network, Tensor};

/// Output of the reference forward pass: activations in f64 plus a hash of
/// the piecewise-linear "pattern" (ReLU signs, max-pool argmaxes). Finite
/// differences are only meaningful when both evaluations share a pattern.
pub struct RefForward {
    pub output: Vec<f64>,
    pub pattern: u64,
}

fn hash_mix(state: &mut u64, v: u64) {
    *state = state.wrapping_mul(0x100000001b3).wrapping_add(v) ^ (*state >> 29);
}

/// Naive f64 forward pass. `masks[i]` must be the dropout mask drawn by the
/// production pass being checked (or `None`). `override_param` perturbs one
/// flattened parameter coordinate (weights then bias, per parameterized
/// layer, in network order) by `delta` in the f64 domain.
pub fn forward_f64(
    net: &Network,
    input: &[f64],
    input_shape: &[usize],
    masks: &[Option<&[f32]>],
    override_param: Option<(usize, f64)>,
) -> RefForward {
    let mut params: Vec<f64> = Vec::new();
    for p in net.params() {
        params.extend(p.data().iter().map(|&v| v as f64));
    }
    if let Some((idx, delta)) = override_param {
        params[idx] += delta;
    }

    let mut cur = input.to_vec();
    let mut shape = input_shape.to_vec();
    let mut pattern = 0xcbf29ce484222325u64;
    let mut poff = 0usize; // cursor into the flattened parameter vector

    for (li, layer) in net.layers().iter().enumerate() {
        match layer {
            Layer::Conv3x3 { in_c, out_c, weight, bias } => {
                let (h, w) = (shape[1], shape[2]);
                let wlen = weight.numel();
                let blen = bias.numel();
                let wt = &params[poff..poff + wlen];
                let bs = &params[poff + wlen..poff + wlen + blen];
                poff += wlen + blen;
                let mut out = vec![0.0f64; out_c * h * w];
                for oc in 0..*out_c {
                    for y in 0..h as isize {
                        for x in 0..w as isize {
                            let mut acc = bs[oc];
                            for ic in 0..*in_c {
                                for ky in -1isize..=1 {
                                    for kx in -1isize..=1 {
                                        let (iy, ix) = (y + ky, x + kx);
                                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                            continue;
                                        }
                                        let wv = wt[((oc * in_c + ic) * 3 + (ky + 1) as usize) * 3
                                            + (kx + 1) as usize];
                                        acc += wv * cur[ic * h * w + iy as usize * w + ix as usize];
                                    }
                                }
                            }
                            out[oc * h * w + y as usize * w + x as usize] = acc;
                        }
                    }
                }
                cur = out;
                shape = vec![*out_c, h, w];
            }
            Layer::Relu => {
                for v in &mut cur {
                    hash_mix(&mut pattern, (*v > 0.0) as u64);
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            Layer::MaxPool2x2 => {
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let (oh, ow) = (h / 2, w / 2);
                let mut out = vec![0.0f64; c * oh * ow];
                for ch in 0..c {
                    for y in 0..oh {
                        for x in 0..ow {
                            let idx = [
                                ch * h * w + 2 * y * w + 2 * x,
                                ch * h * w + 2 * y * w + 2 * x + 1,
                                ch * h * w + (2 * y + 1) * w + 2 * x,
                                ch * h * w + (2 * y + 1) * w + 2 * x + 1,
                            ];
                            let mut best = idx[0];
                            for &i in &idx[1..] {
                                if cur[i] > cur[best] {
                                    best = i;
                                }
                            }
                            hash_mix(&mut pattern, best as u64);
                            out[ch * oh * ow + y * ow + x] = cur[best];
                        }
                    }
                }
                cur = out;
                shape = vec![c, oh, ow];
            }
            Layer::Dropout { .. } => {
                if let Some(mask) = masks[li] {
                    for (v, &k) in cur.iter_mut().zip(mask) {
                        *v *= k as f64;
                    }
                }
            }
            Layer::Flatten => {
                shape = vec![cur.len()];
            }
            Layer::Dense { in_dim, out_dim, weight, bias } => {
                let wlen = weight.numel();
                let blen = bias.numel();
                let wt = &params[poff..poff + wlen];
                let bs = &params[poff + wlen..poff + wlen + blen];
                poff += wlen + blen;
                let mut out = vec![0.0f64; *out_dim];
                for o in 0..*out_dim {
                    let mut acc = bs[o];
                    for i in 0..*in_dim {
                        acc += wt[o * in_dim + i] * cur[i];
                    }
                    out[o] = acc;
                }
                cur = out;
                shape = vec![*out_dim];
            }
            Layer::Softmax => {
                let max = cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = cur.iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                cur = exps.iter().map(|e| e / sum).collect();
            }
        }
    }
    RefForward {
        output: cur,
        pattern,
    }
}

/// Summary of a finite-difference sweep.
#[derive(Debug)]
pub struct FdReport {
    /// Coordinates whose analytic and central-difference gradients agreed
    /// within tolerance.
    pub checked: usize,
    /// Coordinates skipped because the perturbation straddled a ReLU or
    /// max-pool kink (finite differences are undefined there).
    pub skipped: usize,
    pub max_rel_err: f64,
    pub worst: Option<(String, f64, f64)>,
}

impl FdReport {
    pub fn ok(&self) -> bool {
        self.checked > 0 && self.worst.is_none()
    }
}

/// Checks every parameter gradient and every input-coordinate gradient of
/// `net` at `input` against central finite differences computed with the
/// f64 reference forward. The scalar loss is `<output, g_spec>` with a
/// seeded random `g_spec`, which exposes each layer's full Jacobian.
///
/// `training_nonce`: draw dropout masks as a training pass would (checks
/// the dropout backward); `None` checks the inference path.
pub fn fd_check_network(
    net: &Network,
    input: &Tensor,
    training_nonce: Option<u64>,
    seed: u64,
    h: f64,
    tol: f64,
) -> FdReport {
    let trace = match training_nonce {
        Some(n) => net.forward_train(input, n).expect("forward"),
        None => net.forward_trace(input).expect("forward"),
    };
    let masks: Vec<Option<&[f32]>> = (0..net.layers().len()).map(|i| trace.dropout_mask(i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_n = trace.output().numel();
    let g_spec: Vec<f32> = (0..out_n).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
    let g_tensor = Tensor::from_vec(trace.output().shape(), g_spec.clone());
    let grads = net.backward(&trace, &g_tensor).expect("backward");

    let input_f64: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();
    let loss = |override_param: Option<(usize, f64)>, input_override: Option<(usize, f64)>| {
        let mut inp = input_f64.clone();
        if let Some((i, d)) = input_override {
            inp[i] += d;
        }
        let rf = forward_f64(net, &inp, input.shape(), &masks, override_param);
        let l: f64 = rf
            .output
            .iter()
            .zip(&g_spec)
            .map(|(&o, &g)| o * g as f64)
            .sum();
        (l, rf.pattern)
    };

    let mut report = FdReport {
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst: None,
    };
    let check = |label: String, analytic: f64, plus: (f64, u64), minus: (f64, u64), report: &mut FdReport| {
        if plus.1 != minus.1 {
            report.skipped += 1;
            return;
        }
        let fd = (plus.0 - minus.0) / (2.0 * h);
        let err = (analytic - fd).abs();
        let denom = analytic.abs().max(fd.abs());
        let rel = if denom > 1e-7 { err / denom } else { 0.0 };
        report.checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
        }
        if err > tol * denom + 1e-7 && report.worst.is_none() {
            report.worst = Some((label, analytic, fd));
        }
    };

    let analytic_params: Vec<f64> = grads
        .flat()
        .iter()
        .flat_map(|t| t.data().iter().map(|&v| v as f64).collect::<Vec<_>>())
        .collect();
    for pi in 0..analytic_params.len() {
        let plus = loss(Some((pi, h)), None);
        let minus = loss(Some((pi, -h)), None);
        check(format!("param[{pi}]"), analytic_params[pi], plus, minus, &mut report);
    }

    for ii in 0..input.numel() {
        let plus = loss(None, Some((ii, h)));
        let minus = loss(None, Some((ii, -h)));
        check(
            format!("input[{ii}]"),
            grads.input.data()[ii] as f64,
            plus,
            minus,
            &mut report,
        );
    }
    report
}

/// Random tensor with entries in `lo..hi`, seeded.
pub fn random_tensor(shape: &[usize], lo: f32, hi: f32, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect())
}
