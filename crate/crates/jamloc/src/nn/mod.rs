//! Minimal reverse-mode neural network layers on f64 `ndarray` tensors.
//!
//! Activations are `[batch, channels, length]` for convolutional layers and
//! `[batch, features]` for dense layers. Every layer caches what it needs in
//! `forward` and accumulates parameter gradients in `backward`; `zero_grad`
//! resets them. Everything is single-threaded and bit-deterministic.

pub mod optim;

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One named parameter tensor exposed for optimizers / serialization.
pub struct ParamRef<'a> {
    pub name: String,
    pub w: &'a mut [f64],
    pub g: &'a mut [f64],
}

/// Anything holding trainable parameters.
pub trait Params {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>));

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |p| p.g.iter_mut().for_each(|v| *v = 0.0));
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params("", &mut |p| n += p.w.len());
        n
    }
}

fn uniform_init(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Conv output length for the given geometry.
pub fn conv_out_len(l: usize, k: usize, stride: usize, pad: usize) -> usize {
    (l + 2 * pad - k) / stride + 1
}

/// Transposed-conv output length for the given geometry.
pub fn conv_transpose_out_len(
    l: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> usize {
    (l - 1) * stride + k + out_pad - 2 * pad
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

/// 1-D convolution. Supports `groups == 1` (dense) and `groups == in_c == out_c`
/// (depthwise); nothing in this codebase needs other group counts.
#[derive(Clone, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub groups: usize,
    pub w: Array3<f64>, // [out_c, in_c/groups, k]
    pub b: Array1<f64>,
    #[serde(skip)]
    pub gw: Array3<f64>,
    #[serde(skip)]
    pub gb: Array1<f64>,
    #[serde(skip)]
    cache_x: Option<Array3<f64>>,
}

impl Conv1d {
    pub fn new(
        rng: &mut ChaCha8Rng,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        groups: usize,
    ) -> Self {
        assert!(groups == 1 || (groups == in_c && out_c == in_c));
        let cpg = in_c / groups;
        let fan_in = cpg * k;
        let w = Array3::from_shape_vec(
            (out_c, cpg, k),
            uniform_init(rng, out_c * cpg * k, fan_in),
        )
        .unwrap();
        let b = Array1::from_vec(uniform_init(rng, out_c, fan_in));
        Self {
            in_c,
            out_c,
            k,
            stride,
            pad,
            groups,
            gw: Array3::zeros(w.raw_dim()),
            gb: Array1::zeros(out_c),
            w,
            b,
            cache_x: None,
        }
    }

    pub fn depthwise(rng: &mut ChaCha8Rng, c: usize, k: usize, pad: usize) -> Self {
        Self::new(rng, c, c, k, 1, pad, c)
    }

    fn im2col(&self, x: &Array3<f64>) -> Array2<f64> {
        let (bsz, in_c, l) = x.dim();
        let lo = conv_out_len(l, self.k, self.stride, self.pad);
        let mut cols = Array2::<f64>::zeros((in_c * self.k, bsz * lo));
        for b in 0..bsz {
            for c in 0..in_c {
                for kk in 0..self.k {
                    let row = c * self.k + kk;
                    for o in 0..lo {
                        let ii = o * self.stride + kk;
                        if ii >= self.pad && ii - self.pad < l {
                            cols[[row, b * lo + o]] = x[[b, c, ii - self.pad]];
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let (bsz, in_c, l) = x.dim();
        assert_eq!(in_c, self.in_c, "conv1d input channel mismatch");
        let lo = conv_out_len(l, self.k, self.stride, self.pad);
        let mut y = Array3::<f64>::zeros((bsz, self.out_c, lo));
        if self.groups == 1 {
            let cols = self.im2col(x);
            let w2 = self
                .w
                .view()
                .into_shape_with_order((self.out_c, self.in_c * self.k))
                .unwrap()
                .to_owned();
            let y2 = w2.dot(&cols); // [out_c, B*lo]
            for b in 0..bsz {
                for oc in 0..self.out_c {
                    for o in 0..lo {
                        y[[b, oc, o]] = y2[[oc, b * lo + o]] + self.b[oc];
                    }
                }
            }
        } else {
            // depthwise
            for b in 0..bsz {
                for c in 0..self.in_c {
                    for o in 0..lo {
                        let mut acc = self.b[c];
                        for kk in 0..self.k {
                            let ii = o * self.stride + kk;
                            if ii >= self.pad && ii - self.pad < l {
                                acc += self.w[[c, 0, kk]] * x[[b, c, ii - self.pad]];
                            }
                        }
                        y[[b, c, o]] = acc;
                    }
                }
            }
        }
        self.cache_x = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let x = self.cache_x.take().expect("conv1d backward before forward");
        let (bsz, _, l) = x.dim();
        let lo = dy.dim().2;
        let mut dx = Array3::<f64>::zeros(x.raw_dim());
        if self.groups == 1 {
            let cols = self.im2col(&x);
            let mut dy2 = Array2::<f64>::zeros((self.out_c, bsz * lo));
            for b in 0..bsz {
                for oc in 0..self.out_c {
                    for o in 0..lo {
                        dy2[[oc, b * lo + o]] = dy[[b, oc, o]];
                    }
                }
            }
            let gw2 = dy2.dot(&cols.t()); // [out_c, in_c*k]
            let gw3 = gw2
                .into_shape_with_order((self.out_c, self.in_c, self.k))
                .unwrap();
            self.gw += &gw3;
            self.gb += &dy2.sum_axis(Axis(1));
            let w2 = self
                .w
                .view()
                .into_shape_with_order((self.out_c, self.in_c * self.k))
                .unwrap()
                .to_owned();
            let dcols = w2.t().dot(&dy2); // [in_c*k, B*lo]
            for b in 0..bsz {
                for c in 0..self.in_c {
                    for kk in 0..self.k {
                        let row = c * self.k + kk;
                        for o in 0..lo {
                            let ii = o * self.stride + kk;
                            if ii >= self.pad && ii - self.pad < l {
                                dx[[b, c, ii - self.pad]] += dcols[[row, b * lo + o]];
                            }
                        }
                    }
                }
            }
        } else {
            for b in 0..bsz {
                for c in 0..self.in_c {
                    for o in 0..lo {
                        let d = dy[[b, c, o]];
                        self.gb[c] += d;
                        for kk in 0..self.k {
                            let ii = o * self.stride + kk;
                            if ii >= self.pad && ii - self.pad < l {
                                self.gw[[c, 0, kk]] += d * x[[b, c, ii - self.pad]];
                                dx[[b, c, ii - self.pad]] += d * self.w[[c, 0, kk]];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl Params for Conv1d {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        f(ParamRef {
            name: format!("{prefix}.w"),
            w: self.w.as_slice_mut().unwrap(),
            g: self.gw.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: format!("{prefix}.b"),
            w: self.b.as_slice_mut().unwrap(),
            g: self.gb.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// ConvTranspose1d
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct ConvTranspose1d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_pad: usize,
    pub w: Array3<f64>, // [in_c, out_c, k]
    pub b: Array1<f64>,
    #[serde(skip)]
    pub gw: Array3<f64>,
    #[serde(skip)]
    pub gb: Array1<f64>,
    #[serde(skip)]
    cache_x: Option<Array3<f64>>,
}

impl ConvTranspose1d {
    pub fn new(
        rng: &mut ChaCha8Rng,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Self {
        let fan_in = in_c * k;
        let w = Array3::from_shape_vec(
            (in_c, out_c, k),
            uniform_init(rng, in_c * out_c * k, fan_in),
        )
        .unwrap();
        let b = Array1::from_vec(uniform_init(rng, out_c, fan_in));
        Self {
            in_c,
            out_c,
            k,
            stride,
            pad,
            out_pad,
            gw: Array3::zeros(w.raw_dim()),
            gb: Array1::zeros(out_c),
            w,
            b,
            cache_x: None,
        }
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let (bsz, in_c, l) = x.dim();
        assert_eq!(in_c, self.in_c, "conv_transpose1d input channel mismatch");
        let lo = conv_transpose_out_len(l, self.k, self.stride, self.pad, self.out_pad);
        let mut y = Array3::<f64>::zeros((bsz, self.out_c, lo));
        // Flatten batch into columns so each kernel offset is one matmul.
        let mut x2 = Array2::<f64>::zeros((self.in_c, bsz * l));
        for b in 0..bsz {
            for c in 0..self.in_c {
                for i in 0..l {
                    x2[[c, b * l + i]] = x[[b, c, i]];
                }
            }
        }
        for kk in 0..self.k {
            let wk = self.w.index_axis(Axis(2), kk).to_owned(); // [in_c, out_c]
            let yk = wk.t().dot(&x2); // [out_c, B*l]
            for b in 0..bsz {
                for i in 0..l {
                    let t = (i * self.stride + kk) as isize - self.pad as isize;
                    if t >= 0 && (t as usize) < lo {
                        for oc in 0..self.out_c {
                            y[[b, oc, t as usize]] += yk[[oc, b * l + i]];
                        }
                    }
                }
            }
        }
        for b in 0..bsz {
            for oc in 0..self.out_c {
                for t in 0..lo {
                    y[[b, oc, t]] += self.b[oc];
                }
            }
        }
        self.cache_x = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let x = self
            .cache_x
            .take()
            .expect("conv_transpose1d backward before forward");
        let (bsz, _, l) = x.dim();
        let lo = dy.dim().2;
        let mut dx = Array3::<f64>::zeros(x.raw_dim());
        let mut x2 = Array2::<f64>::zeros((self.in_c, bsz * l));
        for b in 0..bsz {
            for c in 0..self.in_c {
                for i in 0..l {
                    x2[[c, b * l + i]] = x[[b, c, i]];
                }
            }
        }
        for kk in 0..self.k {
            // Gather the upstream gradient each (b, i) scatters into.
            let mut dyk = Array2::<f64>::zeros((self.out_c, bsz * l));
            for b in 0..bsz {
                for i in 0..l {
                    let t = (i * self.stride + kk) as isize - self.pad as isize;
                    if t >= 0 && (t as usize) < lo {
                        for oc in 0..self.out_c {
                            dyk[[oc, b * l + i]] = dy[[b, oc, t as usize]];
                        }
                    }
                }
            }
            let wk = self.w.index_axis(Axis(2), kk).to_owned(); // [in_c, out_c]
            let dxk = wk.dot(&dyk); // [in_c, B*l]
            for b in 0..bsz {
                for c in 0..self.in_c {
                    for i in 0..l {
                        dx[[b, c, i]] += dxk[[c, b * l + i]];
                    }
                }
            }
            let gwk = x2.dot(&dyk.t()); // [in_c, out_c]
            for c in 0..self.in_c {
                for oc in 0..self.out_c {
                    self.gw[[c, oc, kk]] += gwk[[c, oc]];
                }
            }
        }
        for b in 0..bsz {
            for oc in 0..self.out_c {
                for t in 0..lo {
                    self.gb[oc] += dy[[b, oc, t]];
                }
            }
        }
        dx
    }
}

impl Params for ConvTranspose1d {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        f(ParamRef {
            name: format!("{prefix}.w"),
            w: self.w.as_slice_mut().unwrap(),
            g: self.gw.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: format!("{prefix}.b"),
            w: self.b.as_slice_mut().unwrap(),
            g: self.gb.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// LayerNorm (over the channel axis, per position — ConvNeXt convention)
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct LayerNorm {
    pub c: usize,
    pub eps: f64,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    #[serde(skip)]
    pub ggamma: Array1<f64>,
    #[serde(skip)]
    pub gbeta: Array1<f64>,
    #[serde(skip)]
    cache: Option<(Array3<f64>, Array2<f64>)>, // (xhat, inv_std[b,l])
}

impl LayerNorm {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            eps: 1e-6,
            gamma: Array1::ones(c),
            beta: Array1::zeros(c),
            ggamma: Array1::zeros(c),
            gbeta: Array1::zeros(c),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let (bsz, c, l) = x.dim();
        assert_eq!(c, self.c);
        let mut xhat = Array3::<f64>::zeros((bsz, c, l));
        let mut inv_std = Array2::<f64>::zeros((bsz, l));
        let mut y = Array3::<f64>::zeros((bsz, c, l));
        for b in 0..bsz {
            for pos in 0..l {
                let mut mean = 0.0;
                for ch in 0..c {
                    mean += x[[b, ch, pos]];
                }
                mean /= c as f64;
                let mut var = 0.0;
                for ch in 0..c {
                    let d = x[[b, ch, pos]] - mean;
                    var += d * d;
                }
                var /= c as f64;
                let istd = 1.0 / (var + self.eps).sqrt();
                inv_std[[b, pos]] = istd;
                for ch in 0..c {
                    let xh = (x[[b, ch, pos]] - mean) * istd;
                    xhat[[b, ch, pos]] = xh;
                    y[[b, ch, pos]] = self.gamma[ch] * xh + self.beta[ch];
                }
            }
        }
        self.cache = Some((xhat, inv_std));
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let (xhat, inv_std) = self.cache.take().expect("layernorm backward before forward");
        let (bsz, c, l) = dy.dim();
        let mut dx = Array3::<f64>::zeros((bsz, c, l));
        for b in 0..bsz {
            for pos in 0..l {
                let mut sum_dxhat = 0.0;
                let mut sum_dxhat_xhat = 0.0;
                for ch in 0..c {
                    let d = dy[[b, ch, pos]];
                    self.ggamma[ch] += d * xhat[[b, ch, pos]];
                    self.gbeta[ch] += d;
                    let dxh = d * self.gamma[ch];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat[[b, ch, pos]];
                }
                let n = c as f64;
                let istd = inv_std[[b, pos]];
                for ch in 0..c {
                    let dxh = dy[[b, ch, pos]] * self.gamma[ch];
                    dx[[b, ch, pos]] = istd
                        * (dxh - sum_dxhat / n - xhat[[b, ch, pos]] * sum_dxhat_xhat / n);
                }
            }
        }
        dx
    }
}

impl Params for LayerNorm {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        f(ParamRef {
            name: format!("{prefix}.gamma"),
            w: self.gamma.as_slice_mut().unwrap(),
            g: self.ggamma.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: format!("{prefix}.beta"),
            w: self.beta.as_slice_mut().unwrap(),
            g: self.gbeta.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct Linear {
    pub in_d: usize,
    pub out_d: usize,
    pub w: Array2<f64>, // [out_d, in_d]
    pub b: Array1<f64>,
    #[serde(skip)]
    pub gw: Array2<f64>,
    #[serde(skip)]
    pub gb: Array1<f64>,
    #[serde(skip)]
    cache_x: Option<Array2<f64>>,
}

impl Linear {
    pub fn new(rng: &mut ChaCha8Rng, in_d: usize, out_d: usize) -> Self {
        let w = Array2::from_shape_vec((out_d, in_d), uniform_init(rng, out_d * in_d, in_d))
            .unwrap();
        let b = Array1::from_vec(uniform_init(rng, out_d, in_d));
        Self {
            in_d,
            out_d,
            gw: Array2::zeros(w.raw_dim()),
            gb: Array1::zeros(out_d),
            w,
            b,
            cache_x: None,
        }
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.dim().1, self.in_d, "linear input dim mismatch");
        let y = x.dot(&self.w.t()) + &self.b;
        self.cache_x = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let x = self.cache_x.take().expect("linear backward before forward");
        self.gw += &dy.t().dot(&x);
        self.gb += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }
}

impl Params for Linear {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        f(ParamRef {
            name: format!("{prefix}.w"),
            w: self.w.as_slice_mut().unwrap(),
            g: self.gw.as_slice_mut().unwrap(),
        });
        f(ParamRef {
            name: format!("{prefix}.b"),
            w: self.b.as_slice_mut().unwrap(),
            g: self.gb.as_slice_mut().unwrap(),
        });
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

const GELU_C: f64 = 0.797884560802865; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad_scalar(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// GELU (tanh form) over a 3-D tensor.
#[derive(Clone, Default, Serialize, Deserialize)]
pub struct Gelu {
    #[serde(skip)]
    cache_x: Option<Array3<f64>>,
}

impl Gelu {
    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        self.cache_x = Some(x.clone());
        x.mapv(gelu_scalar)
    }
    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let x = self.cache_x.take().expect("gelu backward before forward");
        let mut dx = x.mapv(gelu_grad_scalar);
        dx *= dy;
        dx
    }
}

/// ReLU over a 2-D tensor.
#[derive(Clone, Default, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    cache_x: Option<Array2<f64>>,
}

impl Relu {
    pub fn forward(&mut self, x: &Array2<f64>) -> Array2<f64> {
        self.cache_x = Some(x.clone());
        x.mapv(|v| v.max(0.0))
    }
    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let x = self.cache_x.take().expect("relu backward before forward");
        let mut dx = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        dx *= dy;
        dx
    }
}

/// Sigmoid over a 2-D tensor.
#[derive(Clone, Default, Serialize, Deserialize)]
pub struct Sigmoid {
    #[serde(skip)]
    cache_y: Option<Array2<f64>>,
}

impl Sigmoid {
    pub fn forward(&mut self, x: &Array2<f64>) -> Array2<f64> {
        let y = x.mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.cache_y = Some(y.clone());
        y
    }
    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let y = self.cache_y.take().expect("sigmoid backward before forward");
        let mut dx = y.mapv(|v| v * (1.0 - v));
        dx *= dy;
        dx
    }
}

// ---------------------------------------------------------------------------
// Gradient reversal
// ---------------------------------------------------------------------------

/// Identity in the forward pass; multiplies the upstream gradient by `-lambda`
/// in the backward pass.
#[derive(Clone, Serialize, Deserialize)]
pub struct Grl {
    lambda: f64,
}

impl Grl {
    pub fn new(lambda: f64) -> Self {
        assert!(lambda >= 0.0, "GRL lambda must be non-negative");
        Self { lambda }
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn set_lambda(&mut self, lambda: f64) {
        assert!(lambda >= 0.0, "GRL lambda must be non-negative");
        self.lambda = lambda;
    }
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.clone()
    }
    pub fn backward(&self, dy: &Array2<f64>) -> Array2<f64> {
        dy.mapv(|v| -self.lambda * v)
    }
}

// ---------------------------------------------------------------------------
// Pooling and noise
// ---------------------------------------------------------------------------

/// Global average pool over the length axis: `[B, C, L] -> [B, C]`.
pub fn mean_pool(x: &Array3<f64>) -> Array2<f64> {
    x.mean_axis(Axis(2)).unwrap()
}

/// Backward of `mean_pool`: broadcast `dy / L` over the length axis.
pub fn mean_pool_backward(dy: &Array2<f64>, l: usize) -> Array3<f64> {
    let (bsz, c) = dy.dim();
    let mut dx = Array3::<f64>::zeros((bsz, c, l));
    let scale = 1.0 / l as f64;
    for b in 0..bsz {
        for ch in 0..c {
            let v = dy[[b, ch]] * scale;
            for pos in 0..l {
                dx[[b, ch, pos]] = v;
            }
        }
    }
    dx
}

/// Additive i.i.d. Gaussian noise, used for denoising-autoencoder training.
pub fn add_gaussian_noise(x: &Array3<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> Array3<f64> {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, sigma).unwrap();
    x.mapv(|v| v + normal.sample(rng))
}
