//! Fully-connected value network with LeakyReLU hidden layers, trained on
//! mean squared error with Adam.
//!
//! Batched evaluation goes through one matrix-product routine, and a single
//! input is evaluated as a batch of one, so per-row outputs do not depend on
//! the batch they were computed in.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RLDS";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Affine layer `y = W x + b`; `weights` is `rows × cols` row-major
/// (rows = outputs, cols = inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn same_shape(&self, o: &Layer) -> bool {
        self.rows == o.rows && self.cols == o.cols
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.bias)
    }
}

/// `out[m×n] = a[m×k] · w[n×k]ᵀ + bias` (row-major throughout).
fn affine(a: &[f64], m: usize, layer: &Layer, out: &mut [f64]) {
    let (k, n) = (layer.cols, layer.rows);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(out.len(), m * n);
    for row in out.chunks_exact_mut(n) {
        row.copy_from_slice(&layer.bias);
    }
    // SAFETY: slice lengths checked above; strides describe row-major a and
    // the transposed view of w.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            layer.weights.as_ptr(),
            1,
            k as isize,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Scratch buffers reused across batched calls.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(Layer::params)
            .fold(0.0, |a, &b| a.max(b.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    negative_slope: f64,
}

impl Mlp {
    /// Weights i.i.d. `N(0, init_std²)`, biases zero.
    pub fn new(dims: &[usize], negative_slope: f64, init_std: f64, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(dims, negative_slope)?;
        let normal = Normal::new(0.0, init_std)
            .map_err(|e| Error::config("network.init_std", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut mlp.layers {
            for w in &mut layer.weights {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(dims: &[usize], negative_slope: f64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid layer dims {dims:?}")));
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::ShapeMismatch("the output layer must be scalar".into()));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[1], w[0])).collect(),
            negative_slope,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, negative_slope: f64) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::ShapeMismatch(format!("layer {i} buffers do not match its shape")));
            }
        }
        if layers.windows(2).any(|w| w[0].rows != w[1].cols) {
            return Err(Error::ShapeMismatch("consecutive layers do not chain".into()));
        }
        match layers.last() {
            Some(l) if l.rows == 1 => Ok(Self {
                layers,
                negative_slope,
            }),
            _ => Err(Error::ShapeMismatch("the output layer must be scalar".into())),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn negative_slope(&self) -> f64 {
        self.negative_slope
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].cols)
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.rows * l.cols + l.rows).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let mut out = [0.0];
        self.forward_batch(x, &mut out, &mut Workspace::default())?;
        Ok(out[0])
    }

    /// Evaluates `out.len()` row-major inputs stacked in `xs`.
    pub fn forward_batch(&self, xs: &[f64], out: &mut [f64], ws: &mut Workspace) -> Result<()> {
        let m = out.len();
        self.check_batch(xs, m)?;
        self.run_forward(xs, m, ws);
        out.copy_from_slice(&ws.act[self.layers.len() - 1]);
        Ok(())
    }

    fn check_batch(&self, xs: &[f64], m: usize) -> Result<()> {
        let k = self.input_dim();
        if m == 0 || xs.len() != m * k {
            return Err(Error::InputLength {
                expected: m.max(1) * k,
                actual: xs.len(),
            });
        }
        Ok(())
    }

    /// Fills `ws.pre[l]` (pre-activations) and `ws.act[l]` (layer outputs).
    fn run_forward(&self, xs: &[f64], m: usize, ws: &mut Workspace) {
        let n_layers = self.layers.len();
        ws.pre.resize_with(n_layers, Vec::new);
        ws.act.resize_with(n_layers, Vec::new);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.act.split_at_mut(l);
            let input: &[f64] = if l == 0 { xs } else { &done[l - 1] };
            let pre = &mut ws.pre[l];
            pre.resize(m * layer.rows, 0.0);
            affine(input, m, layer, pre);
            let act = &mut rest[0];
            act.clear();
            if l + 1 == n_layers {
                act.extend_from_slice(pre);
            } else {
                act.extend(pre.iter().map(|&z| leaky_relu(z, self.negative_slope)));
            }
        }
    }

    /// Mean squared error `(1/B) Σ (f(xᵢ) − yᵢ)²` and its gradient with
    /// respect to every weight and bias.
    pub fn backward(&self, xs: &[f64], ys: &[f64], ws: &mut Workspace) -> Result<(f64, Gradients)> {
        let m = ys.len();
        self.check_batch(xs, m)?;
        self.run_forward(xs, m, ws);
        let n_layers = self.layers.len();
        let preds = &ws.act[n_layers - 1];
        let scale = 2.0 / m as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = preds
            .iter()
            .zip(ys)
            .map(|(&p, &y)| {
                let e = p - y;
                loss += e * e;
                scale * e
            })
            .collect();
        loss /= m as f64;

        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (n, k) = (layer.rows, layer.cols);
            let input: &[f64] = if l == 0 { xs } else { &ws.act[l - 1] };
            let g = &mut grads[l];
            // dW = deltaᵀ · input
            // SAFETY: delta is m×n, input is m×k, g.weights is n×k.
            unsafe {
                matrixmultiply::dgemm(
                    n,
                    m,
                    k,
                    1.0,
                    delta.as_ptr(),
                    1,
                    n as isize,
                    input.as_ptr(),
                    k as isize,
                    1,
                    0.0,
                    g.weights.as_mut_ptr(),
                    k as isize,
                    1,
                );
            }
            for row in delta.chunks_exact(n) {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if l == 0 {
                break;
            }
            // delta_prev = (delta · W) ⊙ leaky'(pre_prev)
            let mut prev = vec![0.0; m * k];
            // SAFETY: delta is m×n, weights n×k, prev m×k.
            unsafe {
                matrixmultiply::dgemm(
                    m,
                    n,
                    k,
                    1.0,
                    delta.as_ptr(),
                    n as isize,
                    1,
                    layer.weights.as_ptr(),
                    k as isize,
                    1,
                    0.0,
                    prev.as_mut_ptr(),
                    k as isize,
                    1,
                );
            }
            for (p, &z) in prev.iter_mut().zip(&ws.pre[l - 1]) {
                if z <= 0.0 {
                    *p *= self.negative_slope;
                }
            }
            delta = prev;
        }
        Ok((loss, Gradients { layers: grads }))
    }

    /// Writes the checkpoint format: magic, version, layer count, per-layer
    /// `(rows, cols)`, then per layer weights (row-major) and biases, all
    /// little-endian. Adam moments and step counter follow when given.
    pub fn save(&self, adam: Option<&Adam>, mut w: impl Write) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.rows as u32).to_le_bytes())?;
            w.write_all(&(l.cols as u32).to_le_bytes())?;
        }
        write_layers(&mut w, &self.layers)?;
        if let Some(a) = adam {
            write_layers(&mut w, &a.m)?;
            write_layers(&mut w, &a.v)?;
            w.write_all(&a.t.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a checkpoint. Adam moments are returned when present; the
    /// optimizer hyperparameters come from `adam_params`.
    pub fn load(mut r: impl Read, negative_slope: f64, adam_params: AdamParams) -> Result<(Self, Option<Adam>)> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = cur.u32()? as usize;
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            shapes.push((cur.u32()? as usize, cur.u32()? as usize));
        }
        let layers = read_layers(&mut cur, &shapes)?;
        let mlp = Self::from_layers(layers, negative_slope)?;
        let adam = if cur.remaining() == 0 {
            None
        } else {
            let m = read_layers(&mut cur, &shapes)?;
            let v = read_layers(&mut cur, &shapes)?;
            let t = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
            Some(Adam {
                params: adam_params,
                t,
                m,
                v,
            })
        };
        if cur.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", cur.remaining())));
        }
        Ok((mlp, adam))
    }
}

fn write_layers(w: &mut impl Write, layers: &[Layer]) -> Result<()> {
    for l in layers {
        for x in l.weights.iter().chain(&l.bias) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn read_layers(cur: &mut Cursor, shapes: &[(usize, usize)]) -> Result<Vec<Layer>> {
    shapes
        .iter()
        .map(|&(rows, cols)| {
            Ok(Layer {
                rows,
                cols,
                weights: cur.f64s(rows * cols)?,
                bias: cur.f64s(rows)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("adam.lr", "must be positive"));
        }
        for (name, b) in [("adam.beta1", self.beta1), ("adam.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(name, "must be in [0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam.epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// Bias-corrected Adam with moments shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub params: AdamParams,
    pub t: u64,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    pub fn new(mlp: &Mlp, params: AdamParams) -> Self {
        let zeros = || mlp.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect();
        Self {
            params,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<()> {
        let shapes_ok = grads.layers.len() == mlp.layers.len()
            && self.m.len() == mlp.layers.len()
            && grads.layers.iter().zip(&mlp.layers).all(|(g, l)| g.same_shape(l))
            && self.m.iter().zip(&mlp.layers).all(|(g, l)| g.same_shape(l));
        if !shapes_ok {
            return Err(Error::ShapeMismatch("gradients do not match the network".into()));
        }
        self.t += 1;
        let AdamParams {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((layer, g), m), v) in mlp
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in layer
                .params_mut()
                .zip(g.params())
                .zip(m.params_mut())
                .zip(v.params_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
