//! Fully connected dueling Q-network with per-agent heads, written out by hand
//! (forward, backward and parameter access) on top of nalgebra matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// One affine layer `z = W x + b`, `W` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: DMatrix::zeros(output, input),
            bias: DVector::zeros(output),
        }
    }

    fn uniform<R: Rng + ?Sized>(input: usize, output: usize, bound: f64, rng: &mut R) -> Self {
        Self {
            weights: DMatrix::from_fn(output, input, |_, _| rng.random_range(-bound..=bound)),
            bias: DVector::zeros(output),
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Q-values of all agents: `m` rows of `m + 1` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct QValues {
    m: usize,
    values: Vec<f64>,
}

impl QValues {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * (m + 1) {
            return Err(Error::InvalidArgument(format!("expected {} q-values, got {}", m * (m + 1), values.len())));
        }
        Ok(Self { m, values })
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    /// Flat layout: agent `i` (0-based) owns indices `i*(m+1) .. (i+1)*(m+1)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.values[agent * (self.m + 1)..(agent + 1) * (self.m + 1)]
    }

    pub fn get(&self, agent: usize, action: usize) -> f64 {
        self.row(agent)[action]
    }

    /// Greedy action of an agent; ties go to the smallest action.
    pub fn argmax(&self, agent: usize) -> usize {
        argmax(self.row(agent))
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Intermediate values of a batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs; `activations[0]` is the network input.
    activations: Vec<DMatrix<f64>>,
    pub(crate) q: DMatrix<f64>,
}

impl ForwardCache {
    /// Q-values, one column per sample, `m * (m + 1)` rows.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    m: usize,
    trunk: Vec<Dense>,
    head: Dense,
}

impl QNetwork {
    /// Output width of the raw head: per agent one value plus `m + 1` advantages.
    pub fn head_width(m: usize) -> usize {
        m * (m + 2)
    }

    /// He-uniform trunk initialisation and a small head.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], m: usize, rng: &mut R) -> Result<Self> {
        if m < 2 || input == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfiguration(format!("bad network shape: input {input}, hidden {hidden:?}, m {m}")));
        }
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = input;
        for &h in hidden {
            trunk.push(Dense::uniform(width, h, (6.0 / width as f64).sqrt(), rng));
            width = h;
        }
        let head = Dense::uniform(width, Self::head_width(m), 0.1 * (3.0 / width as f64).sqrt(), rng);
        Ok(Self { m, trunk, head })
    }

    /// Same shape, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            m: self.m,
            trunk: self.trunk.iter().map(|l| Dense::zeros(l.input_dim(), l.output_dim())).collect(),
            head: Dense::zeros(self.head.input_dim(), self.head.output_dim()),
        }
    }

    pub fn from_layers(m: usize, trunk: Vec<Dense>, head: Dense) -> Result<Self> {
        let mut width = trunk.first().map_or(head.input_dim(), Dense::input_dim);
        for l in trunk.iter().chain(std::iter::once(&head)) {
            if l.input_dim() != width || l.bias.len() != l.output_dim() {
                return Err(Error::InvalidArgument("layer shapes do not chain".into()));
            }
            width = l.output_dim();
        }
        if head.output_dim() != Self::head_width(m) {
            return Err(Error::InvalidArgument("head width does not match m".into()));
        }
        Ok(Self { m, trunk, head })
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.first().map_or(self.head.input_dim(), Dense::input_dim)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.trunk.iter().map(Dense::output_dim).collect()
    }

    pub fn trunk(&self) -> &[Dense] {
        &self.trunk
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    pub fn output_dim(&self) -> usize {
        self.m * (self.m + 1)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.trunk.iter().chain(std::iter::once(&self.head))
    }

    /// Parameter arrays in declaration order: each layer's weights (nalgebra
    /// column-major storage of the `out x in` matrix) followed by its bias.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.trunk
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Q-values for one observation.
    pub fn forward(&self, x: &[f64]) -> Result<QValues> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidArgument(format!("input has {} values, network expects {}", x.len(), self.input_dim())));
        }
        let cache = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x));
        QValues::new(self.m, cache.q.column(0).iter().copied().collect())
    }

    /// Batched forward pass; `x` holds one sample per column.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.trunk.len() + 1);
        let mut a = x.clone();
        for layer in &self.trunk {
            let z = layer.apply(&a).map(|v| v.max(0.0));
            activations.push(a);
            a = z;
        }
        let raw = self.head.apply(&a);
        activations.push(a);
        ForwardCache {
            q: dueling_combine(&raw, self.m),
            activations,
        }
    }

    /// Parameter gradients given `dq = dLoss/dQ` for a batch cached by `forward_batch`.
    pub fn backward(&self, cache: &ForwardCache, dq: &DMatrix<f64>) -> QNetwork {
        let m = self.m;
        let batch = dq.ncols();
        let mut draw = DMatrix::zeros(Self::head_width(m), batch);
        let inv = 1.0 / (m + 1) as f64;
        for b in 0..batch {
            for i in 0..m {
                let slice: Vec<f64> = (0..=m).map(|j| dq[(i * (m + 1) + j, b)]).collect();
                let total: f64 = slice.iter().sum();
                let base = i * (m + 2);
                draw[(base, b)] = total;
                for (j, g) in slice.iter().enumerate() {
                    draw[(base + 1 + j, b)] = g - total * inv;
                }
            }
        }
        let mut grads = self.zeros_like();
        let head_in = cache.activations.last().expect("head input");
        grads.head.weights = &draw * head_in.transpose();
        grads.head.bias = row_sums(&draw);
        let mut delta = self.head.weights.transpose() * &draw;
        for k in (0..self.trunk.len()).rev() {
            // Output of trunk layer k is the input of layer k+1.
            let out = &cache.activations[k + 1];
            delta.zip_apply(out, |d, a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            grads.trunk[k].weights = &delta * cache.activations[k].transpose();
            grads.trunk[k].bias = row_sums(&delta);
            if k > 0 {
                delta = self.trunk[k].weights.transpose() * &delta;
            }
        }
        grads
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// `Q[i][j] = V_i + A_i[j] - mean_j A_i[j]` for every column of raw head output.
fn dueling_combine(raw: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(m * (m + 1), raw.ncols());
    for b in 0..raw.ncols() {
        for i in 0..m {
            let base = i * (m + 2);
            let value = raw[(base, b)];
            let mean = (1..=m + 1).map(|k| raw[(base + k, b)]).sum::<f64>() / (m + 1) as f64;
            for j in 0..=m {
                q[(i * (m + 1) + j, b)] = value + raw[(base + 1 + j, b)] - mean;
            }
        }
    }
    q
}

/// Per-agent value stream and centred advantages for one input, used to check
/// the dueling identity.
pub fn dueling_parts(net: &QNetwork, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if x.len() != net.input_dim() {
        return Err(Error::InvalidArgument("input width mismatch".into()));
    }
    let mut a = DMatrix::from_column_slice(x.len(), 1, x);
    for layer in &net.trunk {
        a = layer.apply(&a).map(|v| v.max(0.0));
    }
    let raw = net.head.apply(&a);
    let m = net.m;
    let mut values = Vec::with_capacity(m);
    let mut advantages = Vec::with_capacity(m);
    for i in 0..m {
        let base = i * (m + 2);
        values.push(raw[(base, 0)]);
        let adv: Vec<f64> = (1..=m + 1).map(|k| raw[(base + k, 0)]).collect();
        let mean = adv.iter().sum::<f64>() / adv.len() as f64;
        advantages.push(adv.into_iter().map(|v| v - mean).collect());
    }
    Ok((values, advantages))
}
