use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed::rng_from;

/// Trainable weights and bias of one layer, with gradient buffers and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub grad_weights: Matrix,
    pub grad_bias: Vec<f64>,
    pub(crate) m_weights: Vec<f64>,
    pub(crate) v_weights: Vec<f64>,
    pub(crate) m_bias: Vec<f64>,
    pub(crate) v_bias: Vec<f64>,
    pub(crate) step: u64,
    pub(crate) grads_fresh: bool,
}

impl LayerParams {
    pub fn from_values(weights: Matrix, bias: Vec<f64>) -> Self {
        let (r, c) = weights.shape();
        let nb = bias.len();
        LayerParams {
            grad_weights: Matrix::zeros(r, c),
            grad_bias: vec![0.0; nb],
            m_weights: vec![0.0; r * c],
            v_weights: vec![0.0; r * c],
            m_bias: vec![0.0; nb],
            v_bias: vec![0.0; nb],
            weights,
            bias,
            step: 0,
            grads_fresh: false,
        }
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot(rows: usize, cols: usize, n_bias: usize, fan_in: usize, fan_out: usize, seed: u64) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = rng_from(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        Self::from_values(Matrix::from_vec(rows, cols, data).unwrap(), vec![0.0; n_bias])
    }

    pub fn zeroed(rows: usize, cols: usize, n_bias: usize) -> Self {
        Self::from_values(Matrix::zeros(rows, cols), vec![0.0; n_bias])
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn has_fresh_gradients(&self) -> bool {
        self.grads_fresh
    }

    /// Marks the current gradient buffers as belonging to the pending step.
    pub fn mark_gradients(&mut self) {
        self.grads_fresh = true;
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.as_mut_slice().fill(0.0);
        self.grad_bias.fill(0.0);
        self.grads_fresh = false;
    }

    pub fn num_params(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    /// Flat parameter view: weights (row-major) then bias.
    pub fn param(&self, i: usize) -> f64 {
        let nw = self.weights.as_slice().len();
        if i < nw {
            self.weights.as_slice()[i]
        } else {
            self.bias[i - nw]
        }
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        let nw = self.weights.as_slice().len();
        if i < nw {
            self.weights.as_mut_slice()[i] = v;
        } else {
            self.bias[i - nw] = v;
        }
    }

    pub fn grad(&self, i: usize) -> f64 {
        let nw = self.grad_weights.as_slice().len();
        if i < nw {
            self.grad_weights.as_slice()[i]
        } else {
            self.grad_bias[i - nw]
        }
    }
}

/// Fully connected layer, y = xW + b with W stored in x out.
#[derive(Debug, Clone)]
pub struct Dense {
    pub params: LayerParams,
    input: Option<Matrix>,
}

impl Dense {
    pub fn new(params: LayerParams) -> Self {
        Dense { params, input: None }
    }

    pub fn glorot(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        Self::new(LayerParams::glorot(in_dim, out_dim, out_dim, in_dim, out_dim, seed))
    }

    pub fn in_dim(&self) -> usize {
        self.params.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.params.weights.cols()
    }

    /// Stateless forward pass.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        let mut y = x.matmul(&self.params.weights)?;
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.params.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Forward pass that keeps the input for [`Dense::backward`].
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let y = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<Matrix> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::invalid("dense backward before forward"))?;
        let dx = self.backward_from(&x, upstream);
        self.input = Some(x);
        dx
    }

    /// Backward pass for an input the caller kept from [`Dense::apply`].
    pub fn backward_from(&mut self, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        if upstream.rows() != x.rows() || upstream.cols() != self.out_dim() {
            return Err(Error::shape(format!(
                "dense upstream {:?}, expected ({}, {})",
                upstream.shape(),
                x.rows(),
                self.out_dim()
            )));
        }
        let gw = x.t_matmul(upstream)?;
        self.params.grad_weights.add_assign(&gw)?;
        for (g, s) in self.params.grad_bias.iter_mut().zip(upstream.column_sums()) {
            *g += s;
        }
        self.params.mark_gradients();
        upstream.matmul_t(&self.params.weights)
    }
}

/// Valid, stride-1 1-D convolution over the time axis of a channels x time input.
/// Weights are out_channels x (in_channels * kernel), indexed [o, c * kernel + j].
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub params: LayerParams,
    in_channels: usize,
    kernel: usize,
    columns: Vec<Matrix>,
    input_lens: Vec<usize>,
}

impl Conv1d {
    pub fn new(params: LayerParams, in_channels: usize, kernel: usize) -> Result<Self> {
        if params.weights.cols() != in_channels * kernel || params.bias.len() != params.weights.rows() {
            return Err(Error::shape("conv weights do not match channels x kernel"));
        }
        Ok(Conv1d {
            params,
            in_channels,
            kernel,
            columns: Vec::new(),
            input_lens: Vec::new(),
        })
    }

    pub fn glorot(in_channels: usize, out_channels: usize, kernel: usize, seed: u64) -> Self {
        let params = LayerParams::glorot(
            out_channels,
            in_channels * kernel,
            out_channels,
            in_channels * kernel,
            out_channels * kernel,
            seed,
        );
        Self::new(params, in_channels, kernel).unwrap()
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.params.weights.rows()
    }

    /// Unfolds a channels x time input into (channels * kernel) x out_len columns.
    pub fn im2col(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.in_channels {
            return Err(Error::shape(format!(
                "conv expects {} channels, got {}",
                self.in_channels,
                x.rows()
            )));
        }
        if x.cols() < self.kernel {
            return Err(Error::shape(format!(
                "time length {} shorter than kernel {}",
                x.cols(),
                self.kernel
            )));
        }
        let out_len = x.cols() - self.kernel + 1;
        let mut cols = Matrix::zeros(self.in_channels * self.kernel, out_len);
        for c in 0..self.in_channels {
            let src = x.row(c);
            for j in 0..self.kernel {
                cols.row_mut(c * self.kernel + j).copy_from_slice(&src[j..j + out_len]);
            }
        }
        Ok(cols)
    }

    pub fn apply_cols(&self, cols: &Matrix) -> Result<Matrix> {
        let mut y = self.params.weights.matmul(cols)?;
        for (o, b) in self.params.bias.iter().enumerate() {
            for v in y.row_mut(o) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.apply_cols(&self.im2col(x)?)
    }

    /// Forward over a batch of examples, keeping what backward needs.
    pub fn forward(&mut self, xs: &[Matrix]) -> Result<Vec<Matrix>> {
        self.columns.clear();
        self.input_lens.clear();
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let cols = self.im2col(x)?;
            out.push(self.apply_cols(&cols)?);
            self.columns.push(cols);
            self.input_lens.push(x.cols());
        }
        Ok(out)
    }

    pub fn backward(&mut self, upstream: &[Matrix]) -> Result<Vec<Matrix>> {
        if upstream.len() != self.columns.len() {
            return Err(Error::shape("conv backward batch size differs from forward"));
        }
        let columns = std::mem::take(&mut self.columns);
        let grads = upstream
            .iter()
            .zip(&columns)
            .zip(&self.input_lens.clone())
            .map(|((up, cols), &len)| self.backward_cols(cols, len, up))
            .collect();
        self.columns = columns;
        grads
    }

    /// Backward pass for one example given its unfolded columns and input length.
    pub fn backward_cols(&mut self, cols: &Matrix, input_len: usize, up: &Matrix) -> Result<Matrix> {
        if up.shape() != (self.out_channels(), cols.cols()) {
            return Err(Error::shape(format!("conv upstream {:?}", up.shape())));
        }
        let gw = up.matmul_t(cols)?;
        self.params.grad_weights.add_assign(&gw)?;
        for (o, g) in self.params.grad_bias.iter_mut().enumerate() {
            *g += up.row(o).iter().sum::<f64>();
        }
        let dcols = self.params.weights.t_matmul(up)?;
        let mut dx = Matrix::zeros(self.in_channels, input_len);
        for c in 0..self.in_channels {
            for j in 0..self.kernel {
                let src = dcols.row(c * self.kernel + j);
                let dst = &mut dx.row_mut(c)[j..j + src.len()];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        self.params.mark_gradients();
        Ok(dx)
    }
}
