use super::{join_name, KernelError, Matrix, Mode, Module, Parameter, Slot};

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Per-feature batch normalization with learnable scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
    /// True when the batch statistics were used, so the mean/variance
    /// paths contribute to the input gradient.
    batch_stats: bool,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        let mut gamma = Parameter::new(Matrix::zeros(1, features));
        gamma.value.fill(1.0);
        BatchNorm {
            gamma,
            beta: Parameter::new(Matrix::zeros(1, features)),
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn features(&self) -> usize {
        self.running_mean.len()
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache), KernelError> {
        let (rows, f) = x.shape();
        if f != self.features() {
            return Err(KernelError::Shape(format!("batch norm over {} features, got {f}", self.features())));
        }
        let batch_stats = mode != Mode::Eval;
        if batch_stats && rows < 2 {
            return Err(KernelError::BatchTooSmall(rows));
        }

        let (mean, var) = if batch_stats {
            let mut mean = vec![0.0; f];
            for i in 0..rows {
                mean.iter_mut().zip(x.row(i)).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= rows as f64);
            let mut var = vec![0.0; f];
            for i in 0..rows {
                for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= rows as f64);
            if mode == Mode::Train {
                let unbias = rows as f64 / (rows - 1) as f64;
                for j in 0..f {
                    self.running_mean[j] = (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
                    self.running_var[j] =
                        (1.0 - self.momentum) * self.running_var[j] + self.momentum * var[j] * unbias;
                }
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };

        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut normalized = Matrix::zeros(rows, f);
        let mut y = Matrix::zeros(rows, f);
        let (g, b) = (self.gamma.value.as_slice(), self.beta.value.as_slice());
        for i in 0..rows {
            let xr = x.row(i);
            for j in 0..f {
                let n = (xr[j] - mean[j]) * inv_std[j];
                normalized.set(i, j, n);
                y.set(i, j, g[j] * n + b[j]);
            }
        }
        Ok((y, BatchNormCache { normalized, inv_std, batch_stats }))
    }

    pub fn backward(&mut self, cache: &BatchNormCache, dy: &Matrix) -> Result<Matrix, KernelError> {
        dy.expect_shape(cache.normalized.shape(), "batch norm backward")?;
        let (rows, f) = dy.shape();
        let mut sum_dy = vec![0.0; f];
        let mut sum_dy_n = vec![0.0; f];
        for i in 0..rows {
            for j in 0..f {
                sum_dy[j] += dy.get(i, j);
                sum_dy_n[j] += dy.get(i, j) * cache.normalized.get(i, j);
            }
        }
        {
            let gg = self.gamma.grad.as_mut_slice();
            let gb = self.beta.grad.as_mut_slice();
            for j in 0..f {
                gg[j] += sum_dy_n[j];
                gb[j] += sum_dy[j];
            }
        }

        let g = self.gamma.value.as_slice();
        let mut dx = Matrix::zeros(rows, f);
        let r = rows as f64;
        for i in 0..rows {
            for j in 0..f {
                let scale = g[j] * cache.inv_std[j];
                let v = if cache.batch_stats {
                    // dx = γ/σ · (dy - mean(dy) - x̂·mean(dy·x̂))
                    scale * (dy.get(i, j) - sum_dy[j] / r - cache.normalized.get(i, j) * sum_dy_n[j] / r)
                } else {
                    scale * dy.get(i, j)
                };
                dx.set(i, j, v);
            }
        }
        Ok(dx)
    }
}

impl Module for BatchNorm {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join_name(prefix, "gamma"), Slot::Param(&mut self.gamma));
        f(&join_name(prefix, "beta"), Slot::Param(&mut self.beta));
        f(&join_name(prefix, "running_mean"), Slot::Buffer(&mut self.running_mean));
        f(&join_name(prefix, "running_var"), Slot::Buffer(&mut self.running_var));
    }
}
