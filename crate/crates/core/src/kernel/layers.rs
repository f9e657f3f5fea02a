use rand::Rng;

use super::{join_name, KernelError, Matrix, Module, Parameter, Slot};

/// Fully connected layer `y = x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

#[derive(Debug, Clone)]
pub struct LinearCache {
    input: Matrix,
}

impl Linear {
    /// Fan-in uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Linear {
            weight: Parameter::fan_in_uniform(inputs, outputs, rng),
            bias: Parameter::new(Matrix::zeros(1, outputs)),
        }
    }

    pub fn from_parts(weight: Matrix, bias: Matrix) -> Result<Self, KernelError> {
        bias.expect_shape((1, weight.cols()), "bias")?;
        Ok(Linear { weight: Parameter::new(weight), bias: Parameter::new(bias) })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LinearCache), KernelError> {
        if x.cols() != self.inputs() {
            return Err(KernelError::Shape(format!(
                "linear layer expects {} inputs, got {}",
                self.inputs(),
                x.cols()
            )));
        }
        let mut y = x.matmul(&self.weight.value)?;
        let b = self.bias.value.as_slice();
        for i in 0..y.rows() {
            y.row_mut(i).iter_mut().zip(b).for_each(|(v, b)| *v += b);
        }
        Ok((y, LinearCache { input: x.clone() }))
    }

    /// Accumulates `dW = xᵀ·dy`, `db = Σ_rows dy` and returns `dy·Wᵀ`.
    pub fn backward(&mut self, cache: &LinearCache, dy: &Matrix) -> Result<Matrix, KernelError> {
        dy.expect_shape((cache.input.rows(), self.outputs()), "linear backward")?;
        self.weight.grad.add_assign(&cache.input.t_matmul(dy)?)?;
        let db = self.bias.grad.as_mut_slice();
        for i in 0..dy.rows() {
            db.iter_mut().zip(dy.row(i)).for_each(|(g, d)| *g += d);
        }
        dy.matmul_t(&self.weight.value)
    }
}

impl Module for Linear {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join_name(prefix, "weight"), Slot::Param(&mut self.weight));
        f(&join_name(prefix, "bias"), Slot::Param(&mut self.bias));
    }
}

/// Elementwise nonlinearity. ELU uses α = 1; the ReLU derivative at 0 is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Elu,
    Relu,
}

#[derive(Debug, Clone)]
pub struct ActivationCache {
    kind: Activation,
    input: Matrix,
    output: Matrix,
}

const ELU_ALPHA: f64 = 1.0;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu if x > 0.0 => x,
            Activation::Elu => ELU_ALPHA * x.exp_m1(),
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn forward(self, x: Matrix) -> (Matrix, ActivationCache) {
        let y = x.map(|v| self.apply(v));
        (y.clone(), ActivationCache { kind: self, input: x, output: y })
    }

    pub fn backward(cache: &ActivationCache, dy: &Matrix) -> Result<Matrix, KernelError> {
        dy.expect_shape(cache.input.shape(), "activation backward")?;
        let mut dx = dy.clone();
        let it = dx
            .as_mut_slice()
            .iter_mut()
            .zip(cache.input.as_slice().iter().zip(cache.output.as_slice()));
        match cache.kind {
            Activation::Elu => it.for_each(|(d, (&x, &y))| {
                if x <= 0.0 {
                    *d *= y + ELU_ALPHA
                }
            }),
            Activation::Relu => it.for_each(|(d, (&x, _))| {
                if x <= 0.0 {
                    *d = 0.0
                }
            }),
        }
        Ok(dx)
    }
}

impl ActivationCache {
    /// Hash of which side of each kink the inputs fell on. Only ReLU has a
    /// kink in its first derivative; ELU contributes nothing.
    pub fn region_hash(&self) -> u64 {
        if self.kind == Activation::Elu {
            return 0;
        }
        // FNV-1a over the sign bits
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &x in self.input.as_slice() {
            h ^= u64::from(x > 0.0);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}
