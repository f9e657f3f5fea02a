use std::fmt;

use super::{Module, Parameter};

/// Central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor for relative errors, so entries whose true gradient is
/// zero are judged by absolute error instead.
const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Fingerprint of the piecewise-linear region (ReLU masks) the forward
    /// pass went through. Entries whose perturbation changes it are skipped.
    pub region: u64,
}

/// A scalar function of a module's parameters with an analytic gradient.
/// Stochastic choices must be frozen so that repeated calls are deterministic.
pub trait Objective: Module {
    fn evaluate(&mut self) -> Evaluation;

    /// Returns the loss and accumulates its gradient into each parameter.
    fn backward(&mut self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error <= self.tolerance && !p.max_rel_error.is_nan())
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            let verdict = if p.max_rel_error <= self.tolerance { "ok" } else { "FAIL" };
            writeln!(
                f,
                "  {:<32} max rel {:.3e}  max abs {:.3e}  checked {:>5}  skipped {:>3}  {verdict}",
                p.name, p.max_rel_error, p.max_abs_error, p.checked, p.skipped
            )?;
        }
        write!(
            f,
            "  overall max rel {:.3e} (tolerance {:.1e}): {}",
            self.max_rel_error(),
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn with_param<O: Objective + ?Sized, T>(obj: &mut O, index: usize, f: impl FnOnce(&mut Parameter) -> T) -> T {
    let mut f = Some(f);
    let mut out = None;
    let mut i = 0;
    obj.visit_params(&mut |_, p| {
        if i == index {
            out = Some((f.take().expect("visited once"))(p));
        }
        i += 1;
    });
    out.expect("parameter index in range")
}

/// Compares analytic gradients with central finite differences of step `h`.
pub fn gradcheck<O: Objective + ?Sized>(obj: &mut O, h: f64, tolerance: f64) -> GradCheckReport {
    obj.zero_grad();
    obj.backward();
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    obj.visit_params(&mut |name, p| analytic.push((name.to_string(), p.grad.as_slice().to_vec())));
    obj.zero_grad();

    let base_region = obj.evaluate().region;
    let mut params = Vec::with_capacity(analytic.len());
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        let mut report = ParamError {
            name: name.clone(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            checked: 0,
            skipped: 0,
        };
        for (k, &a) in grads.iter().enumerate() {
            let original = with_param(obj, pi, |p| p.value.as_slice()[k]);
            with_param(obj, pi, |p| p.value.as_mut_slice()[k] = original + h);
            let plus = obj.evaluate();
            with_param(obj, pi, |p| p.value.as_mut_slice()[k] = original - h);
            let minus = obj.evaluate();
            with_param(obj, pi, |p| p.value.as_mut_slice()[k] = original);

            if plus.region != base_region || minus.region != base_region {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus.loss - minus.loss) / (2.0 * h);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            // NaN must not be swallowed by max
            report.max_rel_error = if rel.is_nan() || report.max_rel_error.is_nan() {
                f64::NAN
            } else {
                report.max_rel_error.max(rel)
            };
            report.checked += 1;
        }
        params.push(report);
    }
    GradCheckReport { params, tolerance }
}
