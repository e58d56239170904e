//! Central finite-difference gradient checker.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Denominator floor for the relative error, so near-zero gradients are
/// compared absolutely.
const REL_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max relative error per parameter tensor.
    pub max_rel_error: Vec<f64>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error.iter().all(|&e| e <= self.tol)
    }

    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().cloned().fold(0.0, f64::max)
    }
}

fn eval<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: for<'g> Fn(&mut Graph<'g>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.constant_ref(p)).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).len() != 1 {
        return Err(Error::Shape("grad_check needs a scalar function".into()));
    }
    Ok(g.value(out).item())
}

/// Compares the analytic gradient of `f` at `params` with central
/// differences of width `2 * step`.
pub fn grad_check<F>(f: F, params: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&mut Graph<'g>, &[Var]) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::invalid("grad_check step must be positive"));
    }
    let base = eval(&f, params)?;
    if base.to_bits() != eval(&f, params)?.to_bits() {
        return Err(Error::Invariant("grad_check: function is not deterministic".into()));
    }

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param_ref(p)).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    drop(g);

    let mut work = params.to_vec();
    let mut max_rel_error = Vec::with_capacity(params.len());
    for (pi, an) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for e in 0..work[pi].len() {
            let orig = work[pi].data()[e];
            work[pi].data_mut()[e] = orig + step;
            let plus = eval(&f, &work)?;
            work[pi].data_mut()[e] = orig - step;
            let minus = eval(&f, &work)?;
            work[pi].data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = an.data()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
        max_rel_error.push(worst);
    }
    Ok(GradCheckReport { max_rel_error, tol })
}
