use crate::error::{invalid, Error, Result};

/// Central-difference gradient `(f(x + ε e_i) − f(x − ε e_i)) / 2ε`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return invalid("finite_diff_grad: eps must be positive");
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = f(&probe);
        probe[i] = orig - eps;
        let down = f(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "finite_diff_grad: non-finite function value at coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}
