use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::task::InverseTask;
use crate::error::{invalid, Result};
use crate::numerics::svd;

/// `argmin_x ½‖x − v‖² + λ·½σ⁻²‖A x − y‖²` for each row of `v`, using the
/// task operator's uniform singular value:
/// `x = v − Aᵀ(A v − y)·w / (1 + w s²)` with `w = λσ⁻²`.
pub fn prox_fidelity(v: ArrayView2<f64>, task: &InverseTask, lambda: f64) -> Result<Array2<f64>> {
    if !(lambda >= 0.0) {
        return invalid("prox weight must be non-negative");
    }
    if v.dim() != (task.observation.nrows(), task.shape().dim()) {
        return invalid(format!(
            "prox input {:?} does not match task ({}, {})",
            v.dim(),
            task.observation.nrows(),
            task.shape().dim()
        ));
    }
    if lambda == 0.0 {
        return Ok(v.to_owned());
    }
    let w = lambda / task.fidelity_sigma().powi(2);
    let resid = task.op.apply(v)? - &task.observation;
    let scale = w / (1.0 + w * task.op.singular_value_sq());
    Ok(&v - &(task.op.adjoint(resid.view())? * scale))
}

/// The same proximal map for an arbitrary dense `A`, through its SVD:
/// along each right singular vector `x = (v + w s ỹ)/(1 + w s²)`, identity on
/// the null space.
pub fn prox_fidelity_dense(
    v: ArrayView1<f64>,
    a: ArrayView2<f64>,
    y: ArrayView1<f64>,
    sigma: f64,
    lambda: f64,
) -> Result<Array1<f64>> {
    if !(lambda >= 0.0) || !(sigma > 0.0) {
        return invalid("prox needs lambda >= 0 and sigma > 0");
    }
    if a.ncols() != v.len() || a.nrows() != y.len() {
        return invalid("prox_fidelity_dense: dimension mismatch");
    }
    let w = lambda / (sigma * sigma);
    let dec = svd(a)?;
    let mut x = v.to_owned();
    for (i, &s) in dec.s.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let vi = dec.v.column(i);
        let ui = dec.u.column(i);
        let v_c = vi.dot(&v);
        let y_c = ui.dot(&y);
        let target = (v_c + w * s * y_c) / (1.0 + w * s * s);
        x.scaled_add(target - v_c, &vi);
    }
    Ok(x)
}
