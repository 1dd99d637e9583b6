use ndarray::ArrayView2;

use crate::error::{invalid, Result};

/// PSNR reported for an exact match.
pub const PSNR_CAP_DB: f64 = 99.0;

fn mean_pairwise_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for ra in a.outer_iter() {
        let ra = ra.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| ra.to_vec());
        for rb in b.outer_iter() {
            let d2: f64 = ra.iter().zip(rb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            total += d2.sqrt();
        }
    }
    total / (a.nrows() * b.nrows()) as f64
}

/// Energy distance `2E‖x−y‖ − E‖x−x′‖ − E‖y−y′‖` with all-pairs means
/// (V-statistic, so identical batches give exactly zero).
pub fn energy_distance(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return invalid("energy_distance: empty batch");
    }
    if x.ncols() != y.ncols() {
        return invalid("energy_distance: dimension mismatch");
    }
    let xy = mean_pairwise_distance(x, y);
    let xx = mean_pairwise_distance(x, x);
    let yy = mean_pairwise_distance(y, y);
    Ok(2.0 * xy - xx - yy)
}

fn check_same(x: ArrayView2<f64>, reference: ArrayView2<f64>) -> Result<()> {
    if x.dim() != reference.dim() || x.is_empty() {
        return invalid(format!("shape mismatch: {:?} vs {:?}", x.dim(), reference.dim()));
    }
    Ok(())
}

/// `10 log10(peak² / MSE)` over all entries, capped at [`PSNR_CAP_DB`].
pub fn psnr(x: ArrayView2<f64>, reference: ArrayView2<f64>, peak: f64) -> Result<f64> {
    check_same(x, reference)?;
    let mse = (&x - &reference).mapv(|d| d * d).mean().unwrap_or(0.0);
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Single-window SSIM over all entries.
pub fn ssim(x: ArrayView2<f64>, reference: ArrayView2<f64>, peak: f64) -> Result<f64> {
    check_same(x, reference)?;
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = reference.sum() / n;
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cov = 0.0;
    for (a, b) in x.iter().zip(reference.iter()) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cov += (a - mx) * (b - my);
    }
    vx /= n;
    vy /= n;
    cov /= n;
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    Ok(((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
}

/// Mean per-row PSNR, treating each row as one image.
pub fn mean_psnr(x: ArrayView2<f64>, reference: ArrayView2<f64>, peak: f64) -> Result<f64> {
    check_same(x, reference)?;
    let mut total = 0.0;
    for (a, b) in x.outer_iter().zip(reference.outer_iter()) {
        total += psnr(a.insert_axis(ndarray::Axis(0)), b.insert_axis(ndarray::Axis(0)), peak)?;
    }
    Ok(total / x.nrows() as f64)
}

/// Mean per-row SSIM.
pub fn mean_ssim(x: ArrayView2<f64>, reference: ArrayView2<f64>, peak: f64) -> Result<f64> {
    check_same(x, reference)?;
    let mut total = 0.0;
    for (a, b) in x.outer_iter().zip(reference.outer_iter()) {
        total += ssim(a.insert_axis(ndarray::Axis(0)), b.insert_axis(ndarray::Axis(0)), peak)?;
    }
    Ok(total / x.nrows() as f64)
}
