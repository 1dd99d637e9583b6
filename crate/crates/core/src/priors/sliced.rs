//! Sliced and distributional sliced Wasserstein distances.
//!
//! The distributional variant learns a distribution over projection
//! directions: a small network maps Gaussian noise to unit vectors and is
//! trained by gradient ascent on the mean sliced distance minus a penalty on
//! the mean squared cosine similarity between directions.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::neural::{Mlp, OutputActivation};
use crate::numerics::{AdamConfig, AdamState, RngState};

/// Squared 2-Wasserstein distance between two equal-weight empirical laws on
/// the line, given sorted samples.
pub fn sliced_w2_1d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return invalid(format!("sliced_w2_1d: lengths differ ({} vs {})", xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return invalid("sliced_w2_1d: empty input");
    }
    Ok(xs.iter().zip(ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / xs.len() as f64)
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

/// Mean over `directions` (rows, unit length) of the 1-D squared
/// W₂ between projections, with gradients for `x` and for the directions.
pub fn sliced_w2(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    directions: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let m = x.nrows();
    if m == 0 || y.nrows() != m {
        return invalid("sliced_w2: batches must be non-empty and equal-sized");
    }
    if x.ncols() != y.ncols() || directions.ncols() != x.ncols() {
        return invalid("sliced_w2: dimension mismatch");
    }
    let l = directions.nrows();
    let px = x.dot(&directions.t());
    let py = y.dot(&directions.t());
    let mut value = 0.0;
    let mut gx = Array2::<f64>::zeros(x.dim());
    let mut gd = Array2::<f64>::zeros(directions.dim());
    let scale = 1.0 / (m * l) as f64;
    for p in 0..l {
        let cx: Vec<f64> = px.column(p).to_vec();
        let cy: Vec<f64> = py.column(p).to_vec();
        let ix = argsort(&cx);
        let iy = argsort(&cy);
        for (&a, &b) in ix.iter().zip(&iy) {
            let diff = cx[a] - cy[b];
            value += diff * diff * scale;
            let c = 2.0 * diff * scale;
            gx.row_mut(a).scaled_add(c, &directions.row(p));
            let delta = &x.row(a) - &y.row(b);
            gd.row_mut(p).scaled_add(c, &delta);
        }
    }
    Ok((value, gx, gd))
}

/// Mean over pairs of squared cosine similarity between unit rows, and its
/// gradient.
fn pairwise_cos2(dirs: &Array2<f64>) -> (f64, Array2<f64>) {
    let l = dirs.nrows();
    let mut grad = Array2::<f64>::zeros(dirs.dim());
    if l < 2 {
        return (0.0, grad);
    }
    let gram = dirs.dot(&dirs.t());
    let pairs = (l * (l - 1) / 2) as f64;
    let mut value = 0.0;
    for i in 0..l {
        for j in (i + 1)..l {
            let c = gram[[i, j]];
            value += c * c / pairs;
            grad.row_mut(i).scaled_add(2.0 * c / pairs, &dirs.row(j));
            grad.row_mut(j).scaled_add(2.0 * c / pairs, &dirs.row(i));
        }
    }
    (value, grad)
}

fn normalize_rows(u: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = u.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(1e-12));
    let dirs = u / &norms.view().insert_axis(Axis(1));
    (dirs, norms)
}

/// Chain rule through `θ = u / ‖u‖`.
fn normalize_backward(dirs: &Array2<f64>, norms: &Array1<f64>, g_dirs: &Array2<f64>) -> Array2<f64> {
    let mut g = g_dirs.clone();
    for ((mut row, d), &n) in g.outer_iter_mut().zip(dirs.outer_iter()).zip(norms) {
        let proj = row.dot(&d);
        row.scaled_add(-proj, &d);
        row /= n;
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DswdConfig {
    pub num_projections: usize,
    pub dsw_iterations: usize,
    pub lambda_c: f64,
    #[serde(default = "default_sampler_hidden")]
    pub sampler_hidden: usize,
    #[serde(default = "default_sampler_lr")]
    pub sampler_lr: f64,
}

fn default_sampler_hidden() -> usize {
    32
}

fn default_sampler_lr() -> f64 {
    5e-3
}

impl Default for DswdConfig {
    fn default() -> Self {
        Self {
            num_projections: 10,
            dsw_iterations: 10,
            lambda_c: 10.0,
            sampler_hidden: default_sampler_hidden(),
            sampler_lr: default_sampler_lr(),
        }
    }
}

impl DswdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_projections == 0 {
            return invalid("dswd needs at least one projection");
        }
        if !(self.lambda_c >= 0.0) {
            return invalid("dswd lambda_c must be non-negative");
        }
        Ok(())
    }
}

/// Learnable direction sampler plus the directions chosen by the last ascent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DswdState {
    pub sampler: Mlp,
    pub opt: AdamState,
    /// Optional fixed feature map applied to both batches before slicing.
    pub feature: Option<Mlp>,
    pub directions: Option<Array2<f64>>,
}

impl DswdState {
    /// Sampler for `dim`-dimensional inputs (after the feature map, if any).
    pub fn new(dim: usize, config: &DswdConfig, feature: Option<Mlp>, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        if let Some(f) = &feature {
            if f.output_dim() != dim {
                return invalid("dswd feature map output must match the sampler dimension");
            }
        }
        let sampler = Mlp::glorot(&[dim, config.sampler_hidden, dim], OutputActivation::None, rng)?;
        let opt = AdamState::new(sampler.num_params(), AdamConfig::with_lr(config.sampler_lr));
        Ok(Self {
            sampler,
            opt,
            feature,
            directions: None,
        })
    }

    fn features(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.feature {
            Some(f) => f.predict(x),
            None => Ok(x.to_owned()),
        }
    }

    /// Run the inner ascent and store the resulting directions. Returns the
    /// final ascent objective.
    pub fn ascend(
        &mut self,
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        config: &DswdConfig,
        rng: &mut RngState,
    ) -> Result<f64> {
        config.validate()?;
        let fx = self.features(x)?;
        let fy = self.features(y)?;
        let noise = rng.normal_matrix(config.num_projections, self.sampler.input_dim());
        let mut objective = f64::NAN;
        for _ in 0..config.dsw_iterations {
            let (u, tape) = self.sampler.forward(noise.view())?;
            let (dirs, norms) = normalize_rows(&u);
            let (sw, _, g_sw) = sliced_w2(fx.view(), fy.view(), dirs.view())?;
            let (reg, g_reg) = pairwise_cos2(&dirs);
            objective = sw - config.lambda_c * reg;
            // descend on the negated objective
            let g_dirs = g_reg * config.lambda_c - g_sw;
            let g_u = normalize_backward(&dirs, &norms, &g_dirs);
            let (grads, _) = self.sampler.backward(&tape, g_u.view())?;
            self.sampler.adam_update(&grads, &mut self.opt)?;
        }
        let (dirs, _) = normalize_rows(&self.sampler.predict(noise.view())?);
        if config.dsw_iterations == 0 {
            let (sw, _, _) = sliced_w2(fx.view(), fy.view(), dirs.view())?;
            objective = sw - config.lambda_c * pairwise_cos2(&dirs).0;
        }
        self.directions = Some(dirs);
        Ok(objective)
    }

    /// Sliced distance along the stored directions and its gradient for `x`.
    pub fn distance(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
        let dirs = self
            .directions
            .as_ref()
            .ok_or_else(|| Error::InvalidState("dswd directions not initialised; call ascend first".into()))?;
        match &self.feature {
            None => {
                let (v, gx, _) = sliced_w2(x, y, dirs.view())?;
                Ok((v, gx))
            }
            Some(f) => {
                let (fx, tape) = f.forward(x)?;
                let fy = f.predict(y)?;
                let (v, gfx, _) = sliced_w2(fx.view(), fy.view(), dirs.view())?;
                let (_, gx) = f.backward(&tape, gfx.view())?;
                Ok((v, gx))
            }
        }
    }
}

/// Distributional sliced W₂: ascend the direction sampler, then evaluate on
/// the final directions.
pub fn dswd(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    config: &DswdConfig,
    state: &mut DswdState,
    rng: &mut RngState,
) -> Result<(f64, Array2<f64>)> {
    if x.nrows() != y.nrows() {
        return invalid("dswd: batches must be equal-sized");
    }
    state.ascend(x, y, config, rng)?;
    state.distance(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;
    use ndarray::array;

    #[test]
    fn one_dimensional_cases() {
        assert_eq!(sliced_w2_1d(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sliced_w2_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        let xs = [-1.0, 0.5, 3.0];
        let shifted: Vec<f64> = xs.iter().map(|v| v + 2.5).collect();
        assert!((sliced_w2_1d(&xs, &shifted).unwrap() - 6.25).abs() < 1e-12);
        assert!(sliced_w2_1d(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn two_point_coupling_brute_force() {
        // both couplings of {0,1} onto {1,2}: identity gives (1+1)/2, swap gives (4+0)/2
        let best = f64::min((1.0 + 1.0) / 2.0, (4.0 + 0.0) / 2.0);
        assert_eq!(sliced_w2_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), best);
    }

    #[test]
    fn single_axis_direction() {
        let x = array![[0.0, 5.0], [3.0, -1.0], [1.0, 2.0]];
        let y = array![[2.0, 5.0], [-1.0, -1.0], [0.5, 2.0]];
        let e1 = array![[1.0, 0.0]];
        let (v, _, _) = sliced_w2(x.view(), y.view(), e1.view()).unwrap();
        let mut xs: Vec<f64> = x.column(0).to_vec();
        let mut ys: Vec<f64> = y.column(0).to_vec();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        assert!((v - sliced_w2_1d(&xs, &ys).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn sliced_gradients() {
        let mut rng = RngState::new(5);
        let x = rng.normal_matrix(5, 3);
        let y = rng.normal_matrix(5, 3);
        let (dirs, _) = normalize_rows(&rng.normal_matrix(4, 3));
        let (_, gx, gd) = sliced_w2(x.view(), y.view(), dirs.view()).unwrap();
        let fd = finite_diff_grad(
            |p| {
                let xx = Array2::from_shape_vec((5, 3), p.to_vec()).unwrap();
                sliced_w2(xx.view(), y.view(), dirs.view()).unwrap().0
            },
            x.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        for (a, b) in gx.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-4));
        }
        let fdd = finite_diff_grad(
            |p| {
                let dd = Array2::from_shape_vec((4, 3), p.to_vec()).unwrap();
                sliced_w2(x.view(), y.view(), dd.view()).unwrap().0
            },
            dirs.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        for (a, b) in gd.iter().zip(&fdd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-4));
        }
    }

    #[test]
    fn diversity_penalty_gradient() {
        let (dirs, _) = normalize_rows(&RngState::new(6).normal_matrix(4, 3));
        let (_, g) = pairwise_cos2(&dirs);
        let fd = finite_diff_grad(
            |p| pairwise_cos2(&Array2::from_shape_vec((4, 3), p.to_vec()).unwrap()).0,
            dirs.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-4));
        }
    }

    #[test]
    fn normalization_chain_rule() {
        let u = RngState::new(7).normal_matrix(3, 4);
        let w = RngState::new(8).normal_matrix(3, 4);
        let (dirs, norms) = normalize_rows(&u);
        let g = normalize_backward(&dirs, &norms, &w);
        let fd = finite_diff_grad(
            |p| (normalize_rows(&Array2::from_shape_vec((3, 4), p.to_vec()).unwrap()).0 * &w).sum(),
            u.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-4));
        }
    }

    #[test]
    fn dswd_vanishes_on_identical_batches() {
        let mut rng = RngState::new(9);
        let x = rng.normal_matrix(20, 2);
        let cfg = DswdConfig::default();
        let mut st = DswdState::new(2, &cfg, None, &mut rng).unwrap();
        let (v, g) = dswd(x.view(), x.view(), &cfg, &mut st, &mut rng).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distance_requires_directions() {
        let mut rng = RngState::new(10);
        let st = DswdState::new(2, &DswdConfig::default(), None, &mut rng).unwrap();
        let x = rng.normal_matrix(3, 2);
        assert!(matches!(st.distance(x.view(), x.view()), Err(Error::InvalidState(_))));
    }

    #[test]
    fn feature_map_gradient() {
        let mut rng = RngState::new(11);
        let feature = Mlp::glorot(&[3, 5, 2], OutputActivation::None, &mut rng).unwrap();
        let cfg = DswdConfig {
            num_projections: 3,
            ..DswdConfig::default()
        };
        let mut st = DswdState::new(2, &cfg, Some(feature), &mut rng).unwrap();
        let x = rng.normal_matrix(6, 3);
        let y = rng.normal_matrix(6, 3);
        st.ascend(x.view(), y.view(), &cfg, &mut rng).unwrap();
        let (_, g) = st.distance(x.view(), y.view()).unwrap();
        let fd = finite_diff_grad(
            |p| {
                st.distance(Array2::from_shape_vec((6, 3), p.to_vec()).unwrap().view(), y.view())
                    .unwrap()
                    .0
            },
            x.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-4));
        }
    }
}
