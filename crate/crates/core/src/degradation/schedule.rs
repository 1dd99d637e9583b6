use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::beta::{beta, beta_tilde, BetaParams};
use super::block::{BlockAvgOp, DataShape};
use crate::error::{invalid, Error, Result};
use crate::numerics::RngState;

/// Forward-process family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// Pure noising, `A_k = e^{-β_k} I`.
    #[serde(rename = "d")]
    Denoise,
    /// Downsample and noise together at every step.
    #[serde(rename = "sr-naive")]
    SuperResNaive,
    /// Alternate noising steps and downsampling steps.
    #[serde(rename = "sr")]
    SuperRes,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(Self::Denoise),
            "sr-naive" | "sr_naive" => Ok(Self::SuperResNaive),
            "sr" => Ok(Self::SuperRes),
            other => invalid(format!("unknown schedule kind {other:?}")),
        }
    }
}

/// Everything needed to rebuild a schedule; stored in configs and checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDescriptor {
    pub kind: ScheduleKind,
    pub steps: usize,
    pub shape: DataShape,
    #[serde(default)]
    pub beta: BetaParams,
}

impl ScheduleDescriptor {
    pub fn new(kind: ScheduleKind, steps: usize, shape: DataShape) -> Self {
        Self {
            kind,
            steps,
            shape,
            beta: BetaParams::default(),
        }
    }

    pub fn build(&self) -> Result<DegradationSchedule> {
        DegradationSchedule::build(*self)
    }
}

/// `A_k = gain · P_level`, isotropic noise `sigma` in the step-k space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOperator {
    pub k: usize,
    pub gain: f64,
    pub level: u32,
    pub sigma: f64,
    pub block: BlockAvgOp,
}

impl StepOperator {
    /// Dimension of the step-k (degraded) space.
    pub fn dim(&self) -> usize {
        self.block.output.dim()
    }

    pub fn shape(&self) -> DataShape {
        self.block.output
    }

    /// `A_k x` for each row of `x`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.block.apply(x)? * self.gain)
    }

    /// `A_kᵀ g` for each row of `g`.
    pub fn adjoint(&self, g: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.block.adjoint(g)? * self.gain)
    }

    /// `A_k† y = a_k^{-1} · replicate(y)`.
    pub fn apply_pinv(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.gain == 0.0 {
            return invalid(format!("step {}: zero gain has no pseudoinverse", self.k));
        }
        Ok(self.block.replicate(y)? / self.gain)
    }

    /// Replicate step-space rows up to data space without undoing the gain.
    pub fn lift(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.block.replicate(y)
    }

    /// Transpose of [`StepOperator::lift`].
    pub fn lift_adjoint(&self, g: ArrayView2<f64>) -> Result<Array2<f64>> {
        let f = (1usize << self.level) as f64;
        Ok(self.block.apply(g)? * (f * f))
    }

    /// `A_k x + σ_k n` with caller-provided standard-normal `noise`.
    pub fn degrade_with(&self, x: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut y = self.apply(x)?;
        if noise.dim() != y.dim() {
            return invalid("degrade_with: noise shape does not match step space");
        }
        if self.sigma != 0.0 {
            y.scaled_add(self.sigma, &noise);
        }
        Ok(y)
    }

    /// `y ~ N(A_k x, σ_k² I)`.
    pub fn forward_sample(&self, x: ArrayView2<f64>, rng: &mut RngState) -> Result<Array2<f64>> {
        let mut y = self.apply(x)?;
        if self.sigma != 0.0 {
            y.mapv_inplace(|v| v + self.sigma * rng.normal());
        }
        Ok(y)
    }
}

/// Markov factorisation `p(y_k | y_{k-1}) = N(ã_k y_{k-1}, σ̃_k² I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub k: usize,
    pub gain: f64,
    pub variance: f64,
    pub valid: bool,
}

/// Gaussian `p(y_{k-1} | y_k, x̂)`: mean `weight_y·y_k + weight_x·A_{k-1}x̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub k: usize,
    pub weight_y: f64,
    pub weight_x: f64,
    pub std: f64,
}

/// Row of the schedule inspection table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepSummary {
    pub k: usize,
    pub a_k: f64,
    pub j_k: u32,
    pub sigma_k: f64,
    pub dim: usize,
    pub decomposable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSchedule {
    pub descriptor: ScheduleDescriptor,
    steps: Vec<StepOperator>,
}

impl DegradationSchedule {
    pub fn build(desc: ScheduleDescriptor) -> Result<Self> {
        desc.beta.validate()?;
        let t = desc.steps;
        if t == 0 {
            return invalid("schedule needs at least one step");
        }
        if desc.shape.dim() == 0 {
            return invalid("schedule data shape is empty");
        }
        let p = &desc.beta;
        let mut steps = Vec::with_capacity(t + 1);
        for k in 0..=t {
            let (gain, level, sigma) = match desc.kind {
                ScheduleKind::Denoise => {
                    let b = beta(k, t as f64, p)?;
                    ((-b).exp(), 0, 1.0 - (-2.0 * b).exp())
                }
                ScheduleKind::SuperResNaive => {
                    let b = beta_tilde(k, t as f64, p)?;
                    let level = k as u32;
                    let sigma = (1.0 - (-2.0 * b).exp()) * 0.5f64.powi(level as i32);
                    ((-b).exp(), level, sigma)
                }
                ScheduleKind::SuperRes => {
                    let t_beta = (t as f64 + 1.0) / 2.0;
                    let half_up = k.div_ceil(2);
                    let level = (k / 2) as u32;
                    let b = beta(half_up, t_beta, p)?;
                    let sigma = 2f64.powi(half_up as i32)
                        * (1.0 - (-2.0 * b).exp())
                        * 0.5f64.powi(level as i32);
                    ((-b).exp(), level, sigma)
                }
            };
            let block = BlockAvgOp::new(level, desc.shape)?;
            steps.push(StepOperator {
                k,
                gain,
                level,
                sigma,
                block,
            });
        }
        Ok(Self {
            descriptor: desc,
            steps,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.descriptor.kind
    }

    pub fn total_steps(&self) -> usize {
        self.descriptor.steps
    }

    pub fn data_shape(&self) -> DataShape {
        self.descriptor.shape
    }

    pub fn data_dim(&self) -> usize {
        self.descriptor.shape.dim()
    }

    pub fn step(&self, k: usize) -> Result<&StepOperator> {
        self.steps
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("step {k} outside 0..={}", self.total_steps())))
    }

    pub fn steps(&self) -> &[StepOperator] {
        &self.steps
    }

    /// Standard deviation of the latent law `p_T`.
    pub fn latent_std(&self) -> f64 {
        self.steps[self.total_steps()].sigma
    }

    pub fn latent_variance(&self) -> f64 {
        self.latent_std().powi(2)
    }

    /// `n` draws from `p_T = N(0, σ_T² I)` in the step-T space.
    pub fn latent_sample(&self, n: usize, rng: &mut RngState) -> Array2<f64> {
        let last = &self.steps[self.total_steps()];
        let s = last.sigma;
        Array2::from_shape_simple_fn((n, last.dim()), || s * rng.normal())
    }

    pub fn forward_sample(&self, k: usize, x: ArrayView2<f64>, rng: &mut RngState) -> Result<Array2<f64>> {
        self.step(k)?.forward_sample(x, rng)
    }

    /// Check whether step `k` factors through step `k-1`.
    pub fn decompose(&self, k: usize) -> Result<Decomposition> {
        if k == 0 || k > self.total_steps() {
            return invalid(format!("decompose: step {k} outside 1..={}", self.total_steps()));
        }
        let cur = &self.steps[k];
        let prev = &self.steps[k - 1];
        if cur.level != prev.level || prev.gain == 0.0 {
            return Ok(Decomposition {
                k,
                gain: f64::NAN,
                variance: f64::NAN,
                valid: false,
            });
        }
        let gain = cur.gain / prev.gain;
        let variance = cur.sigma.powi(2) - gain * gain * prev.sigma.powi(2);
        Ok(Decomposition {
            k,
            gain,
            variance,
            valid: variance > 0.0,
        })
    }

    pub fn is_fully_decomposable(&self) -> bool {
        (1..=self.total_steps()).all(|k| self.decompose(k).map(|d| d.valid).unwrap_or(false))
    }

    fn valid_decomposition(&self, k: usize) -> Result<Decomposition> {
        let d = self.decompose(k)?;
        if !d.valid {
            return Err(Error::UnsupportedSchedule(format!(
                "{:?} schedule does not decompose at step {k}",
                self.kind()
            )));
        }
        Ok(d)
    }

    /// Conjugate posterior of `y_{k-1}` given `y_k` and a restoration `x̂`.
    pub fn posterior(&self, k: usize) -> Result<Posterior> {
        let d = self.valid_decomposition(k)?;
        let prev_var = self.steps[k - 1].sigma.powi(2);
        if prev_var == 0.0 {
            return Ok(Posterior {
                k,
                weight_y: 0.0,
                weight_x: 1.0,
                std: 0.0,
            });
        }
        let precision = d.gain * d.gain / d.variance + 1.0 / prev_var;
        Ok(Posterior {
            k,
            weight_y: d.gain / d.variance / precision,
            weight_x: 1.0 / prev_var / precision,
            std: precision.recip().sqrt(),
        })
    }

    /// Posterior mean for each row pair `(y_k, x̂)`.
    pub fn posterior_mean(&self, k: usize, y_k: ArrayView2<f64>, x_hat: ArrayView2<f64>) -> Result<Array2<f64>> {
        let post = self.posterior(k)?;
        let mut mean = self.steps[k - 1].apply(x_hat)? * post.weight_x;
        if y_k.dim() != mean.dim() {
            return invalid("posterior: y_k does not live in the step-k space");
        }
        if post.weight_y != 0.0 {
            mean.scaled_add(post.weight_y, &y_k);
        }
        Ok(mean)
    }

    pub fn posterior_sample(
        &self,
        k: usize,
        y_k: ArrayView2<f64>,
        x_hat: ArrayView2<f64>,
        rng: &mut RngState,
    ) -> Result<Array2<f64>> {
        let std = self.posterior(k)?.std;
        let mut out = self.posterior_mean(k, y_k, x_hat)?;
        if std != 0.0 {
            out.mapv_inplace(|v| v + std * rng.normal());
        }
        Ok(out)
    }

    /// `Σ_rows ½σ_k^{-2}‖A_k x̂ − y_k‖²` and its gradient with respect to `x̂`.
    pub fn fidelity_full(&self, k: usize, x_hat: ArrayView2<f64>, y_k: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
        if k == 0 {
            return invalid("fidelity_full: step 0 has no noise");
        }
        let step = self.step(k)?;
        let resid = step.apply(x_hat)? - &y_k;
        let w = step.sigma.powi(-2);
        let value = 0.5 * w * resid.iter().map(|r| r * r).sum::<f64>();
        let grad = step.adjoint((resid * w).view())?;
        Ok((value, grad))
    }

    /// `Σ_rows ½σ̃_k^{-2}‖ã_k ŷ_{k-1} − y_k‖²` and its gradient with respect to `ŷ_{k-1}`.
    pub fn fidelity_transition(
        &self,
        k: usize,
        y_prev: ArrayView2<f64>,
        y_k: ArrayView2<f64>,
    ) -> Result<(f64, Array2<f64>)> {
        let d = self.valid_decomposition(k)?;
        if y_prev.dim() != y_k.dim() {
            return invalid("fidelity_transition: shape mismatch");
        }
        let resid = &y_prev * d.gain - &y_k;
        let w = 1.0 / d.variance;
        let value = 0.5 * w * resid.iter().map(|r| r * r).sum::<f64>();
        Ok((value, resid * (w * d.gain)))
    }

    pub fn summary(&self) -> Vec<StepSummary> {
        self.steps
            .iter()
            .map(|s| StepSummary {
                k: s.k,
                a_k: s.gain,
                j_k: s.level,
                sigma_k: s.sigma,
                dim: s.dim(),
                decomposable: s.k == 0 || self.decompose(s.k).map(|d| d.valid).unwrap_or(false),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;
    use ndarray::Array1;

    fn d4() -> DegradationSchedule {
        ScheduleDescriptor::new(ScheduleKind::Denoise, 4, DataShape::vector(2))
            .build()
            .unwrap()
    }

    #[test]
    fn step_zero_is_identity_noiseless() {
        for kind in [ScheduleKind::Denoise, ScheduleKind::SuperResNaive, ScheduleKind::SuperRes] {
            let s = ScheduleDescriptor::new(kind, 3, DataShape::new(8, 8, 1)).build().unwrap();
            let s0 = s.step(0).unwrap();
            assert_eq!((s0.gain, s0.sigma, s0.level), (1.0, 0.0, 0));
            assert!(s.steps()[1..].iter().all(|st| st.sigma > 0.0));
        }
    }

    #[test]
    fn denoise_t4_last_step() {
        let s = d4();
        let last = s.step(4).unwrap();
        assert!((last.gain - (-5.025f64).exp()).abs() < 1e-15);
        assert!((last.gain - 6.571e-3).abs() < 1e-6);
        assert!((last.sigma - 0.99996).abs() < 1e-5);
        assert!((s.latent_variance() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn table_latent_laws() {
        let naive = ScheduleDescriptor::new(ScheduleKind::SuperResNaive, 3, DataShape::new(32, 32, 3))
            .build()
            .unwrap();
        assert!((naive.latent_variance() * 64.0 - 1.0).abs() < 1e-3);
        assert_eq!(naive.step(3).unwrap().shape(), DataShape::new(4, 4, 3));
        let sr = ScheduleDescriptor::new(ScheduleKind::SuperRes, 7, DataShape::new(32, 32, 3))
            .build()
            .unwrap();
        assert!((sr.latent_variance() / 4.0 - 1.0).abs() < 1e-3);
        assert_eq!(sr.step(7).unwrap().level, 3);
    }

    #[test]
    fn sr_rejects_indivisible_shape() {
        let r = ScheduleDescriptor::new(ScheduleKind::SuperRes, 7, DataShape::new(15, 15, 1)).build();
        assert!(r.is_err());
    }

    #[test]
    fn decomposition_d_schedule() {
        let s = d4();
        let d2 = s.decompose(2).unwrap();
        assert!((d2.gain - (-0.94531f64).exp()).abs() < 1e-4);
        let b1 = 0.3234375f64;
        let b2 = 0.25f64 * 19.9 * 0.25 + 0.05 * 0.5;
        let s1 = 1.0 - (-2.0 * b1).exp();
        let s2 = 1.0 - (-2.0 * b2).exp();
        let a_tilde = (b1 - b2).exp();
        let expect = s2 * s2 - a_tilde * a_tilde * s1 * s1;
        assert!((d2.variance - expect).abs() < 1e-12);
        assert!((s2 * s2 - 0.8481).abs() < 1e-3);
        assert!(d2.valid);
        assert!(s.is_fully_decomposable());
    }

    #[test]
    fn sr_resolution_changes_do_not_decompose() {
        let s = ScheduleDescriptor::new(ScheduleKind::SuperRes, 7, DataShape::new(16, 16, 1))
            .build()
            .unwrap();
        for k in 1..=7 {
            let changes = s.step(k).unwrap().level != s.step(k - 1).unwrap().level;
            if changes {
                assert!(!s.decompose(k).unwrap().valid, "step {k}");
            }
        }
        assert!(!s.is_fully_decomposable());
        let naive = ScheduleDescriptor::new(ScheduleKind::SuperResNaive, 3, DataShape::new(16, 16, 1))
            .build()
            .unwrap();
        assert!((1..=3).all(|k| !naive.decompose(k).unwrap().valid));
    }

    #[test]
    fn composition_of_variances() {
        let s = d4();
        for k in 1..=4 {
            let d = s.decompose(k).unwrap();
            let lhs = s.step(k).unwrap().sigma.powi(2);
            let rhs = d.gain.powi(2) * s.step(k - 1).unwrap().sigma.powi(2) + d.variance;
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn posterior_collapses_at_first_step() {
        let s = d4();
        let mut rng = RngState::new(4);
        let x_hat = rng.normal_matrix(3, 2);
        let y1 = rng.normal_matrix(3, 2);
        let out = s.posterior_sample(1, y1.view(), x_hat.view(), &mut rng).unwrap();
        assert_eq!(out, x_hat);
    }

    #[test]
    fn posterior_rejected_for_sr() {
        let s = ScheduleDescriptor::new(ScheduleKind::SuperRes, 3, DataShape::new(4, 4, 1))
            .build()
            .unwrap();
        assert!(matches!(s.posterior(2), Err(Error::UnsupportedSchedule(_))));
        let y = Array2::zeros((1, 16));
        assert!(matches!(
            s.fidelity_transition(2, y.view(), y.view()),
            Err(Error::UnsupportedSchedule(_))
        ));
    }

    #[test]
    fn forward_sample_step_zero_exact() {
        let s = d4();
        let mut rng = RngState::new(3);
        let x = rng.normal_matrix(5, 2);
        assert_eq!(s.forward_sample(0, x.view(), &mut rng).unwrap(), x);
    }

    #[test]
    fn forward_sample_moments() {
        let s = d4();
        let step = s.step(2).unwrap();
        let n = 100_000;
        let x = Array2::from_shape_fn((n, 2), |(_, j)| if j == 0 { 0.5 } else { -1.0 });
        let y = step.forward_sample(x.view(), &mut RngState::new(8)).unwrap();
        let mean: Array1<f64> = y.mean_axis(ndarray::Axis(0)).unwrap();
        for (j, target) in [0.5, -1.0].iter().enumerate() {
            let tol = 4.0 * step.sigma / (n as f64).sqrt();
            assert!((mean[j] - step.gain * target).abs() <= tol);
            let sd = (y.column(j).mapv(|v| (v - mean[j]).powi(2)).sum() / n as f64).sqrt();
            assert!((sd / step.sigma - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn latent_sample_variance_and_dim() {
        let s = ScheduleDescriptor::new(ScheduleKind::SuperRes, 7, DataShape::new(16, 16, 1))
            .build()
            .unwrap();
        let z = s.latent_sample(25_000, &mut RngState::new(2));
        assert_eq!(z.ncols(), 4);
        let var = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
        assert!((var / s.latent_variance() - 1.0).abs() < 0.01);
        let again = s.latent_sample(25_000, &mut RngState::new(2));
        assert_eq!(z, again);
    }

    #[test]
    fn fidelity_values_and_gradients() {
        let s = ScheduleDescriptor::new(ScheduleKind::SuperResNaive, 2, DataShape::new(4, 4, 1))
            .build()
            .unwrap();
        let mut rng = RngState::new(12);
        let x = rng.normal_matrix(2, 16);
        let y = s.step(2).unwrap().apply(x.view()).unwrap();
        assert_eq!(s.fidelity_full(2, x.view(), y.view()).unwrap().0, 0.0);

        let y = rng.normal_matrix(2, 1);
        let (v, g) = s.fidelity_full(2, x.view(), y.view()).unwrap();
        let fd = finite_diff_grad(
            |flat| {
                let xx = Array2::from_shape_vec((2, 16), flat.to_vec()).unwrap();
                s.fidelity_full(2, xx.view(), y.view()).unwrap().0
            },
            x.as_slice().unwrap(),
            1e-6,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3), "{a} vs {b}");
        }
        // residual scaling is quadratic
        let step = s.step(2).unwrap();
        let ax = step.apply(x.view()).unwrap();
        let y3 = &ax - (&ax - &y) * 3.0;
        let v3 = s.fidelity_full(2, x.view(), y3.view()).unwrap().0;
        assert!((v3 - 9.0 * v).abs() < 1e-9 * v3);
    }

    #[test]
    fn transition_matches_full_at_first_step() {
        let s = d4();
        let mut rng = RngState::new(13);
        let x = rng.normal_matrix(4, 2);
        let y = rng.normal_matrix(4, 2);
        let a = s.fidelity_full(1, x.view(), y.view()).unwrap();
        let b = s.fidelity_transition(1, x.view(), y.view()).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12);
        assert!((&a.1 - &b.1).iter().all(|v| v.abs() < 1e-12));
    }
}
