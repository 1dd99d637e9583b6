use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{adam_step, AdamState, RngState};

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    None,
    Tanh,
}

/// Fully connected network with Tanh hidden activations.
///
/// Parameters live in one flat vector, layer by layer: the `out × in`
/// weight matrix in row-major order followed by the bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
    #[serde(skip, default = "next_version")]
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.output == other.output && self.params == other.params
    }
}

/// Activations recorded by [`Mlp::forward`]; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    acts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn input(&self) -> &Array2<f64> {
        &self.acts[0]
    }

    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("tape has at least the input")
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(dims: &[usize], output: OutputActivation) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return invalid(format!("mlp dims {dims:?} must have >= 2 positive entries"));
        }
        Ok(Self {
            dims: dims.to_vec(),
            output,
            params: vec![0.0; param_count(dims)],
            version: next_version(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(dims: &[usize], output: OutputActivation, rng: &mut RngState) -> Result<Self> {
        let mut net = Self::zeros(dims, output)?;
        let mut offset = 0;
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.uniform_range(-bound, bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_parts(dims: Vec<usize>, output: OutputActivation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(&dims, output)?;
        if params.len() != net.params.len() {
            return invalid(format!(
                "mlp dims {dims:?} need {} parameters, got {}",
                net.params.len(),
                params.len()
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure("mlp parameters must be finite".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access invalidates all outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version = next_version();
        &mut self.params
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.dims[..=layer])
    }

    /// `out × in` weight matrix of `layer`.
    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let start = self.offset(layer);
        ArrayView2::from_shape((o, i), &self.params[start..start + o * i]).unwrap()
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let start = self.offset(layer) + o * i;
        ArrayView1::from(&self.params[start..start + o])
    }

    fn is_tanh(&self, layer: usize) -> bool {
        layer + 1 < self.num_layers() || self.output == OutputActivation::Tanh
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return invalid(format!(
                "mlp expects input dim {}, got {}",
                self.input_dim(),
                x.ncols()
            ));
        }
        Ok(())
    }

    fn layer_forward(&self, layer: usize, h: &Array2<f64>) -> Array2<f64> {
        let mut a = h.dot(&self.weight(layer).t());
        a += &self.bias(layer);
        if self.is_tanh(layer) {
            a.mapv_inplace(f64::tanh);
        }
        a
    }

    /// Output only; nothing retained for a backward pass.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for l in 0..self.num_layers() {
            h = self.layer_forward(l, &h);
        }
        Ok(h)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Tape)> {
        self.check_input(&x)?;
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(x.to_owned());
        for l in 0..self.num_layers() {
            let next = self.layer_forward(l, &acts[l]);
            acts.push(next);
        }
        let out = acts.last().unwrap().clone();
        Ok((
            out,
            Tape {
                version: self.version,
                acts,
            },
        ))
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.version != self.version || tape.acts.len() != self.dims.len() {
            return Err(Error::InvalidState(
                "tape was recorded against different parameters".into(),
            ));
        }
        Ok(())
    }

    fn write_layer_grad(&self, grads: &mut [f64], layer: usize, dw: &Array2<f64>, db: &Array1<f64>) {
        let start = self.offset(layer);
        let nw = dw.len();
        for (g, v) in grads[start..start + nw].iter_mut().zip(dw.iter()) {
            *g += v;
        }
        for (g, v) in grads[start + nw..start + nw + db.len()].iter_mut().zip(db.iter()) {
            *g += v;
        }
    }

    /// Gradients of `Σ out_grad ⊙ output` with respect to parameters and input.
    pub fn backward(&self, tape: &Tape, out_grad: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        self.check_tape(tape)?;
        if out_grad.dim() != tape.output().dim() {
            return Err(Error::InvalidState(format!(
                "output gradient shape {:?} does not match tape output {:?}",
                out_grad.dim(),
                tape.output().dim()
            )));
        }
        let mut grads = vec![0.0; self.num_params()];
        let mut g = out_grad.to_owned();
        for l in (0..self.num_layers()).rev() {
            if self.is_tanh(l) {
                g.zip_mut_with(&tape.acts[l + 1], |d, &h| *d *= 1.0 - h * h);
            }
            let dw = g.t().dot(&tape.acts[l]);
            let db = g.sum_axis(Axis(0));
            self.write_layer_grad(&mut grads, l, &dw, &db);
            g = g.dot(&self.weight(l));
        }
        Ok((grads, g))
    }

    /// For a scalar-output net, evaluate `penalty(∇_x f)` where the closure
    /// returns the penalty value and its derivative with respect to the
    /// input-gradient matrix; returns the value and the parameter gradient
    /// (double backpropagation).
    pub fn input_grad_penalty<F>(&self, x: ArrayView2<f64>, penalty: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnOnce(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
    {
        if self.output_dim() != 1 {
            return invalid("input_grad_penalty needs a scalar-output network");
        }
        let (_, tape) = self.forward(x)?;
        let acts = &tape.acts;
        let nl = self.num_layers();
        let n = x.nrows();

        // Backward pass with unit seed, keeping δ_l (pre-activation) and g_l (input of layer l).
        let mut deltas: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); nl];
        let mut gs: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); nl];
        let top = if self.output == OutputActivation::Tanh {
            acts[nl].mapv(|h| 1.0 - h * h)
        } else {
            Array2::ones((n, 1))
        };
        deltas[nl - 1] = top;
        gs[nl - 1] = deltas[nl - 1].dot(&self.weight(nl - 1));
        for l in (0..nl - 1).rev() {
            let mut d = gs[l + 1].clone();
            d.zip_mut_with(&acts[l + 1], |v, &h| *v *= 1.0 - h * h);
            gs[l] = d.dot(&self.weight(l));
            deltas[l] = d;
        }

        let (value, g0_bar) = penalty(&gs[0])?;
        if g0_bar.dim() != gs[0].dim() {
            return invalid("penalty derivative has the wrong shape");
        }

        let mut grads = vec![0.0; self.num_params()];
        let mut h_bar: Vec<Option<Array2<f64>>> = vec![None; nl + 1];
        let mut g_bar = g0_bar;
        for l in 0..nl {
            // g_l = δ_l W_l
            let dw = deltas[l].t().dot(&g_bar);
            self.write_layer_grad(&mut grads, l, &dw, &Array1::zeros(self.dims[l + 1]));
            let delta_bar = g_bar.dot(&self.weight(l).t());
            if l + 1 < nl {
                // δ_l = g_{l+1} ⊙ (1 − h_{l+1}²)
                let h = &acts[l + 1];
                let mut next_g_bar = delta_bar.clone();
                next_g_bar.zip_mut_with(h, |v, &hv| *v *= 1.0 - hv * hv);
                let mut hb = delta_bar;
                ndarray::Zip::from(&mut hb)
                    .and(&gs[l + 1])
                    .and(h)
                    .for_each(|v, &gv, &hv| *v *= -2.0 * gv * hv);
                h_bar[l + 1] = Some(hb);
                g_bar = next_g_bar;
            } else if self.output == OutputActivation::Tanh {
                let mut hb = delta_bar;
                hb.zip_mut_with(&acts[nl], |v, &hv| *v *= -2.0 * hv);
                h_bar[nl] = Some(hb);
            }
        }

        // Push the activation adjoints back through the forward pass.
        let mut carry: Option<Array2<f64>> = h_bar[nl].take();
        for l in (0..nl).rev() {
            if let Some(mut a_bar) = carry.take() {
                if self.is_tanh(l) {
                    a_bar.zip_mut_with(&acts[l + 1], |v, &h| *v *= 1.0 - h * h);
                }
                let dw = a_bar.t().dot(&acts[l]);
                let db = a_bar.sum_axis(Axis(0));
                self.write_layer_grad(&mut grads, l, &dw, &db);
                if l > 0 {
                    carry = Some(a_bar.dot(&self.weight(l)));
                }
            }
            if l > 0 {
                if let Some(hb) = h_bar[l].take() {
                    carry = Some(match carry.take() {
                        Some(c) => c + hb,
                        None => hb,
                    });
                }
            }
        }
        Ok((value, grads))
    }

    pub fn adam_update(&mut self, grads: &[f64], state: &mut AdamState) -> Result<()> {
        adam_step(self.params_mut(), grads, state)?;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure("non-finite parameters after update".into()));
        }
        Ok(())
    }
}
