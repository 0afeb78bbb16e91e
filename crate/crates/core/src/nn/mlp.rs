use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Output mapping applied after the last affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// `(tanh(z) + 1) / 2`, so every output lies in `[0, 1]`.
    Actor,
    /// Identity output, used by critics.
    Linear,
}

impl OutputHead {
    fn code(self) -> u8 {
        match self {
            OutputHead::Actor => 0,
            OutputHead::Linear => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OutputHead::Actor),
            1 => Some(OutputHead::Linear),
            _ => None,
        }
    }

    pub(crate) fn as_code(self) -> u8 {
        self.code()
    }
}

/// Layer sizes (input first, output last) plus the output head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub sizes: Vec<usize>,
    pub head: OutputHead,
}

impl NetShape {
    pub fn new(sizes: Vec<usize>, head: OutputHead) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Contract(format!(
                "a network needs at least input and output sizes, got {sizes:?}"
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Contract(format!("zero-width layer in {sizes:?}")));
        }
        Ok(Self { sizes, head })
    }

    /// `input -> hidden... -> output`.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, head: OutputHead) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, head)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Total parameter count: sum over layers of `fan_in * fan_out + fan_out`.
    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layout(&self) -> Vec<LayerSpan> {
        let mut offset = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let span = LayerSpan {
                    fan_in: w[0],
                    fan_out: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset = span.bias_offset + w[1];
                span
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    fan_in: usize,
    fan_out: usize,
    weight_offset: usize,
    bias_offset: usize,
}

impl LayerSpan {
    fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.fan_in, self.fan_out),
            &params[self.weight_offset..self.bias_offset],
        )
        .expect("layout is consistent")
    }

    fn weights_mut<'a>(&self, params: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape(
            (self.fan_in, self.fan_out),
            &mut params[self.weight_offset..self.bias_offset],
        )
        .expect("layout is consistent")
    }

    fn bias<'a>(&self, params: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&params[self.bias_offset..self.bias_offset + self.fan_out])
    }
}

/// Flat parameter vector of one network.
///
/// Layout, layer by layer from the input side: the `fan_in x fan_out` weight
/// matrix in row-major order (index `i * fan_out + j` connects input `i` to
/// unit `j`), followed by the `fan_out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Activations recorded by [`MlpNet::forward`], consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// `activations[0]` is the input batch, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    shape: NetShape,
    params: Vec<f64>,
    /// Bumped on every parameter write so stale caches can be detected.
    version: u64,
}

impl MlpNet {
    /// Weights and biases drawn from `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let mut params = vec![0.0; shape.num_params()];
        for span in shape.layout() {
            let bound = 1.0 / (span.fan_in as f64).sqrt();
            for p in &mut params[span.weight_offset..span.bias_offset + span.fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Self {
            shape,
            params,
            version: 0,
        }
    }

    pub fn zeros(shape: NetShape) -> Self {
        let params = vec![0.0; shape.num_params()];
        Self {
            shape,
            params,
            version: 0,
        }
    }

    pub fn from_genome(shape: NetShape, genome: &Genome) -> Result<Self> {
        check_dim("genome length", shape.num_params(), genome.len())?;
        Ok(Self {
            shape,
            params: genome.0.clone(),
            version: 0,
        })
    }

    pub fn to_genome(&self) -> Genome {
        Genome(self.params.clone())
    }

    /// Overwrite all parameters from a genome of matching length.
    pub fn load_genome(&mut self, genome: &Genome) -> Result<()> {
        check_dim("genome length", self.params.len(), genome.len())?;
        self.params.copy_from_slice(&genome.0);
        self.version += 1;
        Ok(())
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        check_dim("network input", self.shape.input_dim(), x.ncols())?;
        let layout = self.shape.layout();
        let mut activations = Vec::with_capacity(layout.len() + 1);
        activations.push(x.to_owned());
        for (i, span) in layout.iter().enumerate() {
            let input = &activations[i];
            let mut z = Array2::zeros((input.nrows(), span.fan_out));
            general_mat_mul(1.0, input, &span.weights(&self.params), 0.0, &mut z);
            z += &span.bias(&self.params);
            let last = i + 1 == layout.len();
            if !last {
                z.mapv_inplace(f64::tanh);
            } else if self.shape.head == OutputHead::Actor {
                z.mapv_inplace(|v| 0.5 * (v.tanh() + 1.0));
            }
            activations.push(z);
        }
        Ok(ForwardCache {
            version: self.version,
            activations,
        })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.activations.pop().unwrap())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.predict_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode pass for the scalar objective whose gradient with respect
    /// to the network output is `grad_out`. Returns the parameter gradient in
    /// genome layout and the gradient with respect to the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<f64>,
    ) -> Result<(Vec<f64>, Array2<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backprop(cache, grad_out, Some(&mut grads))?;
        Ok((grads, input_grad))
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn backward_input(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        self.backprop(cache, grad_out, None)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<f64>,
        mut grads: Option<&mut Vec<f64>>,
    ) -> Result<Array2<f64>> {
        if cache.version != self.version || cache.activations.len() != self.shape.sizes.len() {
            return Err(Error::Contract(
                "forward cache does not belong to the current parameters".into(),
            ));
        }
        let out = cache.output();
        if grad_out.dim() != out.dim() {
            return Err(Error::Dimension {
                context: "output gradient",
                expected: out.len(),
                actual: grad_out.len(),
            });
        }
        let mut delta = grad_out.to_owned();
        match self.shape.head {
            OutputHead::Actor => {
                // d/dz (tanh z + 1)/2 = 2y(1 - y)
                ndarray::Zip::from(&mut delta)
                    .and(out)
                    .for_each(|d, &y| *d *= 2.0 * y * (1.0 - y));
            }
            OutputHead::Linear => {}
        }
        let layout = self.shape.layout();
        for (i, span) in layout.iter().enumerate().rev() {
            let input = &cache.activations[i];
            if let Some(grads) = grads.as_deref_mut() {
                let mut dw = span.weights_mut(grads);
                general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut dw);
                let db = delta.sum_axis(Axis(0));
                grads[span.bias_offset..span.bias_offset + span.fan_out]
                    .copy_from_slice(db.as_slice().unwrap());
            }
            let mut d_input = Array2::zeros((delta.nrows(), span.fan_in));
            general_mat_mul(1.0, &delta, &span.weights(&self.params).t(), 0.0, &mut d_input);
            if i > 0 {
                // Hidden layers use tanh: d/dz tanh z = 1 - a^2.
                ndarray::Zip::from(&mut d_input)
                    .and(input)
                    .for_each(|d, &a| *d *= 1.0 - a * a);
            }
            delta = d_input;
        }
        Ok(delta)
    }

    /// Polyak averaging: `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &MlpNet, tau: f64) -> Result<()> {
        if self.shape != source.shape {
            return Err(Error::Contract("soft update between different shapes".into()));
        }
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + (1.0 - tau) * *t;
        }
        self.version += 1;
        Ok(())
    }

    /// Hard copy of another network's parameters.
    pub fn copy_from(&mut self, source: &MlpNet) -> Result<()> {
        if self.shape != source.shape {
            return Err(Error::Contract("copy between different shapes".into()));
        }
        self.params.copy_from_slice(&source.params);
        self.version += 1;
        Ok(())
    }
}
