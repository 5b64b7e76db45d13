use rand::Rng;

use super::param::ParamVector;
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. Output layers are always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub use_bias: bool,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, use_bias: bool) -> Result<Self> {
        let spec = Self {
            layer_widths,
            activation,
            use_bias,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least input and output widths, got {:?}",
                self.layer_widths
            )));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config(format!(
                "MLP widths must be positive, got {:?}",
                self.layer_widths
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + if self.use_bias { w[1] } else { 0 })
            .sum()
    }
}

/// One dense layer in structured form. `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

/// Structured MLP weights.
///
/// The flat ordering is layer-major; within a layer the weight matrix comes
/// first (row-major, one row per output unit) followed by the bias vector
/// when the spec has biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<DenseLayer>,
}

impl MlpWeights {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| DenseLayer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: spec.use_bias.then(|| vec![0.0; w[1]]),
            })
            .collect();
        Self { layers }
    }

    pub fn flatten(&self) -> Result<ParamVector> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if layer.weights.len() != layer.inputs * layer.outputs {
                return Err(Error::Config(format!(
                    "layer weights have {} entries, expected {}x{}",
                    layer.weights.len(),
                    layer.outputs,
                    layer.inputs
                )));
            }
            out.extend_from_slice(&layer.weights);
            if let Some(b) = &layer.bias {
                if b.len() != layer.outputs {
                    return Err(Error::Config(format!(
                        "bias has {} entries, expected {}",
                        b.len(),
                        layer.outputs
                    )));
                }
                out.extend_from_slice(b);
            }
        }
        ParamVector::new(out)
    }

    pub fn unflatten(spec: &MlpSpec, params: &ParamVector) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Config(format!(
                "expected {} parameters for widths {:?}, got {}",
                spec.param_count(),
                spec.layer_widths,
                params.len()
            )));
        }
        let mut cursor = 0;
        let mut take = |n: usize| {
            let chunk = params[cursor..cursor + n].to_vec();
            cursor += n;
            chunk
        };
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let weights = take(w[0] * w[1]);
                let bias = spec.use_bias.then(|| take(w[1]));
                DenseLayer {
                    inputs: w[0],
                    outputs: w[1],
                    weights,
                    bias,
                }
            })
            .collect();
        Ok(Self { layers })
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    weight_offset: usize,
    bias_offset: Option<usize>,
}

/// Gradients of `cotangent . f(params, input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub wrt_params: Vec<f64>,
    pub wrt_inputs: Vec<f64>,
}

/// A compiled MLP layout: offsets are resolved once so the hot paths work on
/// plain slices without allocating.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    shapes: Vec<LayerShape>,
    param_count: usize,
}

/// Per-evaluation scratch space: the activations of every layer, kept for the
/// backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    activations: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut offset = 0;
        let shapes = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let weight_offset = offset;
                offset += w[0] * w[1];
                let bias_offset = spec.use_bias.then(|| {
                    let b = offset;
                    offset += w[1];
                    b
                });
                LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    weight_offset,
                    bias_offset,
                }
            })
            .collect();
        Ok(Self {
            spec,
            shapes,
            param_count: offset,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn input_width(&self) -> usize {
        self.spec.input_width()
    }

    pub fn output_width(&self) -> usize {
        self.spec.output_width()
    }

    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut out = vec![0.0; self.param_count];
        for shape in &self.shapes {
            let bound = 1.0 / (shape.inputs as f64).sqrt();
            let w = shape.weight_offset;
            for v in &mut out[w..w + shape.inputs * shape.outputs] {
                *v = rng.random_range(-bound..bound);
            }
            if let Some(b) = shape.bias_offset {
                for v in &mut out[b..b + shape.outputs] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        ParamVector::new(out).expect("uniform draws are finite")
    }

    pub fn cache(&self) -> MlpCache {
        let widest = *self.spec.layer_widths.iter().max().expect("validated");
        MlpCache {
            activations: self.spec.layer_widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
        }
    }

    fn check(&self, params: &[f64], input: &[f64]) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.param_count,
                params.len()
            )));
        }
        if input.len() != self.input_width() {
            return Err(Error::Config(format!(
                "expected input of width {}, got {}",
                self.input_width(),
                input.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        Ok(())
    }

    /// Checked forward pass.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        self.check(params, input)?;
        let mut cache = self.cache();
        Ok(self.forward_cached(params, input, &mut cache).to_vec())
    }

    /// Forward pass into `cache`; returns the output slice. Shapes are only
    /// debug-checked here.
    pub fn forward_cached<'c>(
        &self,
        params: &[f64],
        input: &[f64],
        cache: &'c mut MlpCache,
    ) -> &'c [f64] {
        debug_assert_eq!(params.len(), self.param_count);
        debug_assert_eq!(input.len(), self.input_width());
        cache.activations[0].copy_from_slice(input);
        let last = self.shapes.len() - 1;
        for (l, shape) in self.shapes.iter().enumerate() {
            let (before, after) = cache.activations.split_at_mut(l + 1);
            let x = &before[l];
            let y = &mut after[0];
            match shape.bias_offset {
                Some(b) => y.copy_from_slice(&params[b..b + shape.outputs]),
                None => y.iter_mut().for_each(|v| *v = 0.0),
            }
            let w = &params[shape.weight_offset..shape.weight_offset + shape.inputs * shape.outputs];
            // Column-wise accumulation skips zero inputs (one-hot observations).
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += w[i * shape.inputs + j] * xj;
                }
            }
            if l != last {
                let act = self.spec.activation;
                y.iter_mut().for_each(|v| *v = act.apply(*v));
            }
        }
        &cache.activations[last + 1]
    }

    /// Reverse pass for the evaluation stored in `cache`. Parameter gradients
    /// are accumulated into `grad_params` when given; input gradients
    /// overwrite `grad_input`.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &mut MlpCache,
        cotangent: &[f64],
        mut grad_params: Option<&mut [f64]>,
        mut grad_input: Option<&mut [f64]>,
    ) {
        debug_assert_eq!(cotangent.len(), self.output_width());
        let MlpCache {
            activations,
            delta,
            delta_prev,
        } = cache;
        delta.clear();
        delta.extend_from_slice(cotangent);
        for (l, shape) in self.shapes.iter().enumerate().rev() {
            let x = &activations[l];
            let w_range = shape.weight_offset..shape.weight_offset + shape.inputs * shape.outputs;
            if let Some(gp) = grad_params.as_deref_mut() {
                let gw = &mut gp[w_range.clone()];
                for (i, &di) in delta.iter().enumerate() {
                    if di == 0.0 {
                        continue;
                    }
                    let row = &mut gw[i * shape.inputs..(i + 1) * shape.inputs];
                    for (g, &xj) in row.iter_mut().zip(x.iter()) {
                        *g += di * xj;
                    }
                }
                if let Some(b) = shape.bias_offset {
                    for (g, &di) in gp[b..b + shape.outputs].iter_mut().zip(delta.iter()) {
                        *g += di;
                    }
                }
            }
            let need_prev = l > 0 || grad_input.is_some();
            if !need_prev {
                break;
            }
            let w = &params[w_range];
            delta_prev.clear();
            delta_prev.resize(shape.inputs, 0.0);
            for (i, &di) in delta.iter().enumerate() {
                if di == 0.0 {
                    continue;
                }
                let row = &w[i * shape.inputs..(i + 1) * shape.inputs];
                for (dp, &wij) in delta_prev.iter_mut().zip(row) {
                    *dp += wij * di;
                }
            }
            if l > 0 {
                let act = self.spec.activation;
                for (dp, &a) in delta_prev.iter_mut().zip(x.iter()) {
                    *dp *= act.derivative_from_output(a);
                }
                std::mem::swap(delta, delta_prev);
            } else if let Some(gi) = grad_input.as_deref_mut() {
                gi.copy_from_slice(delta_prev);
            }
        }
    }

    /// Checked gradient of `cotangent . output` with respect to parameters and input.
    pub fn grad(&self, params: &[f64], input: &[f64], cotangent: &[f64]) -> Result<Gradients> {
        self.check(params, input)?;
        if cotangent.len() != self.output_width() {
            return Err(Error::Config(format!(
                "cotangent has width {}, output has width {}",
                cotangent.len(),
                self.output_width()
            )));
        }
        let mut cache = self.cache();
        self.forward_cached(params, input, &mut cache);
        let mut wrt_params = vec![0.0; self.param_count];
        let mut wrt_inputs = vec![0.0; self.input_width()];
        self.backward(params, &mut cache, cotangent, Some(&mut wrt_params), Some(&mut wrt_inputs));
        Ok(Gradients {
            wrt_params,
            wrt_inputs,
        })
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    Mlp::new(spec.clone())?.forward(params, input)
}

pub fn mlp_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    output_cotangent: &[f64],
) -> Result<Gradients> {
    Mlp::new(spec.clone())?.grad(params, input, output_cotangent)
}
