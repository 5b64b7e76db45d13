//! Four-gate LSTM with a linear readout, scanned from the last timestep to
//! the first. The output at position `t` therefore summarises `inputs[t..]`.
//!
//! Flat layout: input weights `4H x I`, recurrent weights `4H x H`, gate
//! biases `4H`, readout weights `O x H`, readout bias `O`. Gate blocks are
//! ordered input, forget, cell, output; every matrix is row-major.

use rand::Rng;

use super::param::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmSpec {
    pub input_width: usize,
    pub hidden_width: usize,
    pub output_width: usize,
}

impl LstmSpec {
    pub fn new(input_width: usize, hidden_width: usize, output_width: usize) -> Result<Self> {
        let spec = Self {
            input_width,
            hidden_width,
            output_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden_width == 0 || self.output_width == 0 {
            return Err(Error::Config(format!("LSTM widths must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (i, h, o) = (self.input_width, self.hidden_width, self.output_width);
        4 * h * (i + h + 1) + o * (h + 1)
    }
}

/// Structured LSTM weights, mirroring the flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub input_weights: Vec<f64>,
    pub recurrent_weights: Vec<f64>,
    pub gate_bias: Vec<f64>,
    pub readout_weights: Vec<f64>,
    pub readout_bias: Vec<f64>,
}

impl LstmWeights {
    pub fn flatten(&self, spec: &LstmSpec) -> Result<ParamVector> {
        let (i, h, o) = (spec.input_width, spec.hidden_width, spec.output_width);
        let expected = [4 * h * i, 4 * h * h, 4 * h, o * h, o];
        let parts = [
            &self.input_weights,
            &self.recurrent_weights,
            &self.gate_bias,
            &self.readout_weights,
            &self.readout_bias,
        ];
        let mut out = Vec::with_capacity(spec.param_count());
        for (part, want) in parts.iter().zip(expected) {
            if part.len() != want {
                return Err(Error::Config(format!(
                    "LSTM weight block has {} entries, expected {want}",
                    part.len()
                )));
            }
            out.extend_from_slice(part);
        }
        ParamVector::new(out)
    }

    pub fn unflatten(spec: &LstmSpec, params: &ParamVector) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::Config(format!(
                "expected {} LSTM parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        let (i, h, o) = (spec.input_width, spec.hidden_width, spec.output_width);
        let mut cursor = 0;
        let mut take = |n: usize| {
            let v = params[cursor..cursor + n].to_vec();
            cursor += n;
            v
        };
        Ok(Self {
            input_weights: take(4 * h * i),
            recurrent_weights: take(4 * h * h),
            gate_bias: take(4 * h),
            readout_weights: take(o * h),
            readout_bias: take(o),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    wx: usize,
    wh: usize,
    b: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone)]
pub struct Lstm {
    spec: LstmSpec,
    off: Offsets,
}

/// Everything the backward pass needs from one gated step.
#[derive(Debug, Clone)]
struct StepRecord {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-nonlinearity gates, `[i, f, g, o]` blocks of width H.
    gates: Vec<f64>,
    c_tanh: Vec<f64>,
    h: Vec<f64>,
}

/// Forward scan with per-step records, indexed by input position.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    records: Vec<StepRecord>,
    pub outputs: Vec<Vec<f64>>,
}

/// Gradients of `sum_t cotangent_t . output_t`.
#[derive(Debug, Clone)]
pub struct LstmGradients {
    pub wrt_params: Vec<f64>,
    pub wrt_inputs: Vec<Vec<f64>>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    pub fn new(spec: LstmSpec) -> Result<Self> {
        spec.validate()?;
        let (i, h, o) = (spec.input_width, spec.hidden_width, spec.output_width);
        let wx = 0;
        let wh = wx + 4 * h * i;
        let b = wh + 4 * h * h;
        let wo = b + 4 * h;
        let bo = wo + o * h;
        debug_assert_eq!(bo + o, spec.param_count());
        Ok(Self {
            spec,
            off: Offsets { wx, wh, b, wo, bo },
        })
    }

    pub fn spec(&self) -> &LstmSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Fan-in scaled uniform initialisation, forget-gate bias set to one.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let (i, h, o) = (
            self.spec.input_width,
            self.spec.hidden_width,
            self.spec.output_width,
        );
        let gate_bound = 1.0 / ((i + h) as f64).sqrt();
        let out_bound = 1.0 / (h as f64).sqrt();
        let mut p = vec![0.0; self.param_count()];
        for v in &mut p[self.off.wx..self.off.b] {
            *v = rng.random_range(-gate_bound..gate_bound);
        }
        for (k, v) in p[self.off.b..self.off.wo].iter_mut().enumerate() {
            *v = if (h..2 * h).contains(&k) { 1.0 } else { 0.0 };
        }
        for v in &mut p[self.off.wo..self.off.bo] {
            *v = rng.random_range(-out_bound..out_bound);
        }
        for v in &mut p[self.off.bo..self.off.bo + o] {
            *v = 0.0;
        }
        ParamVector::new(p).expect("finite init")
    }

    fn check(&self, params: &[f64], inputs: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Config(format!(
                "expected {} LSTM parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::Usage("LSTM scan needs a non-empty sequence".into()));
        }
        for (t, x) in inputs.iter().enumerate() {
            if x.len() != self.spec.input_width {
                return Err(Error::Config(format!(
                    "input {t} has width {}, LSTM expects {}",
                    x.len(),
                    self.spec.input_width
                )));
            }
        }
        Ok(())
    }

    /// One gated step; writes gates, new cell and hidden state.
    fn step(
        &self,
        params: &[f64],
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        gates: &mut [f64],
        c: &mut [f64],
        c_tanh: &mut [f64],
        h: &mut [f64],
    ) {
        let (ni, nh) = (self.spec.input_width, self.spec.hidden_width);
        let wx = &params[self.off.wx..self.off.wh];
        let wh = &params[self.off.wh..self.off.b];
        let b = &params[self.off.b..self.off.wo];
        for r in 0..4 * nh {
            let mut z = b[r];
            let row_x = &wx[r * ni..(r + 1) * ni];
            for (w, xv) in row_x.iter().zip(x) {
                z += w * xv;
            }
            let row_h = &wh[r * nh..(r + 1) * nh];
            for (w, hv) in row_h.iter().zip(h_prev) {
                z += w * hv;
            }
            gates[r] = if (2 * nh..3 * nh).contains(&r) {
                z.tanh()
            } else {
                sigmoid(z)
            };
        }
        for k in 0..nh {
            let (ig, fg, gg, og) = (gates[k], gates[nh + k], gates[2 * nh + k], gates[3 * nh + k]);
            c[k] = fg * c_prev[k] + ig * gg;
            c_tanh[k] = c[k].tanh();
            h[k] = og * c_tanh[k];
        }
    }

    fn readout(&self, params: &[f64], h: &[f64], out: &mut [f64]) {
        let nh = self.spec.hidden_width;
        let wo = &params[self.off.wo..self.off.bo];
        let bo = &params[self.off.bo..self.off.bo + self.spec.output_width];
        for (r, y) in out.iter_mut().enumerate() {
            let mut acc = bo[r];
            for (w, hv) in wo[r * nh..(r + 1) * nh].iter().zip(h) {
                acc += w * hv;
            }
            *y = acc;
        }
    }

    /// Reversed scan over a flat `T x input_width` buffer into a flat
    /// `T x output_width` buffer, without recording the trace.
    pub fn scan_reversed_flat(&self, params: &[f64], inputs: &[f64], outputs: &mut [f64]) {
        let (ni, nh, no) = (
            self.spec.input_width,
            self.spec.hidden_width,
            self.spec.output_width,
        );
        let steps = inputs.len() / ni;
        debug_assert_eq!(outputs.len(), steps * no);
        let mut h = vec![0.0; nh];
        let mut c = vec![0.0; nh];
        let mut h_new = vec![0.0; nh];
        let mut c_new = vec![0.0; nh];
        let mut c_tanh = vec![0.0; nh];
        let mut gates = vec![0.0; 4 * nh];
        for t in (0..steps).rev() {
            self.step(
                params,
                &inputs[t * ni..(t + 1) * ni],
                &h,
                &c,
                &mut gates,
                &mut c_new,
                &mut c_tanh,
                &mut h_new,
            );
            std::mem::swap(&mut h, &mut h_new);
            std::mem::swap(&mut c, &mut c_new);
            self.readout(params, &h, &mut outputs[t * no..(t + 1) * no]);
        }
    }

    pub fn scan_reversed(&self, params: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check(params, inputs)?;
        let flat: Vec<f64> = inputs.iter().flatten().copied().collect();
        let no = self.spec.output_width;
        let mut out = vec![0.0; inputs.len() * no];
        self.scan_reversed_flat(params, &flat, &mut out);
        Ok(out.chunks(no).map(<[f64]>::to_vec).collect())
    }

    pub fn scan_reversed_traced(&self, params: &[f64], inputs: &[Vec<f64>]) -> Result<LstmTrace> {
        self.check(params, inputs)?;
        let (nh, no) = (self.spec.hidden_width, self.spec.output_width);
        let steps = inputs.len();
        let mut records: Vec<Option<StepRecord>> = vec![None; steps];
        let mut outputs = vec![vec![0.0; no]; steps];
        let mut h = vec![0.0; nh];
        let mut c = vec![0.0; nh];
        for t in (0..steps).rev() {
            let mut rec = StepRecord {
                h_prev: h.clone(),
                c_prev: c.clone(),
                gates: vec![0.0; 4 * nh],
                c_tanh: vec![0.0; nh],
                h: vec![0.0; nh],
            };
            let mut c_new = vec![0.0; nh];
            self.step(
                params,
                &inputs[t],
                &rec.h_prev,
                &rec.c_prev,
                &mut rec.gates,
                &mut c_new,
                &mut rec.c_tanh,
                &mut rec.h,
            );
            self.readout(params, &rec.h, &mut outputs[t]);
            h.copy_from_slice(&rec.h);
            c = c_new;
            records[t] = Some(rec);
        }
        Ok(LstmTrace {
            records: records.into_iter().map(|r| r.expect("every step recorded")).collect(),
            outputs,
        })
    }

    /// Backpropagation through the reversed scan recorded in `trace`.
    pub fn backward(
        &self,
        params: &[f64],
        inputs: &[Vec<f64>],
        trace: &LstmTrace,
        output_cotangents: &[Vec<f64>],
    ) -> Result<LstmGradients> {
        self.check(params, inputs)?;
        let (ni, nh, no) = (
            self.spec.input_width,
            self.spec.hidden_width,
            self.spec.output_width,
        );
        if output_cotangents.len() != inputs.len()
            || output_cotangents.iter().any(|c| c.len() != no)
            || trace.records.len() != inputs.len()
        {
            return Err(Error::Config("cotangents do not match the LSTM trace".into()));
        }
        let mut g = vec![0.0; self.param_count()];
        let mut wrt_inputs = vec![vec![0.0; ni]; inputs.len()];
        let wx = &params[self.off.wx..self.off.wh];
        let wh = &params[self.off.wh..self.off.b];
        let wo = &params[self.off.wo..self.off.bo];
        let mut dh_carry = vec![0.0; nh];
        let mut dc_carry = vec![0.0; nh];
        let mut dz = vec![0.0; 4 * nh];
        // The forward scan visited t = T-1 .. 0, so the reverse pass runs 0 .. T-1.
        for t in 0..inputs.len() {
            let rec = &trace.records[t];
            let dy = &output_cotangents[t];
            let mut dh = dh_carry.clone();
            for (r, &dyr) in dy.iter().enumerate() {
                g[self.off.bo + r] += dyr;
                for k in 0..nh {
                    g[self.off.wo + r * nh + k] += dyr * rec.h[k];
                    dh[k] += wo[r * nh + k] * dyr;
                }
            }
            for k in 0..nh {
                let (ig, fg, gg, og) = (
                    rec.gates[k],
                    rec.gates[nh + k],
                    rec.gates[2 * nh + k],
                    rec.gates[3 * nh + k],
                );
                let ct = rec.c_tanh[k];
                let dc = dc_carry[k] + dh[k] * og * (1.0 - ct * ct);
                dz[k] = dc * gg * ig * (1.0 - ig);
                dz[nh + k] = dc * rec.c_prev[k] * fg * (1.0 - fg);
                dz[2 * nh + k] = dc * ig * (1.0 - gg * gg);
                dz[3 * nh + k] = dh[k] * ct * og * (1.0 - og);
                dc_carry[k] = dc * fg;
            }
            dh_carry.iter_mut().for_each(|v| *v = 0.0);
            let x = &inputs[t];
            for r in 0..4 * nh {
                let d = dz[r];
                g[self.off.b + r] += d;
                for j in 0..ni {
                    g[self.off.wx + r * ni + j] += d * x[j];
                    wrt_inputs[t][j] += wx[r * ni + j] * d;
                }
                for k in 0..nh {
                    g[self.off.wh + r * nh + k] += d * rec.h_prev[k];
                    dh_carry[k] += wh[r * nh + k] * d;
                }
            }
        }
        Ok(LstmGradients {
            wrt_params: g,
            wrt_inputs,
        })
    }
}

pub fn lstm_scan_reversed(
    spec: &LstmSpec,
    params: &ParamVector,
    inputs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    Lstm::new(*spec)?.scan_reversed(params, inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff::{finite_diff_grad, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, steps: usize, width: usize) -> Vec<Vec<f64>> {
        (0..steps)
            .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    /// Independent unroll over the structured weights.
    fn reference_unroll(spec: &LstmSpec, w: &LstmWeights, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (ni, nh, no) = (spec.input_width, spec.hidden_width, spec.output_width);
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = vec![0.0; nh];
        let mut c = vec![0.0; nh];
        let mut out = vec![vec![]; inputs.len()];
        for t in (0..inputs.len()).rev() {
            let pre = |gate: usize, k: usize| {
                let r = gate * nh + k;
                let mut z = w.gate_bias[r];
                for j in 0..ni {
                    z += w.input_weights[r * ni + j] * inputs[t][j];
                }
                for m in 0..nh {
                    z += w.recurrent_weights[r * nh + m] * h[m];
                }
                z
            };
            let mut h_new = vec![0.0; nh];
            let mut c_new = vec![0.0; nh];
            for k in 0..nh {
                let i = sig(pre(0, k));
                let f = sig(pre(1, k));
                let g = pre(2, k).tanh();
                let o = sig(pre(3, k));
                c_new[k] = f * c[k] + i * g;
                h_new[k] = o * c_new[k].tanh();
            }
            h = h_new;
            c = c_new;
            out[t] = (0..no)
                .map(|r| w.readout_bias[r] + (0..nh).map(|k| w.readout_weights[r * nh + k] * h[k]).sum::<f64>())
                .collect();
        }
        out
    }

    #[test]
    fn single_step_equals_one_gated_step_from_zero() {
        let spec = LstmSpec::new(3, 4, 2).unwrap();
        let lstm = Lstm::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = lstm.init_params(&mut rng);
        let x = random_seq(&mut rng, 1, 3);
        let w = LstmWeights::unflatten(&spec, &params).unwrap();
        let expected = reference_unroll(&spec, &w, &x);
        let got = lstm.scan_reversed(&params, &x).unwrap();
        for (a, b) in got[0].iter().zip(&expected[0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn four_step_sequence_matches_reference_unroll() {
        let spec = LstmSpec::new(5, 6, 3).unwrap();
        let lstm = Lstm::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = lstm.init_params(&mut rng);
        let x = random_seq(&mut rng, 4, 5);
        let expected = reference_unroll(&spec, &LstmWeights::unflatten(&spec, &params).unwrap(), &x);
        let got = lstm.scan_reversed(&params, &x).unwrap();
        let traced = lstm.scan_reversed_traced(&params, &x).unwrap();
        for t in 0..4 {
            for k in 0..3 {
                assert!((got[t][k] - expected[t][k]).abs() < 1e-13);
                assert_eq!(got[t][k], traced.outputs[t][k]);
            }
        }
    }

    #[test]
    fn reversed_scan_causality() {
        let spec = LstmSpec::new(2, 3, 1).unwrap();
        let lstm = Lstm::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = lstm.init_params(&mut rng);
        let x = random_seq(&mut rng, 6, 2);
        let base = lstm.scan_reversed(&params, &x).unwrap();
        for perturbed in 0..6 {
            let mut y = x.clone();
            y[perturbed][0] += 0.5;
            let out = lstm.scan_reversed(&params, &y).unwrap();
            for t in 0..6 {
                if t > perturbed {
                    assert_eq!(out[t], base[t], "position {t} saw a change at {perturbed}");
                } else {
                    assert_ne!(out[t], base[t]);
                }
            }
        }
    }

    #[test]
    fn empty_sequence_is_a_usage_error() {
        let spec = LstmSpec::new(2, 3, 1).unwrap();
        let lstm = Lstm::new(spec).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        assert!(matches!(lstm.scan_reversed(&params, &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn parameter_and_input_gradients_match_finite_differences() {
        let spec = LstmSpec::new(3, 4, 2).unwrap();
        let lstm = Lstm::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let params = lstm.init_params(&mut rng);
            let x = random_seq(&mut rng, 5, 3);
            let cot = random_seq(&mut rng, 5, 2);
            let trace = lstm.scan_reversed_traced(&params, &x).unwrap();
            let grads = lstm.backward(&params, &x, &trace, &cot).unwrap();
            let objective = |p: &[f64], xs: &[Vec<f64>]| {
                let out = lstm.scan_reversed(p, xs).unwrap();
                out.iter()
                    .zip(&cot)
                    .map(|(o, c)| o.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
                    .sum::<f64>()
            };
            let fd = finite_diff_grad(|p| objective(p, &x), &params, 1e-6).unwrap();
            for (a, b) in grads.wrt_params.iter().zip(&fd) {
                assert!(relative_error(*a, *b, 1e-4) < 1e-5, "{a} vs {b}");
            }
            let flat: Vec<f64> = x.iter().flatten().copied().collect();
            let fd_x = finite_diff_grad(
                |v| objective(&params, &v.chunks(3).map(<[f64]>::to_vec).collect::<Vec<_>>()),
                &flat,
                1e-6,
            )
            .unwrap();
            let analytic: Vec<f64> = grads.wrt_inputs.iter().flatten().copied().collect();
            for (a, b) in analytic.iter().zip(&fd_x) {
                assert!(relative_error(*a, *b, 1e-4) < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn init_sets_forget_bias_to_one() {
        let spec = LstmSpec::new(2, 3, 1).unwrap();
        let lstm = Lstm::new(spec).unwrap();
        let params = lstm.init_params(&mut ChaCha8Rng::seed_from_u64(0));
        let w = LstmWeights::unflatten(&spec, &params).unwrap();
        assert_eq!(&w.gate_bias[3..6], &[1.0, 1.0, 1.0]);
        assert_eq!(w.flatten(&spec).unwrap(), params);
    }
}
