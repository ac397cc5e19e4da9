//! Central finite-difference checks of the analytic gradients.
//!
//! The numeric side only ever calls forward passes, so it shares no code path
//! with backpropagation.

use rand::Rng;

use super::layers::{Layer, Shape};
use super::network::{mse_loss, Network, Trace};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-4;

/// Agreement between analytic and numeric gradients of one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct GradComparison {
    pub name: String,
    pub count: usize,
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)`
    pub norm_relative: f64,
    /// Largest `|a - n| / max(|a|, |n|)` over entries with `max(|a|, |n|) >= floor`.
    pub max_relative: f64,
    /// Entries left out because a probe flipped some rectifier on or off.
    pub kinks: usize,
}

impl GradComparison {
    pub fn new(name: impl Into<String>, analytic: &[f64], numeric: &[f64], floor: f64) -> Self {
        let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        let max_relative = analytic
            .iter()
            .zip(numeric)
            .filter(|(a, n)| a.abs().max(n.abs()) >= floor)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
            .fold(0.0, f64::max);
        Self {
            name: name.into(),
            count: analytic.len(),
            norm_relative: if scale > 0.0 { diff / scale } else { 0.0 },
            max_relative,
            kinks: 0,
        }
    }

    /// Like `new`, dropping entries where `keep[i]` is false.
    pub fn masked(name: impl Into<String>, analytic: &[f64], numeric: &[f64], keep: &[bool], floor: f64) -> Self {
        let pick = |v: &[f64]| -> Vec<f64> { v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect() };
        let mut c = Self::new(name, &pick(analytic), &pick(numeric), floor);
        c.count = analytic.len();
        c.kinks = keep.iter().filter(|&&k| !k).count();
        c
    }

    pub fn worst(&self) -> f64 {
        self.norm_relative.max(self.max_relative)
    }
}

/// Central differences of a function that also reports its rectifier pattern.
/// An entry is kept only if both probes see the same pattern as `base`.
fn central_masked<F, P>(x: &[f64], step: f64, base: &P, mut f: F) -> (Vec<f64>, Vec<bool>)
where
    F: FnMut(&[f64]) -> (f64, P),
    P: PartialEq,
{
    let mut probe = x.to_vec();
    let mut keep = Vec::with_capacity(x.len());
    let grads = (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let (up, pu) = f(&probe);
            probe[i] = orig - step;
            let (down, pd) = f(&probe);
            probe[i] = orig;
            keep.push(pu == *base && pd == *base);
            (up - down) / (2.0 * step)
        })
        .collect();
    (grads, keep)
}

fn central<F: FnMut(&[f64]) -> f64>(x: &[f64], step: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Compares backpropagated gradients of the MSE loss for every learnable layer
/// and the input against central differences.
pub fn check_network(net: &Network, input: &[f64], target: &[f64], step: f64) -> Result<Vec<GradComparison>> {
    let trace = net.trace(input)?;
    let (_, grad_out) = mse_loss(trace.output(), target);
    let mut grads = vec![0.0; net.params().len()];
    let grad_input = net.backward(&trace, &grad_out, &mut grads);

    let loss_with = |params: &[f64], x: &[f64]| -> (f64, Vec<bool>) {
        let probe = Network::with_params(net.config().clone(), params.to_vec()).expect("same config");
        let t = probe.trace(x).expect("validated input");
        (mse_loss(t.output(), target).0, relu_pattern(&probe, &t))
    };
    let base = relu_pattern(net, &trace);

    let mut out = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        if !layer.is_learnable() {
            continue;
        }
        let range = net.param_range(i);
        let (numeric, keep) = central_masked(&net.params()[range.clone()], step, &base, |slice| {
            let mut p = net.params().to_vec();
            p[range.clone()].copy_from_slice(slice);
            loss_with(&p, input)
        });
        out.push(GradComparison::masked(
            format!("layer{i}:{}", layer_name(layer)),
            &grads[range],
            &numeric,
            &keep,
            1e-8,
        ));
    }
    let (numeric_input, keep) = central_masked(input, step, &base, |x| loss_with(net.params(), x));
    out.push(GradComparison::masked("input", &grad_input, &numeric_input, &keep, 1e-8));
    Ok(out)
}

fn relu_pattern(net: &Network, trace: &Trace) -> Vec<bool> {
    net.layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Layer::Relu))
        .flat_map(|(i, _)| trace.activation(i).iter().map(|&v| v > 0.0))
        .collect()
}

pub fn layer_name(layer: &Layer) -> &'static str {
    match layer {
        Layer::Conv(_) => "conv",
        Layer::Relu => "relu",
        Layer::AvgPool(_) => "pool",
        Layer::Dense(_) => "dense",
    }
}

/// Checks one layer in isolation through the scalar `sum_k r_k * out_k` with a
/// random projection `r`. Returns comparisons for parameters (if any) and input.
pub fn check_layer<R: Rng>(
    layer: &Layer,
    shape: Shape,
    params: &[f64],
    input: &[f64],
    rng: &mut R,
    step: f64,
) -> Result<Vec<GradComparison>> {
    let out_shape = layer.output_shape(shape)?;
    let proj: Vec<f64> = (0..out_shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let objective = |p: &[f64], x: &[f64]| -> f64 {
        let mut out = vec![0.0; out_shape.len()];
        layer.forward(p, shape, x, &mut out);
        out.iter().zip(&proj).map(|(o, r)| o * r).sum()
    };

    let mut output = vec![0.0; out_shape.len()];
    layer.forward(params, shape, input, &mut output);
    let mut grad_params = vec![0.0; params.len()];
    let mut grad_in = vec![0.0; input.len()];
    layer.backward(params, shape, input, &output, &proj, &mut grad_params, Some(&mut grad_in));

    let name = layer_name(layer);
    let mut out = Vec::new();
    if !params.is_empty() {
        let numeric = central(params, step, |p| objective(p, input));
        out.push(GradComparison::new(format!("{name}:params"), &grad_params, &numeric, 1e-8));
    }
    let numeric = central(input, step, |x| objective(params, x));
    out.push(GradComparison::new(format!("{name}:input"), &grad_in, &numeric, 1e-8));
    Ok(out)
}

/// Checks the gradient of the parameter-space MSE loss itself.
pub fn check_loss(pred: &[f64], target: &[f64], step: f64) -> GradComparison {
    let (_, analytic) = mse_loss(pred, target);
    let numeric = central(pred, step, |p| mse_loss(p, target).0);
    GradComparison::new("mse", &analytic, &numeric, 1e-8)
}
