//! Layers over flat `c x h x w` volumes with externally owned parameters.
//!
//! Parameters and their gradients live in one flat buffer owned by the
//! network; each layer sees only its own slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 2-D convolution with zero padding `kernel / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvgPool {
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv(Conv2d),
    Relu,
    AvgPool(AvgPool),
    Dense(Dense),
}

/// Output indices `o` with `o * stride + k - pad` inside `[0, len)`.
fn valid_range(out_len: usize, in_len: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    // largest o with o * stride + k - pad <= in_len - 1
    let hi = if in_len + pad < k + 1 {
        0
    } else {
        ((in_len - 1 + pad - k) / stride + 1).min(out_len)
    };
    (lo.min(hi), hi)
}

impl Conv2d {
    fn pad(&self) -> usize {
        self.kernel / 2
    }

    fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.kernel * self.kernel
    }

    fn output_shape(&self, s: Shape) -> Result<Shape> {
        if s.c != self.in_c {
            return Err(Error::Shape(format!("conv expects {} channels, got {}", self.in_c, s.c)));
        }
        let p = self.pad();
        if s.h + 2 * p < self.kernel || s.w + 2 * p < self.kernel || self.stride == 0 {
            return Err(Error::Shape(format!("conv kernel {} does not fit {}x{}", self.kernel, s.h, s.w)));
        }
        Ok(Shape::new(
            self.out_c,
            (s.h + 2 * p - self.kernel) / self.stride + 1,
            (s.w + 2 * p - self.kernel) / self.stride + 1,
        ))
    }

    fn forward(&self, params: &[f64], s: Shape, o: Shape, input: &[f64], out: &mut [f64]) {
        let (weights, bias) = params.split_at(self.weight_len());
        let (k, st, p) = (self.kernel, self.stride, self.pad());
        for oc in 0..self.out_c {
            let plane = &mut out[oc * o.h * o.w..(oc + 1) * o.h * o.w];
            plane.fill(bias[oc]);
            for ic in 0..self.in_c {
                let src = &input[ic * s.h * s.w..(ic + 1) * s.h * s.w];
                for ky in 0..k {
                    let (y0, y1) = valid_range(o.h, s.h, st, ky, p);
                    for kx in 0..k {
                        let wv = weights[((oc * self.in_c + ic) * k + ky) * k + kx];
                        let (x0, x1) = valid_range(o.w, s.w, st, kx, p);
                        for oy in y0..y1 {
                            let row = &src[(oy * st + ky - p) * s.w..];
                            let dst = &mut plane[oy * o.w..(oy + 1) * o.w];
                            if st == 1 {
                                let src_row = &row[x0 + kx - p..x1 + kx - p];
                                for (d, v) in dst[x0..x1].iter_mut().zip(src_row) {
                                    *d += wv * v;
                                }
                            } else {
                                for ox in x0..x1 {
                                    dst[ox] += wv * row[ox * st + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        params: &[f64],
        s: Shape,
        o: Shape,
        input: &[f64],
        grad_out: &[f64],
        grad_params: &mut [f64],
        grad_in: Option<&mut [f64]>,
    ) {
        let (weights, _) = params.split_at(self.weight_len());
        let (gw, gb) = grad_params.split_at_mut(self.weight_len());
        let (k, st, p) = (self.kernel, self.stride, self.pad());
        let mut grad_in = grad_in;
        if let Some(gi) = grad_in.as_deref_mut() {
            gi.fill(0.0);
        }
        for oc in 0..self.out_c {
            let go = &grad_out[oc * o.h * o.w..(oc + 1) * o.h * o.w];
            gb[oc] += go.iter().sum::<f64>();
            for ic in 0..self.in_c {
                let src = &input[ic * s.h * s.w..(ic + 1) * s.h * s.w];
                for ky in 0..k {
                    let (y0, y1) = valid_range(o.h, s.h, st, ky, p);
                    for kx in 0..k {
                        let widx = ((oc * self.in_c + ic) * k + ky) * k + kx;
                        let wv = weights[widx];
                        let (x0, x1) = valid_range(o.w, s.w, st, kx, p);
                        let mut acc = 0.0;
                        for oy in y0..y1 {
                            let iy = oy * st + ky - p;
                            let g = &go[oy * o.w..(oy + 1) * o.w];
                            let row = &src[iy * s.w..(iy + 1) * s.w];
                            let grow = grad_in
                                .as_deref_mut()
                                .map(|gi| &mut gi[ic * s.h * s.w + iy * s.w..ic * s.h * s.w + (iy + 1) * s.w]);
                            if st == 1 {
                                let (g, row) = (&g[x0..x1], &row[x0 + kx - p..x1 + kx - p]);
                                acc += g.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                                if let Some(grow) = grow {
                                    for (d, v) in grow[x0 + kx - p..x1 + kx - p].iter_mut().zip(g) {
                                        *d += wv * v;
                                    }
                                }
                            } else {
                                for ox in x0..x1 {
                                    acc += g[ox] * row[ox * st + kx - p];
                                }
                                if let Some(grow) = grow {
                                    for ox in x0..x1 {
                                        grow[ox * st + kx - p] += wv * g[ox];
                                    }
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv(c) => c.weight_len() + c.out_c,
            Layer::Dense(d) => d.inputs * d.outputs + d.outputs,
            Layer::Relu | Layer::AvgPool(_) => 0,
        }
    }

    pub fn is_learnable(&self) -> bool {
        self.param_count() > 0
    }

    pub fn output_shape(&self, s: Shape) -> Result<Shape> {
        match self {
            Layer::Conv(c) => c.output_shape(s),
            Layer::Relu => Ok(s),
            Layer::AvgPool(pool) => {
                if pool.size == 0 || s.h % pool.size != 0 || s.w % pool.size != 0 {
                    return Err(Error::Shape(format!(
                        "pool size {} does not divide {}x{}",
                        pool.size, s.h, s.w
                    )));
                }
                Ok(Shape::new(s.c, s.h / pool.size, s.w / pool.size))
            }
            Layer::Dense(d) => {
                if s.len() != d.inputs {
                    return Err(Error::Shape(format!(
                        "dense layer expects {} inputs, got {} ({}x{}x{})",
                        d.inputs,
                        s.len(),
                        s.c,
                        s.h,
                        s.w
                    )));
                }
                Ok(Shape::new(d.outputs, 1, 1))
            }
        }
    }

    /// Fan-in scaled uniform weights, zero biases.
    pub fn init<R: Rng>(&self, rng: &mut R, params: &mut [f64]) {
        let (fan_in, weights, gain) = match self {
            Layer::Conv(c) => (c.in_c * c.kernel * c.kernel, c.weight_len(), 6.0),
            Layer::Dense(d) => (d.inputs, d.inputs * d.outputs, 3.0),
            _ => return,
        };
        let limit = (gain / fan_in as f64).sqrt();
        for w in &mut params[..weights] {
            *w = rng.gen_range(-limit..limit);
        }
        params[weights..].fill(0.0);
    }

    pub fn forward(&self, params: &[f64], s: Shape, input: &[f64], out: &mut [f64]) {
        match self {
            Layer::Conv(c) => {
                let o = c.output_shape(s).expect("shape validated at construction");
                c.forward(params, s, o, input, out);
            }
            Layer::Relu => {
                for (y, &x) in out.iter_mut().zip(input) {
                    *y = x.max(0.0);
                }
            }
            Layer::AvgPool(pool) => {
                let k = pool.size;
                let (oh, ow) = (s.h / k, s.w / k);
                let norm = 1.0 / (k * k) as f64;
                out.fill(0.0);
                for c in 0..s.c {
                    for y in 0..s.h {
                        let src = &input[(c * s.h + y) * s.w..(c * s.h + y + 1) * s.w];
                        let dst = &mut out[(c * oh + y / k) * ow..(c * oh + y / k + 1) * ow];
                        for (x, v) in src.iter().enumerate() {
                            dst[x / k] += v;
                        }
                    }
                }
                out.iter_mut().for_each(|v| *v *= norm);
            }
            Layer::Dense(d) => {
                let (weights, bias) = params.split_at(d.inputs * d.outputs);
                for (j, y) in out.iter_mut().enumerate() {
                    let row = &weights[j * d.inputs..(j + 1) * d.inputs];
                    *y = bias[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grad_params` and, when asked,
    /// overwrites `grad_in` with the gradient with respect to the input.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        params: &[f64],
        s: Shape,
        input: &[f64],
        output: &[f64],
        grad_out: &[f64],
        grad_params: &mut [f64],
        grad_in: Option<&mut [f64]>,
    ) {
        match self {
            Layer::Conv(c) => {
                let o = c.output_shape(s).expect("shape validated at construction");
                c.backward(params, s, o, input, grad_out, grad_params, grad_in);
            }
            Layer::Relu => {
                if let Some(gi) = grad_in {
                    for ((g, &go), &y) in gi.iter_mut().zip(grad_out).zip(output) {
                        *g = if y > 0.0 { go } else { 0.0 };
                    }
                }
            }
            Layer::AvgPool(pool) => {
                if let Some(gi) = grad_in {
                    let k = pool.size;
                    let (oh, ow) = (s.h / k, s.w / k);
                    let norm = 1.0 / (k * k) as f64;
                    for c in 0..s.c {
                        for y in 0..s.h {
                            let src = &grad_out[(c * oh + y / k) * ow..(c * oh + y / k + 1) * ow];
                            let dst = &mut gi[(c * s.h + y) * s.w..(c * s.h + y + 1) * s.w];
                            for (x, g) in dst.iter_mut().enumerate() {
                                *g = src[x / k] * norm;
                            }
                        }
                    }
                }
            }
            Layer::Dense(d) => {
                let (weights, _) = params.split_at(d.inputs * d.outputs);
                let (gw, gb) = grad_params.split_at_mut(d.inputs * d.outputs);
                for (j, &go) in grad_out.iter().enumerate() {
                    gb[j] += go;
                    for (g, x) in gw[j * d.inputs..(j + 1) * d.inputs].iter_mut().zip(input) {
                        *g += go * x;
                    }
                }
                if let Some(gi) = grad_in {
                    gi.fill(0.0);
                    for (j, &go) in grad_out.iter().enumerate() {
                        for (g, w) in gi.iter_mut().zip(&weights[j * d.inputs..(j + 1) * d.inputs]) {
                            *g += go * w;
                        }
                    }
                }
            }
        }
    }
}
