//! Procedural stand-in for an encoder run.
//!
//! Each frame draws a Cauchy scale `gamma`, renders band-limited noise whose
//! amplitude and cutoff grow with it, derives a quadtree and intra modes from
//! local pixel statistics, and labels the frame with the scaled entropy curve
//! of that `gamma`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{synth_curve, CauchyParams};
use crate::error::{Error, Result};
use crate::features::{CuRect, GrayFrame, PuMode, PU_GRID};
use crate::model::OperationalPoint;

use super::metadata::CodingMetadata;

/// QP of the single coding pass.
pub const ANCHOR_QP: f64 = 10.0;
/// QPs at which frames are labelled.
pub const LABEL_QPS: [f64; 8] = [10.0, 14.0, 18.0, 22.0, 26.0, 30.0, 34.0, 38.0];
pub const GAMMA_RANGE: (f64, f64) = (1.0, 64.0);

const CTU_SIZE: u32 = 64;
const MIN_CU: u32 = 8;
/// Local variance (in squared 8-bit levels) at which a CU is split half the time.
const SPLIT_VARIANCE: f64 = 60.0;
/// Below this variance a 16x16 block takes a non-angular mode.
const SMOOTH_VARIANCE: f64 = 40.0;

/// A generated frame with its sidecar and the scale it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub frame: GrayFrame,
    pub metadata: CodingMetadata,
    pub gamma: f64,
}

pub fn synth_corpus(count: usize, seed: u64, size: (u32, u32)) -> Result<Vec<SynthFrame>> {
    if count == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    let (width, height) = size;
    if width == 0 || height == 0 {
        return Err(Error::Config(format!("frame size must be positive, got {width}x{height}")));
    }
    (0..count).map(|i| synth_frame(i, seed, width, height)).collect()
}

fn synth_frame(index: usize, seed: u64, width: u32, height: u32) -> Result<SynthFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let (lo, hi) = (GAMMA_RANGE.0.ln(), GAMMA_RANGE.1.ln());
    let t: f64 = rng.gen();
    let gamma = (lo + (hi - lo) * t).exp();

    let frame = render_texture(&mut rng, width, height, t)?;
    let cus = quadtree(&mut rng, &frame);
    let pus = intra_modes(&mut rng, &frame);

    let params = CauchyParams::new(gamma);
    let labels = synth_curve(&params, &LABEL_QPS, width as f64 * height as f64)?;
    let r0 = labels.samples()[0].rate;
    let metadata = CodingMetadata {
        frame_id: format!("synth_{index:05}"),
        width,
        height,
        cus,
        pus,
        anchor: OperationalPoint::new(ANCHOR_QP, r0)?,
        labels: Some(labels),
    };
    Ok(SynthFrame { frame, metadata, gamma })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `t in [0, 1]` is the normalized log-scale of gamma: higher means stronger,
/// finer texture.
fn render_texture(rng: &mut ChaCha8Rng, width: u32, height: u32, t: f64) -> Result<GrayFrame> {
    let (w, h) = (width as usize, height as usize);
    let mut noise: Vec<f64> = (0..w * h).map(|_| gaussian(rng)).collect();

    let radius = (3.0 - 2.0 * t).round() as usize;
    box_blur(&mut noise, w, h, radius);
    let var = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
    let inv_std = if var > 0.0 { var.sqrt().recip() } else { 0.0 };

    let amplitude = 4.0 + 36.0 * t;
    let base = rng.gen_range(90.0..166.0);
    let (gx, gy) = (rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
    let (fx, fy, phase) = (
        rng.gen_range(0.5..2.0) * std::f64::consts::TAU / w as f64,
        rng.gen_range(0.5..2.0) * std::f64::consts::TAU / h as f64,
        rng.gen_range(0.0..std::f64::consts::TAU),
    );

    let pixels = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            // smooth envelope in [0.25, 1] varies texture strength across the frame
            let env = 0.625 + 0.375 * ((fx * x as f64 + phase).sin() * (fy * y as f64).cos());
            let ramp = gx * (x as f64 - w as f64 / 2.0) + gy * (y as f64 - h as f64 / 2.0);
            let v = base + ramp + amplitude * env * noise[y * w + x] * inv_std;
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayFrame::new(width, height, pixels)
}

fn box_blur(data: &mut [f64], w: usize, h: usize, radius: usize) {
    if radius == 0 {
        return;
    }
    let norm = 1.0 / (2 * radius + 1) as f64;
    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (0..=2 * radius)
                .map(|k| data[y * w + (x + w * 4 + k - radius) % w])
                .sum();
            tmp[y * w + x] = s * norm;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (0..=2 * radius)
                .map(|k| tmp[((y + h * 4 + k - radius) % h) * w + x])
                .sum();
            data[y * w + x] = s * norm;
        }
    }
}

fn block_variance(frame: &GrayFrame, x: u32, y: u32, w: u32, h: u32) -> f64 {
    let (mut s, mut s2) = (0.0, 0.0);
    for row in y..y + h {
        for col in x..x + w {
            let v = frame.get(col, row) as f64;
            s += v;
            s2 += v * v;
        }
    }
    let n = (w * h) as f64;
    (s2 / n - (s / n).powi(2)).max(0.0)
}

fn quadtree(rng: &mut ChaCha8Rng, frame: &GrayFrame) -> Vec<CuRect> {
    let mut out = Vec::new();
    for y in (0..frame.height()).step_by(CTU_SIZE as usize) {
        for x in (0..frame.width()).step_by(CTU_SIZE as usize) {
            split_block(rng, frame, x, y, CTU_SIZE, &mut out);
        }
    }
    out
}

fn split_block(rng: &mut ChaCha8Rng, frame: &GrayFrame, x: u32, y: u32, size: u32, out: &mut Vec<CuRect>) {
    if x >= frame.width() || y >= frame.height() {
        return;
    }
    let w = size.min(frame.width() - x);
    let h = size.min(frame.height() - y);
    let crosses_edge = w < size || h < size;
    let split = if size <= MIN_CU {
        false
    } else if crosses_edge {
        true
    } else {
        let var = block_variance(frame, x, y, w, h);
        // logistic in log-variance; larger blocks split more readily
        let bias = (size as f64 / MIN_CU as f64).log2() * 0.5;
        let z = (var / SPLIT_VARIANCE).ln() * 1.5 + bias - 1.0;
        rng.gen::<f64>() < 1.0 / (1.0 + (-z).exp())
    };
    if split {
        let half = size / 2;
        for (dx, dy) in [(0, 0), (half, 0), (0, half), (half, half)] {
            split_block(rng, frame, x + dx, y + dy, half, out);
        }
    } else {
        out.push(CuRect { x, y, w, h });
    }
}

fn intra_modes(rng: &mut ChaCha8Rng, frame: &GrayFrame) -> Vec<PuMode> {
    let mut out = Vec::new();
    for y in (0..frame.height()).step_by(PU_GRID as usize) {
        for x in (0..frame.width()).step_by(PU_GRID as usize) {
            let w = PU_GRID.min(frame.width() - x);
            let h = PU_GRID.min(frame.height() - y);
            let mode = if block_variance(frame, x, y, w, h) < SMOOTH_VARIANCE {
                // planar or DC
                rng.gen_range(0..2u8)
            } else {
                let (mut gx, mut gy) = (0.0f64, 0.0f64);
                for row in y..y + h {
                    for col in x..x + w {
                        let c = frame.get(col, row) as f64;
                        if col + 1 < x + w {
                            gx += (frame.get(col + 1, row) as f64 - c).abs();
                        }
                        if row + 1 < y + h {
                            gy += (frame.get(col, row + 1) as f64 - c).abs();
                        }
                    }
                }
                // angular modes 2..=34 sweep from horizontal to vertical edges
                let angle = gy.atan2(gx) / std::f64::consts::FRAC_PI_2;
                let jitter = rng.gen_range(-3i32..=3);
                (2 + (angle * 32.0).round() as i32 + jitter).clamp(2, 34) as u8
            };
            out.push(PuMode { x, y, mode });
        }
    }
    out
}
