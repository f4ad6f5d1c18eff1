//! Multi-scale targets and the coarse-to-fine L1 used for supervision.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::l1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Two = 2,
    Four = 4,
}

impl TryFrom<usize> for Factor {
    type Error = Error;

    fn try_from(v: usize) -> Result<Self> {
        match v {
            2 => Ok(Factor::Two),
            4 => Ok(Factor::Four),
            other => Err(Error::invalid(format!("downsample factor must be 2 or 4, got {other}"))),
        }
    }
}

// Mirror index without repeating the edge sample; a length-1 axis repeats.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Box (area-average) downsampling. Dimensions that are not a multiple of
/// the factor are first extended by reflection.
pub fn downsample(img: &Image, factor: Factor) -> Image {
    let f = factor as usize;
    let (w, h) = img.dims();
    let (ow, oh) = (w.div_ceil(f), h.div_ceil(f));
    let norm = 1.0 / (f * f) as f64;
    let mut out = Vec::with_capacity(ow * oh * 3);
    for oy in 0..oh {
        for ox in 0..ow {
            let mut acc = [0.0; 3];
            for dy in 0..f {
                let sy = reflect(oy * f + dy, h);
                for dx in 0..f {
                    let px = img.pixel(reflect(ox * f + dx, w), sy);
                    for c in 0..3 {
                        acc[c] += px[c];
                    }
                }
            }
            out.extend(acc.iter().map(|v| (v * norm).clamp(0.0, 1.0)));
        }
    }
    Image::from_raw(ow, oh, out)
}

/// Full, half and quarter resolution versions of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid {
    pub full: Image,
    pub half: Image,
    pub quarter: Image,
}

impl Pyramid {
    pub fn build(img: &Image) -> Self {
        Pyramid {
            full: img.clone(),
            half: downsample(img, Factor::Two),
            quarter: downsample(img, Factor::Four),
        }
    }
}

/// Weights of the half and quarter scale terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleWeights {
    pub half: f64,
    pub quarter: f64,
}

impl Default for ScaleWeights {
    fn default() -> Self {
        ScaleWeights {
            half: 0.5,
            quarter: 0.25,
        }
    }
}

/// `L1(full) + λ½·L1(half) + λ¼·L1(quarter)`.
pub fn multiscale_l1(outputs: &Pyramid, targets: &Pyramid, weights: ScaleWeights) -> Result<f64> {
    Ok(l1(&outputs.full, &targets.full)?
        + weights.half * l1(&outputs.half, &targets.half)?
        + weights.quarter * l1(&outputs.quarter, &targets.quarter)?)
}
