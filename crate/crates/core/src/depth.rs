//! Depth maps supplied from outside (16-bit grayscale PNG with an optional
//! JSON sidecar) and analytic depth fields for fixtures.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asm::DepthMap;
use crate::error::{Error, Result};
use crate::image::Plane;

/// Added before reciprocating inverse depth.
pub const INVERSE_EPSILON: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    MinMax,
    /// Maps `[lo, hi]` (in file units scaled to `[0, 1]`) onto `[0, 1]`, clamping outside values.
    FixedRange { lo: f64, hi: f64 },
    /// For near-is-large sources: `1 / (v + ε)` followed by min-max.
    InverseThenMinMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthConvention {
    Depth,
    InverseDepth,
}

/// Optional `<stem>.json` next to a depth PNG.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub convention: DepthConvention,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl DepthSidecar {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn normalization(&self) -> Normalization {
        match (self.convention, self.lo, self.hi) {
            (DepthConvention::InverseDepth, _, _) => Normalization::InverseThenMinMax,
            (DepthConvention::Depth, Some(lo), Some(hi)) => Normalization::FixedRange { lo, hi },
            (DepthConvention::Depth, _, _) => Normalization::MinMax,
        }
    }
}

/// Reads raw depth samples in `[0, 1]` (16-bit full scale) from a grayscale image.
pub fn read_raw_depth(path: impl AsRef<Path>) -> Result<Plane> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let luma = img.to_luma16();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let data = luma.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
    Plane::new(w, h, data)
}

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Applies a normalization to raw samples. `source` only labels errors.
pub fn normalize(raw: Plane, normalization: Normalization, source: &Path) -> Result<DepthMap> {
    let (w, h) = raw.dims();
    let stretch = |data: Vec<f64>| -> Result<Vec<f64>> {
        let (lo, hi) = min_max(&data);
        if hi - lo <= 0.0 {
            return Err(Error::DegenerateDepth {
                path: source.to_path_buf(),
                value: lo,
            });
        }
        Ok(data.into_iter().map(|v| (v - lo) / (hi - lo)).collect())
    };
    let data = match normalization {
        Normalization::MinMax => stretch(raw.into_data())?,
        Normalization::InverseThenMinMax => stretch(
            raw.into_data()
                .into_iter()
                .map(|v| 1.0 / (v + INVERSE_EPSILON))
                .collect(),
        )?,
        Normalization::FixedRange { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("fixed range [{lo}, {hi}] needs lo < hi")));
            }
            raw.into_data()
                .into_iter()
                .map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
                .collect()
        }
    };
    DepthMap::new(Plane::new(w, h, data)?)
}

/// Loads a depth PNG and normalizes it to `[0, 1]`.
pub fn load_depth(path: impl AsRef<Path>, normalization: Normalization) -> Result<DepthMap> {
    let path = path.as_ref();
    normalize(read_raw_depth(path)?, normalization, path)
}

/// Loads a depth PNG, letting a `<stem>.json` sidecar override `fallback`.
pub fn load_depth_with_sidecar(path: impl AsRef<Path>, fallback: Normalization) -> Result<DepthMap> {
    let path = path.as_ref();
    let sidecar = path.with_extension("json");
    let normalization = if sidecar.is_file() {
        DepthSidecar::load(&sidecar)?.normalization()
    } else {
        fallback
    };
    load_depth(path, normalization)
}

/// Writes a depth map as a 16-bit grayscale PNG.
pub fn save_depth(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = depth.dims();
    let raw: Vec<u16> = depth
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer length matches dimensions");
    buf.save(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Analytic depth fields used as fixtures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthDepth {
    Constant(f64),
    /// `d = x / (W − 1)` (or `y / (H − 1)`); zero along a unit-length axis.
    Ramp(Axis),
    /// Distance from the image centre divided by the centre-to-corner distance.
    Radial,
    /// `k` horizontal-ramp plateaus at `0, 1/(k−1), …, 1`.
    Step(usize),
}

pub fn synth_depth(kind: SynthDepth, width: usize, height: usize) -> Result<DepthMap> {
    let ramp = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let corner = cx.hypot(cy);
    DepthMap::from_fn(width, height, |x, y| match kind {
        SynthDepth::Constant(v) => v,
        SynthDepth::Ramp(Axis::Horizontal) => ramp(x, width),
        SynthDepth::Ramp(Axis::Vertical) => ramp(y, height),
        SynthDepth::Radial => {
            if corner == 0.0 {
                0.0
            } else {
                ((x as f64 - cx).hypot(y as f64 - cy) / corner).min(1.0)
            }
        }
        SynthDepth::Step(k) => {
            let k = k.max(1);
            ramp(x * k / width, k)
        }
    })
}

/// Mean absolute difference between two depth maps.
pub fn depth_l1(a: &DepthMap, b: &DepthMap) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Shape {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data().len() as f64)
}
