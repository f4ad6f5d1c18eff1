//! Forward atmospheric scattering model: `I = J·t + A·(1 − t)` with
//! `t = exp(−β·d)`.
//!
//! Pixel values are used as sRGB-coded intensities directly, without
//! linearization, the same convention synthetic dehazing datasets use.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Plane};

/// Lower clamp on transmission when inverting the model.
pub const T_MIN: f64 = 0.05;

/// Relative depth normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap(Plane);

impl DepthMap {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(v) = plane
            .data()
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::invalid(format!("depth value {v} outside [0, 1]")));
        }
        Ok(DepthMap(plane))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        DepthMap::new(Plane::from_fn(width, height, f)?)
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }
}

/// Per-pixel transmission in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMap(Plane);

impl TransmissionMap {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(v) = plane
            .data()
            .iter()
            .find(|v| !v.is_finite() || **v <= 0.0 || **v > 1.0)
        {
            return Err(Error::invalid(format!("transmission {v} outside (0, 1]")));
        }
        Ok(TransmissionMap(plane))
    }

    pub(crate) fn from_plane_unchecked(plane: Plane) -> Self {
        TransmissionMap(plane)
    }

    pub fn uniform(width: usize, height: usize, t: f64) -> Result<Self> {
        TransmissionMap::new(Plane::new(width, height, vec![t; width * height])?)
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    /// Pointwise product, used to compose two scattering layers.
    pub fn compose(&self, other: &TransmissionMap) -> Result<TransmissionMap> {
        if self.dims() != other.dims() {
            return Err(Error::Shape {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| (a * b).max(f64::MIN_POSITIVE))
            .collect();
        Ok(TransmissionMap(Plane::new(self.0.width(), self.0.height(), data)?))
    }
}

/// Atmospheric light, one value per RGB channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Airlight([f64; 3]);

impl Airlight {
    pub fn new(rgb: [f64; 3]) -> Result<Self> {
        if rgb.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::invalid(format!("airlight {rgb:?} outside [0, 1]")));
        }
        Ok(Airlight(rgb))
    }

    pub fn gray(v: f64) -> Result<Self> {
        Airlight::new([v; 3])
    }

    pub fn rgb(&self) -> [f64; 3] {
        self.0
    }
}

impl TryFrom<[f64; 3]> for Airlight {
    type Error = Error;

    fn try_from(rgb: [f64; 3]) -> Result<Self> {
        Airlight::new(rgb)
    }
}

impl From<Airlight> for [f64; 3] {
    fn from(a: Airlight) -> Self {
        a.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HazeParams {
    pub beta: f64,
    pub airlight: Airlight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Indoor,
    Outdoor,
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneKind::Indoor => f.write_str("indoor"),
            SceneKind::Outdoor => f.write_str("outdoor"),
        }
    }
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "indoor" => Ok(SceneKind::Indoor),
            "outdoor" => Ok(SceneKind::Outdoor),
            other => Err(Error::invalid(format!("unknown profile '{other}'"))),
        }
    }
}

/// Closed interval `[min, max]` for uniform sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Interval { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn is_ordered(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }
}

/// Sampling distributions for one scene family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneProfile {
    pub kind: SceneKind,
    pub airlight: Interval,
    pub beta: Interval,
    pub delta_beta: Interval,
}

impl SceneProfile {
    pub const fn indoor() -> Self {
        SceneProfile {
            kind: SceneKind::Indoor,
            airlight: Interval::new(0.7, 1.0),
            beta: Interval::new(0.6, 1.8),
            delta_beta: Interval::new(0.1, 0.5),
        }
    }

    pub const fn outdoor() -> Self {
        SceneProfile {
            kind: SceneKind::Outdoor,
            airlight: Interval::new(0.8, 1.0),
            beta: Interval::new(0.01, 0.3),
            delta_beta: Interval::new(0.01, 0.15),
        }
    }

    pub const fn for_kind(kind: SceneKind) -> Self {
        match kind {
            SceneKind::Indoor => SceneProfile::indoor(),
            SceneKind::Outdoor => SceneProfile::outdoor(),
        }
    }

    /// Checks the range invariants. A zero lower bound is allowed for Δβ so
    /// the identity rehazy can be requested; β itself must stay positive.
    pub fn validate(&self) -> Result<()> {
        let a = self.airlight;
        if !a.is_ordered() || a.min < 0.0 || a.max > 1.0 {
            return Err(Error::invalid(format!(
                "airlight range [{}, {}] must satisfy 0 <= min <= max <= 1",
                a.min, a.max
            )));
        }
        if !self.beta.is_ordered() || self.beta.min <= 0.0 {
            return Err(Error::invalid(format!(
                "beta range [{}, {}] must satisfy 0 < min <= max",
                self.beta.min, self.beta.max
            )));
        }
        if !self.delta_beta.is_ordered() || self.delta_beta.min < 0.0 {
            return Err(Error::invalid(format!(
                "delta-beta range [{}, {}] must satisfy 0 <= min <= max",
                self.delta_beta.min, self.delta_beta.max
            )));
        }
        Ok(())
    }
}

/// `t(x) = exp(−β·d(x))`, floored at the smallest positive float so the
/// result stays strictly positive for very dense haze.
pub fn transmission(depth: &DepthMap, beta: f64) -> Result<TransmissionMap> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    let (w, h) = depth.dims();
    let data = depth
        .data()
        .iter()
        .map(|d| (-beta * d).exp().max(f64::MIN_POSITIVE))
        .collect();
    Ok(TransmissionMap::from_plane_unchecked(Plane::new(w, h, data)?))
}

/// `I = J·t + A·(1 − t)` per pixel and channel.
pub fn synthesize_haze(clean: &Image, t: &TransmissionMap, airlight: Airlight) -> Result<Image> {
    clean.ensure_dims(t.dims())?;
    let a = airlight.rgb();
    let mut out = Vec::with_capacity(clean.data().len());
    for (px, &tx) in clean.pixels().zip(t.data()) {
        for c in 0..3 {
            out.push((px[c] * tx + a[c] * (1.0 - tx)).clamp(0.0, 1.0));
        }
    }
    Ok(Image::from_raw(clean.width(), clean.height(), out))
}

/// Recovers `J = (I − A·(1 − t)) / max(t, T_MIN)`, clamped to `[0, 1]`.
pub fn invert_asm(hazy: &Image, t: &TransmissionMap, airlight: Airlight) -> Result<Image> {
    hazy.ensure_dims(t.dims())?;
    let a = airlight.rgb();
    let mut out = Vec::with_capacity(hazy.data().len());
    for (px, &tx) in hazy.pixels().zip(t.data()) {
        let denom = tx.max(T_MIN);
        for c in 0..3 {
            out.push(((px[c] - a[c] * (1.0 - tx)) / denom).clamp(0.0, 1.0));
        }
    }
    Ok(Image::from_raw(hazy.width(), hazy.height(), out))
}

/// Draws β and a gray airlight from the profile's uniform distributions.
pub fn sample_haze_params<R: Rng + ?Sized>(profile: &SceneProfile, rng: &mut R) -> Result<HazeParams> {
    profile.validate()?;
    let beta = profile.beta.sample(rng);
    let a = profile.airlight.sample(rng);
    Ok(HazeParams {
        beta,
        airlight: Airlight::gray(a)?,
    })
}
