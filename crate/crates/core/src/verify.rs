//! Self-contained numerical checks of the rehazy identities on randomly
//! generated synthetic scenes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asm::{invert_asm, synthesize_haze, transmission, Airlight, DepthMap, SceneProfile, T_MIN};
use crate::depth::{synth_depth, Axis, SynthDepth};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::l1;
use crate::rehazy::generate_rehazy;

pub const FLOAT_TOLERANCE: f64 = 1e-6;
pub const QUANTIZED_TOLERANCE: f64 = 2.0 / 255.0;
pub const CONSISTENCY_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Composition,
    Semigroup,
    Roundtrip,
}

impl std::str::FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "composition" => Ok(VerifyMode::Composition),
            "semigroup" => Ok(VerifyMode::Semigroup),
            "roundtrip" => Ok(VerifyMode::Roundtrip),
            other => Err(Error::invalid(format!("unknown verify mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub mode: VerifyMode,
    /// Scenes (composition, roundtrip) or pixel trials (semigroup).
    pub count: usize,
    pub size: usize,
    pub seed: u64,
    pub profile: SceneProfile,
    /// Fixed β₀; sampled from the profile when `None`.
    pub beta0: Option<f64>,
    /// Fixed Δβ; sampled from the profile when `None`.
    pub delta_beta: Option<f64>,
}

impl VerifyOptions {
    pub fn new(mode: VerifyMode) -> Self {
        VerifyOptions {
            mode,
            count: match mode {
                VerifyMode::Semigroup => 1000,
                _ => 100,
            },
            size: 64,
            seed: 0,
            profile: SceneProfile::indoor(),
            beta0: None,
            delta_beta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    pub max_error: f64,
    pub mean_error: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    fn from_errors(name: &str, tolerance: f64, errors: &[f64]) -> Self {
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        let mean_error = if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        };
        Check {
            name: name.to_owned(),
            tolerance,
            max_error,
            mean_error,
            samples: errors.len(),
            passed: !errors.is_empty() && max_error <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Random scene: per-pixel uniform colours over one of the analytic depth
/// fields.
pub fn random_scene<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize) -> Result<(Image, DepthMap)> {
    let clean = Image::from_fn(width, height, |_, _| {
        [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]
    })?;
    let kind = match rng.random_range(0..5) {
        0 => SynthDepth::Ramp(Axis::Horizontal),
        1 => SynthDepth::Ramp(Axis::Vertical),
        2 => SynthDepth::Radial,
        3 => SynthDepth::Step(rng.random_range(2..=6)),
        _ => SynthDepth::Constant(rng.random_range(0.0..=1.0)),
    };
    Ok((clean, synth_depth(kind, width, height)?))
}

fn linf(a: &Image, b: &Image, mask: Option<&[f64]>) -> f64 {
    a.pixels()
        .zip(b.pixels())
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|t| t[*i] >= T_MIN))
        .flat_map(|(_, (p, q))| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max)
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    opts.profile.validate()?;
    if opts.count == 0 || opts.size == 0 {
        return Err(Error::invalid("verify needs a positive count and size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let profile = &opts.profile;
    let beta0 = |rng: &mut ChaCha8Rng| opts.beta0.unwrap_or_else(|| profile.beta.sample(rng));
    let delta = |rng: &mut ChaCha8Rng| opts.delta_beta.unwrap_or_else(|| profile.delta_beta.sample(rng));

    let checks = match opts.mode {
        VerifyMode::Composition => {
            let mut float_err = Vec::with_capacity(opts.count);
            let mut quant_err = Vec::with_capacity(opts.count);
            let mut consistency_err = Vec::with_capacity(opts.count);
            for _ in 0..opts.count {
                let (clean, depth) = random_scene(&mut rng, opts.size, opts.size)?;
                let a = Airlight::gray(profile.airlight.sample(&mut rng))?;
                let (b0, db) = (beta0(&mut rng), delta(&mut rng));
                let hazy = synthesize_haze(&clean, &transmission(&depth, b0)?, a)?;
                let composite = transmission(&depth, b0 + db)?;
                let direct = synthesize_haze(&clean, &composite, a)?;

                let rehazy = generate_rehazy(&hazy, &depth, a, db)?;
                float_err.push(l1(&rehazy, &direct)?);

                let rehazy_8bit = generate_rehazy(&hazy.quantized(), &depth, a, db)?.quantized();
                quant_err.push(l1(&rehazy_8bit, &direct.quantized())?);

                let recovered = invert_asm(&rehazy, &composite, a)?;
                consistency_err.push(linf(&recovered, &clean, Some(composite.data())));
            }
            vec![
                Check::from_errors("composition_l1_float", FLOAT_TOLERANCE, &float_err),
                Check::from_errors("composition_l1_8bit", QUANTIZED_TOLERANCE, &quant_err),
                Check::from_errors("clean_consistency_linf", CONSISTENCY_TOLERANCE, &consistency_err),
            ]
        }
        VerifyMode::Semigroup => {
            let mut errors = Vec::with_capacity(opts.count);
            for _ in 0..opts.count {
                let px: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                let d = rng.random_range(0.0..=1.0);
                let a = Airlight::new([rng.random(), rng.random(), rng.random()])?;
                let (db1, db2) = (delta(&mut rng), delta(&mut rng));
                let img = Image::new(1, 1, px.to_vec())?;
                let depth = DepthMap::from_fn(1, 1, |_, _| d)?;
                let twice = generate_rehazy(&generate_rehazy(&img, &depth, a, db1)?, &depth, a, db2)?;
                let once = generate_rehazy(&img, &depth, a, db1 + db2)?;
                errors.push(linf(&twice, &once, None));
            }
            vec![Check::from_errors("semigroup_linf", FLOAT_TOLERANCE, &errors)]
        }
        VerifyMode::Roundtrip => {
            let mut errors = Vec::with_capacity(opts.count);
            for _ in 0..opts.count {
                let (clean, depth) = random_scene(&mut rng, opts.size, opts.size)?;
                let a = Airlight::gray(profile.airlight.sample(&mut rng))?;
                let t = transmission(&depth, beta0(&mut rng))?;
                let back = invert_asm(&synthesize_haze(&clean, &t, a)?, &t, a)?;
                errors.push(linf(&back, &clean, Some(t.data())));
            }
            vec![Check::from_errors("roundtrip_linf", FLOAT_TOLERANCE, &errors)]
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        mode: opts.mode,
        seed: opts.seed,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_modes_pass_on_small_runs() {
        for mode in [VerifyMode::Composition, VerifyMode::Semigroup, VerifyMode::Roundtrip] {
            let mut opts = VerifyOptions::new(mode);
            opts.count = 10;
            opts.size = 16;
            let report = run_verify(&opts).unwrap();
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn fixed_light_haze_composition() {
        let mut opts = VerifyOptions::new(VerifyMode::Composition);
        opts.count = 5;
        opts.size = 24;
        opts.beta0 = Some(0.01);
        opts.delta_beta = Some(0.01);
        let report = run_verify(&opts).unwrap();
        assert!(report.passed);
        assert!(report.checks[0].max_error <= 1e-6);
    }

    #[test]
    fn zero_count_is_rejected() {
        let mut opts = VerifyOptions::new(VerifyMode::Roundtrip);
        opts.count = 0;
        assert!(run_verify(&opts).is_err());
    }

    #[test]
    fn report_is_seed_deterministic() {
        let mut opts = VerifyOptions::new(VerifyMode::Semigroup);
        opts.count = 50;
        opts.seed = 11;
        assert_eq!(run_verify(&opts).unwrap(), run_verify(&opts).unwrap());
    }
}
