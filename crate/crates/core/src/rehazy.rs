//! Rehazy generation: add haze to an already hazy image so the result shares
//! its clean counterpart.
//!
//! With `Δt = exp(−Δβ·d₀)` a hazy image `I₀ = J·t₀ + A₀(1 − t₀)` becomes
//!
//! ```text
//! I_r = Δt·I₀ + A₀(1 − Δt) + ΔA(1 − t₀Δt)
//! ```
//!
//! which equals re-synthesizing `J` with transmission `t₀·Δt` and airlight
//! `A₀ + ΔA`. The default pipeline keeps `ΔA = 0`, where only `A₀`, `Δβ` and
//! `d₀` are needed and `t₀` drops out.

use rand::Rng;

use crate::asm::{transmission, Airlight, DepthMap, SceneProfile, TransmissionMap};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RehazyParams {
    pub delta_beta: f64,
    /// Per-channel airlight offset; zero in the shared-airlight pipeline.
    pub delta_airlight: [f64; 3],
}

impl RehazyParams {
    pub fn shared_airlight(delta_beta: f64) -> Self {
        RehazyParams {
            delta_beta,
            delta_airlight: [0.0; 3],
        }
    }
}

/// `Δt(x) = exp(−Δβ·d₀(x))`.
pub fn delta_transmission(depth: &DepthMap, delta_beta: f64) -> Result<TransmissionMap> {
    transmission(depth, delta_beta)
}

/// Shared-airlight rehazy: `I_r = Δt·I₀ + A₀(1 − Δt)`.
pub fn generate_rehazy(
    hazy: &Image,
    depth: &DepthMap,
    airlight: Airlight,
    delta_beta: f64,
) -> Result<Image> {
    hazy.ensure_dims(depth.dims())?;
    let dt = delta_transmission(depth, delta_beta)?;
    let a = airlight.rgb();
    let mut out = Vec::with_capacity(hazy.data().len());
    for (px, &d) in hazy.pixels().zip(dt.data()) {
        for c in 0..3 {
            out.push((d * px[c] + a[c] * (1.0 - d)).clamp(0.0, 1.0));
        }
    }
    Ok(Image::from_raw(hazy.width(), hazy.height(), out))
}

/// Rehazy with an airlight change: adds `ΔA(1 − t₀Δt)` to the shared-airlight
/// form, then clamps to `[0, 1]`.
pub fn generate_rehazy_general(
    hazy: &Image,
    t0: &TransmissionMap,
    depth: &DepthMap,
    airlight: Airlight,
    params: &RehazyParams,
) -> Result<Image> {
    hazy.ensure_dims(depth.dims())?;
    hazy.ensure_dims(t0.dims())?;
    let a = airlight.rgb();
    let da = params.delta_airlight;
    for c in 0..3 {
        let shifted = a[c] + da[c];
        if !da[c].is_finite() || !(0.0..=1.0).contains(&shifted) {
            return Err(Error::invalid(format!(
                "airlight {a:?} shifted by {da:?} leaves [0, 1] in channel {c}"
            )));
        }
    }
    let dt = delta_transmission(depth, params.delta_beta)?;
    let mut out = Vec::with_capacity(hazy.data().len());
    for ((px, &d), &t) in hazy.pixels().zip(dt.data()).zip(t0.data()) {
        for c in 0..3 {
            let v = d * px[c] + a[c] * (1.0 - d) + da[c] * (1.0 - t * d);
            out.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(Image::from_raw(hazy.width(), hazy.height(), out))
}

/// Draws `Δβ ~ U(delta_beta.min, delta_beta.max)`.
pub fn sample_delta_beta<R: Rng + ?Sized>(profile: &SceneProfile, rng: &mut R) -> Result<f64> {
    profile.validate()?;
    Ok(profile.delta_beta.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{invert_asm, synthesize_haze, T_MIN};
    use crate::image::Plane;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp_depth(w: usize, h: usize) -> DepthMap {
        DepthMap::from_fn(w, h, |x, y| (x + y) as f64 / (w + h - 2) as f64).unwrap()
    }

    fn scene(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            [
                (x as f64 * 0.13 + 0.05).fract(),
                (y as f64 * 0.29 + 0.4).fract(),
                ((x * y) as f64 * 0.07).fract(),
            ]
        })
        .unwrap()
    }

    #[test]
    fn delta_transmission_values() {
        let d = ramp_depth(4, 3);
        assert!(delta_transmission(&d, 0.0).unwrap().data().iter().all(|&v| v == 1.0));
        let dt = delta_transmission(&d, 0.5).unwrap();
        assert_eq!(dt.data()[0], 1.0);
        let ones = DepthMap::from_fn(2, 2, |_, _| 1.0).unwrap();
        // exp(-0.5) = 0.60653065971263342360
        for &v in delta_transmission(&ones, 0.5).unwrap().data() {
            assert!((v - 0.606_530_659_712_633_4).abs() < 1e-15);
        }
        assert!(delta_transmission(&d, f64::NAN).is_err());
    }

    #[test]
    fn zero_delta_beta_is_identity() {
        let i = scene(6, 5);
        let out = generate_rehazy(&i, &ramp_depth(6, 5), Airlight::gray(0.8).unwrap(), 0.0).unwrap();
        assert_eq!(out, i);
    }

    #[test]
    fn huge_delta_beta_converges_to_airlight() {
        let i = scene(6, 5);
        let d = DepthMap::from_fn(6, 5, |x, _| 0.1 + 0.9 * x as f64 / 5.0).unwrap();
        let a = Airlight::new([0.9, 0.8, 0.75]).unwrap();
        let out = generate_rehazy(&i, &d, a, 1e3).unwrap();
        for px in out.pixels() {
            for c in 0..3 {
                assert!((px[c] - a.rgb()[c]).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn composition_matches_direct_synthesis() {
        let j = scene(8, 7);
        let d = ramp_depth(8, 7);
        let a = Airlight::gray(0.85).unwrap();
        let i0 = synthesize_haze(&j, &transmission(&d, 0.01).unwrap(), a).unwrap();
        let ir = generate_rehazy(&i0, &d, a, 0.01).unwrap();
        let direct = synthesize_haze(&j, &transmission(&d, 0.02).unwrap(), a).unwrap();
        let l1 = crate::metrics::l1(&ir, &direct).unwrap();
        assert!(l1 <= 1e-6, "l1 = {l1}");
    }

    #[test]
    fn general_form_reduces_to_shared_airlight() {
        let j = scene(5, 5);
        let d = ramp_depth(5, 5);
        let a = Airlight::gray(0.9).unwrap();
        let t0 = transmission(&d, 0.7).unwrap();
        let i0 = synthesize_haze(&j, &t0, a).unwrap();
        let general =
            generate_rehazy_general(&i0, &t0, &d, a, &RehazyParams::shared_airlight(0.3)).unwrap();
        assert_eq!(general, generate_rehazy(&i0, &d, a, 0.3).unwrap());
    }

    #[test]
    fn general_form_matches_full_resynthesis() {
        let j = scene(7, 6);
        let d = ramp_depth(7, 6);
        let a0 = Airlight::new([0.8, 0.75, 0.7]).unwrap();
        let t0 = transmission(&d, 1.2).unwrap();
        let i0 = synthesize_haze(&j, &t0, a0).unwrap();
        let params = RehazyParams {
            delta_beta: 0.4,
            delta_airlight: [0.1, -0.05, 0.2],
        };
        let ir = generate_rehazy_general(&i0, &t0, &d, a0, &params).unwrap();
        let tr = t0.compose(&delta_transmission(&d, 0.4).unwrap()).unwrap();
        let ar = Airlight::new([0.9, 0.7, 0.9]).unwrap();
        let direct = synthesize_haze(&j, &tr, ar).unwrap();
        assert!(crate::metrics::l1(&ir, &direct).unwrap() <= 1e-6);
    }

    #[test]
    fn airlight_shift_without_extra_haze_on_clear_pixels() {
        let i = scene(4, 4);
        let d = ramp_depth(4, 4);
        let t0 = TransmissionMap::uniform(4, 4, 1.0).unwrap();
        let params = RehazyParams {
            delta_beta: 0.0,
            delta_airlight: [0.05; 3],
        };
        let out = generate_rehazy_general(&i, &t0, &d, Airlight::gray(0.8).unwrap(), &params).unwrap();
        assert_eq!(out, i);
    }

    #[test]
    fn airlight_shift_out_of_range_is_rejected() {
        let i = scene(3, 3);
        let d = ramp_depth(3, 3);
        let t0 = TransmissionMap::uniform(3, 3, 0.5).unwrap();
        let params = RehazyParams {
            delta_beta: 0.1,
            delta_airlight: [0.0, 0.3, 0.0],
        };
        let err = generate_rehazy_general(&i, &t0, &d, Airlight::gray(0.8).unwrap(), &params);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn delta_beta_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let v = sample_delta_beta(&SceneProfile::indoor(), &mut rng).unwrap();
            assert!((0.1..=0.5).contains(&v));
            let v = sample_delta_beta(&SceneProfile::outdoor(), &mut rng).unwrap();
            assert!((0.01..=0.15).contains(&v));
        }
        let a = sample_delta_beta(&SceneProfile::indoor(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_delta_beta(&SceneProfile::indoor(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    fn image_strategy(w: usize, h: usize) -> impl Strategy<Value = Image> {
        prop::collection::vec(0.0f64..=1.0, w * h * 3)
            .prop_map(move |data| Image::new(w, h, data).unwrap())
    }

    fn depth_strategy(w: usize, h: usize) -> impl Strategy<Value = DepthMap> {
        prop::collection::vec(0.0f64..=1.0, w * h)
            .prop_map(move |data| DepthMap::new(Plane::new(w, h, data).unwrap()).unwrap())
    }

    proptest! {
        #[test]
        fn rehazy_is_a_semigroup(
            i in image_strategy(5, 4),
            d in depth_strategy(5, 4),
            a in prop::array::uniform3(0.0f64..=1.0),
            db1 in 0.0f64..2.0,
            db2 in 0.0f64..2.0,
        ) {
            let a = Airlight::new(a).unwrap();
            let twice = generate_rehazy(&generate_rehazy(&i, &d, a, db1).unwrap(), &d, a, db2).unwrap();
            let once = generate_rehazy(&i, &d, a, db1 + db2).unwrap();
            for (x, y) in twice.data().iter().zip(once.data()) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }

        #[test]
        fn rehazy_shares_the_clean_scene(
            j in image_strategy(5, 4),
            d in depth_strategy(5, 4),
            a in 0.7f64..=1.0,
            beta0 in 0.6f64..1.8,
            db in 0.1f64..0.5,
        ) {
            let a = Airlight::gray(a).unwrap();
            let i0 = synthesize_haze(&j, &transmission(&d, beta0).unwrap(), a).unwrap();
            let ir = generate_rehazy(&i0, &d, a, db).unwrap();
            let tr = transmission(&d, beta0 + db).unwrap();
            let recovered = invert_asm(&ir, &tr, a).unwrap();
            for ((r, o), &t) in recovered.pixels().zip(j.pixels()).zip(tr.data()) {
                if t >= T_MIN {
                    for c in 0..3 {
                        prop_assert!((r[c] - o[c]).abs() <= 1e-5);
                    }
                }
            }
        }

        #[test]
        fn airlight_pixels_are_fixed_points(
            d in depth_strategy(4, 4),
            a in prop::array::uniform3(0.0f64..=1.0),
            db in 0.0f64..5.0,
        ) {
            let i = Image::from_fn(4, 4, |_, _| a).unwrap();
            let out = generate_rehazy(&i, &d, Airlight::new(a).unwrap(), db).unwrap();
            for px in out.pixels() {
                for c in 0..3 {
                    prop_assert!((px[c] - a[c]).abs() <= 1e-15);
                }
            }
        }

        #[test]
        fn more_rehaze_is_closer_to_airlight(
            px in prop::array::uniform3(0.0f64..=1.0),
            d in 0.05f64..=1.0,
            a in prop::array::uniform3(0.0f64..=1.0),
            db in 0.0f64..3.0,
            extra in 0.01f64..1.0,
        ) {
            let i = Image::new(1, 1, px.to_vec()).unwrap();
            let depth = DepthMap::from_fn(1, 1, |_, _| d).unwrap();
            let airlight = Airlight::new(a).unwrap();
            let near = generate_rehazy(&i, &depth, airlight, db).unwrap();
            let far = generate_rehazy(&i, &depth, airlight, db + extra).unwrap();
            for c in 0..3 {
                let gap_near = (near.data()[c] - a[c]).abs();
                let gap_far = (far.data()[c] - a[c]).abs();
                if (px[c] - a[c]).abs() > 1e-9 {
                    prop_assert!(gap_far < gap_near);
                } else {
                    prop_assert!(gap_far <= gap_near + 1e-15);
                }
            }
        }
    }
}
