//! Dark channel prior: dark channel, airlight estimation, transmission
//! estimate and the plain (unrefined) DCP dehazing baseline.

use serde::{Deserialize, Serialize};

use crate::asm::{invert_asm, Airlight, TransmissionMap, T_MIN};
use crate::error::{Error, Result};
use crate::image::{Image, Plane};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcpOptions {
    /// Odd window side in pixels.
    pub patch: usize,
    /// Share of the estimated haze removed, in `[0, 1]`; 0 disables dehazing.
    pub omega: f64,
    /// Share of brightest dark-channel pixels used for the airlight.
    pub top_fraction: f64,
}

impl Default for DcpOptions {
    fn default() -> Self {
        DcpOptions {
            patch: 15,
            omega: 0.95,
            top_fraction: 0.001,
        }
    }
}

fn check_patch(patch: usize) -> Result<()> {
    if patch == 0 || patch.is_multiple_of(2) {
        return Err(Error::invalid(format!("patch must be odd and >= 1, got {patch}")));
    }
    Ok(())
}

/// Sliding minimum over `[i - radius, i + radius]`, clamped at the borders
/// (equivalent to edge replication).
fn min_filter_1d(input: &[f64], radius: usize, out: &mut [f64]) {
    let n = input.len();
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        *slot = input[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
    }
}

fn min_filter(plane: Vec<f64>, width: usize, height: usize, patch: usize) -> Vec<f64> {
    let radius = patch / 2;
    if radius == 0 {
        return plane;
    }
    let mut rows = vec![0.0; width * height];
    for (src, dst) in plane.chunks_exact(width).zip(rows.chunks_exact_mut(width)) {
        min_filter_1d(src, radius, dst);
    }
    let mut out = vec![0.0; width * height];
    let mut column = vec![0.0; height];
    let mut filtered = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            column[y] = rows[y * width + x];
        }
        min_filter_1d(&column, radius, &mut filtered);
        for y in 0..height {
            out[y * width + x] = filtered[y];
        }
    }
    out
}

fn channel_min(image: &Image, scale: [f64; 3]) -> Vec<f64> {
    image
        .pixels()
        .map(|px| (px[0] * scale[0]).min(px[1] * scale[1]).min(px[2] * scale[2]))
        .collect()
}

/// Per pixel: minimum over channels, then minimum over a `patch × patch`
/// window with replicated borders.
pub fn dark_channel(image: &Image, patch: usize) -> Result<Plane> {
    check_patch(patch)?;
    let (w, h) = image.dims();
    Plane::new(w, h, min_filter(channel_min(image, [1.0; 3]), w, h, patch))
}

/// Mean colour of the input over the brightest `top_fraction` of dark-channel
/// pixels (at least one pixel). Ties are broken by pixel index.
pub fn estimate_airlight(image: &Image, patch: usize, top_fraction: f64) -> Result<Airlight> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "top_fraction must be in (0, 1], got {top_fraction}"
        )));
    }
    let dark = dark_channel(image, patch)?;
    let n = dark.data().len();
    let count = ((top_fraction * n as f64).ceil() as usize).clamp(1, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dark.data()[b].total_cmp(&dark.data()[a]).then(a.cmp(&b)));

    let mut sum = [0.0; 3];
    for &i in &order[..count] {
        let px = &image.data()[i * 3..i * 3 + 3];
        for c in 0..3 {
            sum[c] += px[c];
        }
    }
    Airlight::new(sum.map(|s| (s / count as f64).clamp(0.0, 1.0)))
}

/// `t = 1 − ω·dark_channel(I / A)`, clamped to `[T_MIN, 1]`.
pub fn dcp_transmission(
    image: &Image,
    airlight: Airlight,
    patch: usize,
    omega: f64,
) -> Result<TransmissionMap> {
    check_patch(patch)?;
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::invalid(format!("omega must be in [0, 1], got {omega}")));
    }
    let a = airlight.rgb();
    if a.iter().any(|&c| c <= 0.0) {
        return Err(Error::invalid(format!("airlight {a:?} has a zero channel")));
    }
    let (w, h) = image.dims();
    let dark = min_filter(channel_min(image, a.map(|c| 1.0 / c)), w, h, patch);
    let t = dark
        .into_iter()
        .map(|d| (1.0 - omega * d).clamp(T_MIN, 1.0))
        .collect();
    TransmissionMap::new(Plane::new(w, h, t)?)
}

/// Output of [`dcp_dehaze`] together with the intermediate estimates.
#[derive(Clone, Debug)]
pub struct Dehazed {
    pub image: Image,
    pub airlight: Airlight,
    pub transmission: TransmissionMap,
}

/// Airlight estimate, DCP transmission, then model inversion.
pub fn dcp_dehaze(image: &Image, opts: &DcpOptions) -> Result<Dehazed> {
    let airlight = estimate_airlight(image, opts.patch, opts.top_fraction)?;
    let transmission = dcp_transmission(image, airlight, opts.patch, opts.omega)?;
    let image = invert_asm(image, &transmission, airlight)?;
    Ok(Dehazed {
        image,
        airlight,
        transmission,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{synthesize_haze, transmission, DepthMap};
    use proptest::prelude::*;

    // Direct O(patch²) evaluation with explicit index clamping.
    fn brute_dark_channel(image: &Image, patch: usize) -> Vec<f64> {
        let (w, h) = image.dims();
        let r = (patch / 2) as isize;
        let mut out = Vec::new();
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut m = f64::INFINITY;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                        let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                        for v in image.pixel(sx, sy) {
                            m = m.min(v);
                        }
                    }
                }
                out.push(m);
            }
        }
        out
    }

    fn textured(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            [
                ((x * 7 + y * 3) % 11) as f64 / 10.0,
                ((x * 5 + y * 13) % 17) as f64 / 16.0,
                ((x * 11 + y) % 9) as f64 / 8.0,
            ]
        })
        .unwrap()
    }

    #[test]
    fn constant_image() {
        let img = Image::filled(9, 7, 0.42).unwrap();
        assert!(dark_channel(&img, 5).unwrap().data().iter().all(|&v| v == 0.42));
        let a = estimate_airlight(&img, 5, 0.01).unwrap();
        assert_eq!(a.rgb(), [0.42; 3]);
    }

    #[test]
    fn even_patch_is_rejected() {
        let img = Image::filled(4, 4, 0.5).unwrap();
        assert!(dark_channel(&img, 4).is_err());
        assert!(dark_channel(&img, 0).is_err());
    }

    #[test]
    fn unit_patch_is_channel_minimum() {
        let img = textured(6, 5);
        let d = dark_channel(&img, 1).unwrap();
        for (v, px) in d.data().iter().zip(img.pixels()) {
            assert_eq!(*v, px[0].min(px[1]).min(px[2]));
        }
    }

    #[test]
    fn zero_channel_pixel_darkens_its_windows() {
        let mut data = vec![0.8; 9 * 9 * 3];
        // green channel of pixel (4, 4)
        data[(4 * 9 + 4) * 3 + 1] = 0.0;
        let img = Image::new(9, 9, data).unwrap();
        let d = dark_channel(&img, 3).unwrap();
        for y in 0..9 {
            for x in 0..9 {
                let inside = (3..=5).contains(&x) && (3..=5).contains(&y);
                assert_eq!(d.get(x, y), if inside { 0.0 } else { 0.8 });
            }
        }
    }

    #[test]
    fn separable_filter_matches_brute_force() {
        for (w, h, patch) in [(13, 9, 5), (4, 6, 15), (1, 1, 3), (20, 3, 7)] {
            let img = textured(w, h);
            assert_eq!(dark_channel(&img, patch).unwrap().data(), &brute_dark_channel(&img, patch)[..]);
        }
    }

    #[test]
    fn dense_haze_dark_channel_tracks_airlight() {
        let j = textured(32, 32);
        let depth = DepthMap::from_fn(32, 32, |_, _| 1.0).unwrap();
        // t = exp(-beta) = T_MIN
        let t = transmission(&depth, -T_MIN.ln()).unwrap();
        let hazy = synthesize_haze(&j, &t, Airlight::gray(0.9).unwrap()).unwrap();
        let expected = 0.9 * (1.0 - T_MIN);
        for &v in dark_channel(&hazy, 15).unwrap().data() {
            assert!((v - expected).abs() <= 0.02, "{v} vs {expected}");
        }
    }

    #[test]
    fn airlight_from_deep_region() {
        let j = textured(48, 48);
        let depth = DepthMap::from_fn(48, 48, |x, _| if x >= 32 { 1.0 } else { 0.2 }).unwrap();
        let a = Airlight::gray(0.9).unwrap();
        let hazy = synthesize_haze(&j, &transmission(&depth, 4.0).unwrap(), a).unwrap();
        let est = estimate_airlight(&hazy, 15, 0.001).unwrap();
        for c in est.rgb() {
            assert!((c - 0.9).abs() <= 0.02, "{c}");
        }
    }

    #[test]
    fn full_selection_is_global_mean() {
        let img = textured(7, 5);
        let est = estimate_airlight(&img, 3, 1.0).unwrap();
        let n = 35.0;
        for c in 0..3 {
            let mean: f64 = img.pixels().map(|p| p[c]).sum::<f64>() / n;
            assert!((est.rgb()[c] - mean).abs() < 1e-12);
        }
        assert!(estimate_airlight(&img, 3, 0.0).is_err());
        assert!(estimate_airlight(&img, 3, 1.5).is_err());
    }

    #[test]
    fn transmission_formula() {
        let mut data = Vec::new();
        for i in 0..25 {
            data.extend_from_slice(&[0.0, (i % 5) as f64 / 4.0, 0.7]);
        }
        let clear = Image::new(5, 5, data).unwrap();
        let t = dcp_transmission(&clear, Airlight::gray(0.9).unwrap(), 3, 0.95).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));

        let a = Airlight::new([0.8, 0.7, 0.9]).unwrap();
        let flat = Image::from_fn(5, 5, |_, _| a.rgb()).unwrap();
        let t = dcp_transmission(&flat, a, 3, 0.9).unwrap();
        assert!(t.data().iter().all(|&v| (v - 0.1).abs() < 1e-12));
        let t = dcp_transmission(&flat, a, 3, 0.95).unwrap();
        assert!(t.data().iter().all(|&v| (v - T_MIN).abs() < 1e-12));
        let t = dcp_transmission(&flat, a, 3, 1e-12).unwrap();
        assert!(t.data().iter().all(|&v| (v - 1.0).abs() < 1e-11));
        let t = dcp_transmission(&flat, a, 3, 0.0).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));

        assert!(dcp_transmission(&flat, Airlight::new([0.0, 0.5, 0.5]).unwrap(), 3, 0.9).is_err());
        assert!(dcp_transmission(&flat, a, 3, -0.1).is_err());
        assert!(dcp_transmission(&flat, a, 3, 1.1).is_err());
    }

    #[test]
    fn airlight_only_scene_is_fixed() {
        let a = Airlight::new([0.85, 0.8, 0.9]).unwrap();
        let flat = Image::from_fn(20, 20, |_, _| a.rgb()).unwrap();
        let out = dcp_dehaze(&flat, &DcpOptions::default()).unwrap();
        for px in out.image.pixels() {
            for c in 0..3 {
                assert!((px[c] - a.rgb()[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dehazing_improves_psnr_on_synthetic_haze() {
        let j = textured(64, 64);
        let depth = DepthMap::from_fn(64, 64, |x, y| (x + y) as f64 / 126.0).unwrap();
        let a = Airlight::gray(0.9).unwrap();
        let hazy = synthesize_haze(&j, &transmission(&depth, 1.5).unwrap(), a).unwrap();
        let out = dcp_dehaze(&hazy, &DcpOptions::default()).unwrap();
        let before = crate::metrics::psnr(&hazy, &j).unwrap();
        let after = crate::metrics::psnr(&out.image, &j).unwrap();
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn clear_input_changes_by_bounded_amount() {
        // Haze-free scene: every 15x15 window has a zero channel somewhere.
        let j = textured(40, 40);
        let out = dcp_dehaze(&j, &DcpOptions::default()).unwrap();
        let dev = j
            .data()
            .iter()
            .zip(out.image.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12, "max deviation {dev}");
    }

    fn image_strategy(w: usize, h: usize) -> impl Strategy<Value = Image> {
        prop::collection::vec(0.0f64..=1.0, w * h * 3)
            .prop_map(move |data| Image::new(w, h, data).unwrap())
    }

    proptest! {
        #[test]
        fn dark_channel_is_monotone(img in image_strategy(7, 6), lift in 0.0f64..0.5) {
            let brighter = Image::new(7, 6, img.data().iter().map(|v| (v + lift).min(1.0)).collect()).unwrap();
            let d0 = dark_channel(&img, 3).unwrap();
            let d1 = dark_channel(&brighter, 3).unwrap();
            for (a, b) in d0.data().iter().zip(d1.data()) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn airlight_within_channel_hull(img in image_strategy(8, 8), frac in 0.001f64..=1.0) {
            let a = estimate_airlight(&img, 3, frac).unwrap().rgb();
            for c in 0..3 {
                let lo = img.pixels().map(|p| p[c]).fold(f64::INFINITY, f64::min);
                let hi = img.pixels().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(a[c] >= lo - 1e-12 && a[c] <= hi + 1e-12);
            }
        }

        #[test]
        fn dcp_transmission_is_bounded(
            img in image_strategy(8, 8),
            a in prop::array::uniform3(0.05f64..=1.0),
            omega in 0.01f64..=1.0,
        ) {
            let t = dcp_transmission(&img, Airlight::new(a).unwrap(), 5, omega).unwrap();
            prop_assert!(t.data().iter().all(|&v| (T_MIN..=1.0).contains(&v)));
        }
    }
}
