//! Batch commands over directories of PNG files.
//!
//! Every work item draws from its own random stream derived from the run
//! seed and the item's position in the sorted input listing, so outputs do
//! not depend on the worker count or on which other items were skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asm::{sample_haze_params, synthesize_haze, transmission, Airlight, SceneProfile};
use crate::dcp::{dcp_dehaze, estimate_airlight, DcpOptions};
use crate::depth::{load_depth_with_sidecar, Normalization};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::manifest::{EntryParams, ManifestEntry, ManifestKind, PairManifest, ScaleTargets};
use crate::metrics::Scores;
use crate::pyramid::{downsample, Factor};
use crate::rehazy::{generate_rehazy, sample_delta_beta};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Seed for item `index`, output `k`, of a run seeded with `run_seed`.
pub fn derive_seed(run_seed: u64, index: u64, k: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(index);
    rng.set_word_pos(u128::from(k) * 2);
    rng.next_u64()
}

/// PNG files in `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))
}

/// An input that was left out, with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub path: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub manifest: PairManifest,
    pub manifest_path: PathBuf,
    pub inputs: usize,
    pub skipped: Vec<Skipped>,
}

impl BatchOutcome {
    /// True when inputs existed but none could be processed.
    pub fn all_skipped(&self) -> bool {
        self.inputs > 0 && self.skipped.len() == self.inputs
    }
}

enum ItemResult {
    Done(Vec<ManifestEntry>),
    Skipped(Skipped),
}

fn paired_depth(depth_dir: &Path, input: &Path) -> std::result::Result<PathBuf, Skipped> {
    let depth = depth_dir.join(format!("{}.png", stem(input)));
    if depth.is_file() {
        Ok(depth)
    } else {
        Err(Skipped {
            path: path_string(input),
            reason: format!("no depth map at {}", depth.display()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub clean_dir: PathBuf,
    pub depth_dir: PathBuf,
    pub out_dir: PathBuf,
    pub profile: SceneProfile,
    pub seed: u64,
    pub count: usize,
    pub workers: usize,
    pub depth_norm: Normalization,
    /// Also write half and quarter resolution clean targets.
    pub multiscale: bool,
}

/// Synthesizes `count` hazy versions of every clean image with sampled
/// `(β, A)` and writes `hazy/<stem>_<k>.png` plus the manifest.
pub fn run_synth(opts: &SynthOptions) -> Result<BatchOutcome> {
    opts.profile.validate()?;
    let inputs = list_pngs(&opts.clean_dir)?;
    let hazy_dir = opts.out_dir.join("hazy");
    let target_dir = opts.out_dir.join("targets");
    ensure_dir(&hazy_dir)?;
    if opts.multiscale {
        ensure_dir(&target_dir)?;
    }
    if inputs.is_empty() {
        warn!("no PNG files in {}", opts.clean_dir.display());
    }

    let process = |(index, clean_path): (usize, &PathBuf)| -> Result<ItemResult> {
        let depth_path = match paired_depth(&opts.depth_dir, clean_path) {
            Ok(p) => p,
            Err(s) => return Ok(ItemResult::Skipped(s)),
        };
        let clean = Image::load(clean_path)?;
        let depth = load_depth_with_sidecar(&depth_path, opts.depth_norm)?;
        clean.ensure_dims(depth.dims())?;
        let name = stem(clean_path);

        let targets = if opts.multiscale {
            let half = target_dir.join(format!("{name}_ds2.png"));
            let quarter = target_dir.join(format!("{name}_ds4.png"));
            downsample(&clean, Factor::Two).save_png(&half)?;
            downsample(&clean, Factor::Four).save_png(&quarter)?;
            Some(ScaleTargets {
                half: path_string(&half),
                quarter: path_string(&quarter),
            })
        } else {
            None
        };

        let mut entries = Vec::with_capacity(opts.count);
        for k in 0..opts.count {
            let seed = derive_seed(opts.seed, index as u64, k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = sample_haze_params(&opts.profile, &mut rng)?;
            let hazy = synthesize_haze(&clean, &transmission(&depth, params.beta)?, params.airlight)?;
            let hazy_path = hazy_dir.join(format!("{name}_{k}.png"));
            hazy.save_png(&hazy_path)?;
            entries.push(ManifestEntry {
                clean_path: Some(path_string(clean_path)),
                hazy_path: path_string(&hazy_path),
                rehazy_paths: Vec::new(),
                depth_path: path_string(&depth_path),
                params: EntryParams {
                    airlight: params.airlight.rgb(),
                    beta: Some(params.beta),
                    delta_betas: Vec::new(),
                    seed,
                },
                profile: opts.profile.kind,
                targets: targets.clone(),
            });
        }
        Ok(ItemResult::Done(entries))
    };

    let results = thread_pool(opts.workers)?
        .install(|| inputs.par_iter().enumerate().map(process).collect::<Vec<_>>());
    finish(ManifestKind::Synth, opts.seed, opts.profile, &opts.out_dir, inputs.len(), results)
}

fn finish(
    kind: ManifestKind,
    seed: u64,
    profile: SceneProfile,
    out_dir: &Path,
    inputs: usize,
    results: Vec<Result<ItemResult>>,
) -> Result<BatchOutcome> {
    let mut manifest = PairManifest::new(kind, seed, profile);
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            ItemResult::Done(entries) => manifest.entries.extend(entries),
            ItemResult::Skipped(s) => {
                warn!("skipping {}: {}", s.path, s.reason);
                skipped.push(s);
            }
        }
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    Ok(BatchOutcome {
        manifest,
        manifest_path,
        inputs,
        skipped,
    })
}

#[derive(Clone, Debug)]
pub struct RehazyOptions {
    pub hazy_dir: PathBuf,
    pub depth_dir: PathBuf,
    pub out_dir: PathBuf,
    pub profile: SceneProfile,
    pub seed: u64,
    pub n_rehazy: usize,
    /// Fixed airlight; estimated with DCP per image when `None`.
    pub airlight: Option<Airlight>,
    /// Fixed Δβ for every output; sampled from the profile when `None`.
    pub delta_beta: Option<f64>,
    pub dcp: DcpOptions,
    pub workers: usize,
    pub depth_norm: Normalization,
}

/// Writes `n_rehazy` rehazy images per hazy input as
/// `rehazy/<stem>_r<k>.png` plus the manifest.
pub fn run_rehazy(opts: &RehazyOptions) -> Result<BatchOutcome> {
    opts.profile.validate()?;
    if let Some(db) = opts.delta_beta {
        if !db.is_finite() || db < 0.0 {
            return Err(Error::invalid(format!("delta-beta must be finite and >= 0, got {db}")));
        }
    }
    let inputs = list_pngs(&opts.hazy_dir)?;
    let rehazy_dir = opts.out_dir.join("rehazy");
    ensure_dir(&rehazy_dir)?;
    if inputs.is_empty() {
        warn!("no PNG files in {}", opts.hazy_dir.display());
    }

    let process = |(index, hazy_path): (usize, &PathBuf)| -> Result<ItemResult> {
        let depth_path = match paired_depth(&opts.depth_dir, hazy_path) {
            Ok(p) => p,
            Err(s) => return Ok(ItemResult::Skipped(s)),
        };
        let hazy = Image::load(hazy_path)?;
        let depth = load_depth_with_sidecar(&depth_path, opts.depth_norm)?;
        hazy.ensure_dims(depth.dims())?;
        let airlight = match opts.airlight {
            Some(a) => a,
            None => estimate_airlight(&hazy, opts.dcp.patch, opts.dcp.top_fraction)?,
        };
        let name = stem(hazy_path);
        let seed = derive_seed(opts.seed, index as u64, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut rehazy_paths = Vec::with_capacity(opts.n_rehazy);
        let mut delta_betas = Vec::with_capacity(opts.n_rehazy);
        for k in 0..opts.n_rehazy {
            let db = match opts.delta_beta {
                Some(db) => db,
                None => sample_delta_beta(&opts.profile, &mut rng)?,
            };
            let out = generate_rehazy(&hazy, &depth, airlight, db)?;
            let out_path = rehazy_dir.join(format!("{name}_r{k}.png"));
            out.save_png(&out_path)?;
            rehazy_paths.push(path_string(&out_path));
            delta_betas.push(db);
        }
        Ok(ItemResult::Done(vec![ManifestEntry {
            clean_path: None,
            hazy_path: path_string(hazy_path),
            rehazy_paths,
            depth_path: path_string(&depth_path),
            params: EntryParams {
                airlight: airlight.rgb(),
                beta: None,
                delta_betas,
                seed,
            },
            profile: opts.profile.kind,
            targets: None,
        }]))
    };

    let results = thread_pool(opts.workers)?
        .install(|| inputs.par_iter().enumerate().map(process).collect::<Vec<_>>());
    finish(ManifestKind::Rehazy, opts.seed, opts.profile, &opts.out_dir, inputs.len(), results)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub name: String,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: Vec<ImageScores>,
    pub mean: Option<Scores>,
    /// File names present in only one of the two directories.
    pub unmatched: Vec<String>,
}

impl MetricsReport {
    /// Aligned plain-text table, one row per image plus the mean.
    pub fn table(&self) -> String {
        let width = self
            .images
            .iter()
            .map(|r| r.name.len())
            .chain(std::iter::once(5))
            .max()
            .unwrap_or(5);
        let mut out = format!(
            "{:<width$}  {:>8}  {:>7}  {:>9}  {:>8}\n",
            "image", "PSNR", "SSIM", "CIEDE", "L1"
        );
        let row = |name: &str, s: &Scores| {
            format!(
                "{:<width$}  {:>8.3}  {:>7.4}  {:>9.4}  {:>8.5}\n",
                name, s.psnr, s.ssim, s.ciede2000, s.l1
            )
        };
        for r in &self.images {
            out.push_str(&row(&r.name, &r.scores));
        }
        if let Some(mean) = &self.mean {
            out.push_str(&row("mean", mean));
        }
        for name in &self.unmatched {
            out.push_str(&format!("unmatched: {name}\n"));
        }
        out
    }
}

/// Scores every file name present in both directories.
pub fn run_metrics(dir_a: &Path, dir_b: &Path, workers: usize) -> Result<MetricsReport> {
    let index = |dir: &Path| -> Result<BTreeMap<String, PathBuf>> {
        Ok(list_pngs(dir)?
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
            .collect())
    };
    let a = index(dir_a)?;
    let b = index(dir_b)?;
    if a.is_empty() && b.is_empty() {
        return Err(Error::invalid(format!(
            "no PNG files in {} or {}",
            dir_a.display(),
            dir_b.display()
        )));
    }
    let unmatched: Vec<String> = a
        .keys()
        .filter(|k| !b.contains_key(*k))
        .chain(b.keys().filter(|k| !a.contains_key(*k)))
        .cloned()
        .collect();
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = a
        .iter()
        .filter_map(|(name, pa)| b.get(name).map(|pb| (name, pa, pb)))
        .collect();

    let images = thread_pool(workers)?.install(|| {
        pairs
            .par_iter()
            .map(|(name, pa, pb)| {
                let scores = Scores::compute(&Image::load(pa)?, &Image::load(pb)?)?;
                Ok(ImageScores {
                    name: (*name).clone(),
                    scores,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mean = Scores::mean(&images.iter().map(|r| r.scores).collect::<Vec<_>>());
    Ok(MetricsReport {
        images,
        mean,
        unmatched,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcpEntry {
    pub input: String,
    pub output: String,
    pub airlight: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcpReport {
    pub options: DcpOptions,
    pub entries: Vec<DcpEntry>,
}

/// Dehazes every PNG in `hazy_dir` into `out_dir` under the same name and
/// writes `report.json` there.
pub fn run_dcp_dehaze(hazy_dir: &Path, out_dir: &Path, opts: &DcpOptions, workers: usize) -> Result<DcpReport> {
    let inputs = list_pngs(hazy_dir)?;
    if inputs.is_empty() {
        warn!("no PNG files in {}", hazy_dir.display());
    }
    ensure_dir(out_dir)?;
    let entries = thread_pool(workers)?.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let result = dcp_dehaze(&Image::load(input)?, opts)?;
                let output = out_dir.join(input.file_name().unwrap());
                result.image.save_png(&output)?;
                Ok(DcpEntry {
                    input: path_string(input),
                    output: path_string(&output),
                    airlight: result.airlight.rgb(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let report = DcpReport {
        options: *opts,
        entries,
    };
    let path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
