//! Dataset generation and re-augmentation drivers.
//!
//! Output layout, one directory per tuple:
//!
//! ```text
//! OUT/report.json
//! OUT/<sample_id>/<kind>_<k>/            base tuple, e.g. mono_f02_0
//! OUT/<sample_id>/<kind>_<k>_<class>/    lateral-augmented copy, e.g. mono_f02_0_rotate
//!     source.png  source_valid.png  target.png  target_valid.png
//!     flow.flo | flow.png  meta.json
//! ```
//!
//! Each sample draws from its own random stream keyed by the global seed,
//! its `sample_id` and the stage, so outputs do not depend on manifest order
//! or worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GenConfig;
use crate::egomotion::{synth_general_tuples, CameraModel};
use crate::error::{Error, Result};
use crate::fields::{FlowField, Image};
use crate::io::{self, FlowFormat};
use crate::lateral::{apply_lateral_aug, AugLabel};
use crate::manifest::{DatasetManifest, EntrySource, LoadedEntry, ManifestEntry};
use crate::rng::stream;
use crate::tuple::{Provenance, SampleTuple, TupleKind};
use crate::unify::{ingest_stereo, synth_virtual_stereo, Sign, StereoPair};

pub const META_FILE: &str = "meta.json";
pub const REPORT_FILE: &str = "report.json";

/// Per-tuple metadata written next to the images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleMeta {
    pub provenance: Provenance,
    pub label: AugLabel,
    pub flow_file: String,
    pub width: usize,
    pub height: usize,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sample_id: String,
    pub event: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl CoverageStats {
    fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return CoverageStats::default();
        }
        CoverageStats {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Summary of one emitted tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleSummary {
    /// Directory relative to the output root, `/`-separated.
    pub path: String,
    pub kind: String,
    pub label: AugLabel,
    pub augmented: bool,
    pub coverage: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub global_seed: u64,
    pub samples_total: usize,
    pub samples_ok: usize,
    /// Base tuples per kind.
    pub per_kind: BTreeMap<String, usize>,
    /// Coverage of base tuples per kind.
    pub coverage: BTreeMap<String, CoverageStats>,
    /// Coverage of augmented tuples per class.
    pub augmented_coverage: BTreeMap<String, CoverageStats>,
    pub events: Vec<Event>,
    pub tuples: Vec<TupleSummary>,
}

impl GenerationReport {
    fn collect(global_seed: u64, samples_total: usize, outcomes: Vec<SampleOutcome>) -> Self {
        let mut report = GenerationReport {
            global_seed,
            samples_total,
            ..Default::default()
        };
        let mut base_cov: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut aug_cov: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for o in outcomes {
            if !o.tuples.is_empty() {
                report.samples_ok += 1;
            }
            for t in &o.tuples {
                if t.augmented {
                    aug_cov
                        .entry(t.label.name().to_owned())
                        .or_default()
                        .push(t.coverage);
                } else {
                    *report.per_kind.entry(t.kind.clone()).or_default() += 1;
                    base_cov.entry(t.kind.clone()).or_default().push(t.coverage);
                }
            }
            report.tuples.extend(o.tuples);
            report.events.extend(o.events);
        }
        report.coverage = base_cov
            .iter()
            .map(|(k, v)| (k.clone(), CoverageStats::from_values(v)))
            .collect();
        report.augmented_coverage = aug_cov
            .iter()
            .map(|(k, v)| (k.clone(), CoverageStats::from_values(v)))
            .collect();
        report
    }

    pub fn tuple_count(&self) -> usize {
        self.tuples.len()
    }
}

#[derive(Default)]
struct SampleOutcome {
    tuples: Vec<TupleSummary>,
    events: Vec<Event>,
}

impl SampleOutcome {
    fn event(&mut self, sample_id: &str, event: &str, detail: impl Into<String>) {
        let detail = detail.into();
        warn!("{sample_id}: {event}: {detail}");
        self.events.push(Event {
            sample_id: sample_id.to_owned(),
            event: event.to_owned(),
            detail,
        });
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

/// Writes one tuple into `dir`.
pub fn write_tuple(dir: &Path, tuple: &SampleTuple, format: FlowFormat) -> Result<TupleMeta> {
    // encode first so a range error leaves nothing behind
    let flow_bytes = format.encode(&tuple.flow)?;
    mkdir(dir)?;
    let grid = tuple.flow.grid();
    let flow_file = format!("flow.{}", format.extension());
    io::write_atomic(&dir.join(&flow_file), &flow_bytes)?;
    io::write_image_png(dir.join("source.png"), &tuple.source)?;
    io::write_mask_png(dir.join("source_valid.png"), grid, tuple.source.valid())?;
    io::write_image_png(dir.join("target.png"), &tuple.target)?;
    io::write_mask_png(dir.join("target_valid.png"), grid, tuple.target.valid())?;
    let meta = TupleMeta {
        provenance: tuple.provenance.clone(),
        label: tuple.label,
        flow_file,
        width: grid.width,
        height: grid.height,
        coverage: tuple.coverage(),
    };
    write_json(&dir.join(META_FILE), &meta)?;
    Ok(meta)
}

fn read_masked_image(dir: &Path, name: &str) -> Result<Image> {
    let img = io::read_image(dir.join(format!("{name}.png")))?;
    let (grid, mask) = io::read_mask_png(dir.join(format!("{name}_valid.png")))?;
    img.grid().ensure_same(&grid)?;
    let data = img.data().to_vec();
    Image::with_mask(grid, img.channels(), data, mask)
}

/// Reads a tuple written by [`write_tuple`].
pub fn read_tuple(dir: &Path) -> Result<SampleTuple> {
    let meta_path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::from(e).at(&meta_path))?;
    let meta: TupleMeta = serde_json::from_str(&text).map_err(|e| Error::from(e).at(&meta_path))?;
    let flow: FlowField = io::read_flow(&dir.join(&meta.flow_file))?;
    let source = read_masked_image(dir, "source")?;
    let target = read_masked_image(dir, "target")?;
    flow.grid().ensure_same(&source.grid())?;
    Ok(SampleTuple {
        source,
        target,
        flow,
        label: meta.label,
        provenance: meta.provenance,
    })
}

fn base_pair(
    entry: &ManifestEntry,
    loaded: &LoadedEntry,
    cfg: &GenConfig,
    k: u32,
) -> Result<StereoPair> {
    match (loaded, &entry.source) {
        (LoadedEntry::Mono { image, depth }, _) => {
            let mut rng = stream(cfg.global_seed, &entry.sample_id, &format!("unify/{k}"));
            synth_virtual_stereo(image, depth, &cfg.virtual_stereo, &mut rng)
        }
        (
            LoadedEntry::Stereo {
                left,
                right,
                disparity,
            },
            EntrySource::Stereo {
                disparity_sign, bf, ..
            },
        ) => {
            let sign =
                Sign::from_i8(disparity_sign.unwrap_or(cfg.virtual_stereo.stereo_flow_sign))?;
            let bf = bf.unwrap_or(cfg.virtual_stereo.bf_stereo_constant);
            ingest_stereo(left, right, disparity, bf, sign)
        }
        _ => unreachable!("loaded data always matches the entry modality"),
    }
}

/// Emits one base tuple and, if drawn, its augmented copy.
fn emit(out: &Path, tuple: &SampleTuple, k: u32, cfg: &GenConfig, outcome: &mut SampleOutcome) {
    let id = &tuple.provenance.sample_id;
    let kind_name = tuple.provenance.kind.name();
    let rel = format!("{id}/{kind_name}_{k}");
    match write_tuple(&out.join(&rel), tuple, cfg.output_format) {
        Ok(meta) => outcome.tuples.push(TupleSummary {
            path: rel.clone(),
            kind: kind_name.clone(),
            label: meta.label,
            augmented: false,
            coverage: meta.coverage,
        }),
        Err(e) => {
            outcome.event(id, "tuple_failed", format!("{rel}: {e}"));
            return;
        }
    }

    let mut rng = stream(cfg.global_seed, id, &format!("aug/{kind_name}/{k}"));
    let Some(label) = cfg.lateral.probability.draw(&mut rng) else {
        return;
    };
    let sides = &cfg.lateral.sides;
    let side = sides[rng.random_range(0..sides.len())];
    let spec = cfg
        .lateral
        .ranges
        .sample(label, tuple.flow.grid(), &mut rng);
    let rel_aug = format!("{rel}_{}", label.name());
    let result = apply_lateral_aug(tuple, &spec, side)
        .and_then(|aug| write_tuple(&out.join(&rel_aug), &aug, cfg.output_format));
    match result {
        Ok(meta) => outcome.tuples.push(TupleSummary {
            path: rel_aug,
            kind: kind_name,
            label: meta.label,
            augmented: true,
            coverage: meta.coverage,
        }),
        Err(e) => outcome.event(id, "augmentation_failed", format!("{rel_aug}: {e}")),
    }
}

fn process_entry(entry: &ManifestEntry, cfg: &GenConfig, out: &Path) -> SampleOutcome {
    let mut outcome = SampleOutcome::default();
    let id = entry.sample_id.as_str();
    if let Some(missing) = entry.missing_file() {
        outcome.event(id, "skipped", format!("missing file {}", missing.display()));
        return outcome;
    }
    let loaded = match entry.load() {
        Ok(l) => l,
        Err(e) => {
            outcome.event(id, "skipped", format!("unreadable input: {e}"));
            return outcome;
        }
    };
    let modality = entry.modality();
    for k in 0..cfg.counts.pairs_for(modality) {
        let pair = match base_pair(entry, &loaded, cfg, k) {
            Ok(p) => p,
            Err(e) => {
                outcome.event(id, "pair_failed", format!("pair {k}: {e}"));
                continue;
            }
        };
        if pair.clamped {
            outcome.event(
                id,
                "clamped",
                format!("pair {k}: virtual bf clamped to {:.6}", pair.bf),
            );
        }
        let wanted = |kind: TupleKind| k < cfg.counts.get(kind);
        let cam = entry
            .intrinsics
            .unwrap_or_else(|| CameraModel::default_for(pair.view0.grid()));
        let kinds = TupleKind::ALL.iter().filter(|t| t.modality == modality);
        let needs_motion = kinds
            .clone()
            .any(|t| t.stage != crate::tuple::FlowStage::F01 && wanted(*t));
        let tuples = if needs_motion {
            let mut rng = stream(cfg.global_seed, id, &format!("ego/{k}"));
            match synth_general_tuples(&pair, id, &cam, &cfg.motion, &mut rng) {
                Ok(t) => t,
                Err(e) => {
                    outcome.event(id, "motion_failed", format!("pair {k}: {e}"));
                    vec![pair.to_tuple(id)]
                }
            }
        } else {
            vec![pair.to_tuple(id)]
        };
        for t in tuples.iter().filter(|t| wanted(t.provenance.kind)) {
            emit(out, t, k, cfg, &mut outcome);
        }
    }
    outcome
}

/// Generates the dataset for `manifest` into `out` using `workers` threads
/// and writes `report.json`. Fails only if no sample produced a tuple.
pub fn run_generation(
    manifest: &DatasetManifest,
    cfg: &GenConfig,
    out: &Path,
    workers: usize,
) -> Result<GenerationReport> {
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be at least 1".into()));
    }
    mkdir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<SampleOutcome> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| process_entry(e, cfg, out))
            .collect()
    });
    let report = GenerationReport::collect(cfg.global_seed, manifest.entries.len(), outcomes);
    write_json(&out.join(REPORT_FILE), &report)?;
    info!(
        "generated {} tuples from {}/{} samples",
        report.tuple_count(),
        report.samples_ok,
        report.samples_total
    );
    if report.samples_ok == 0 && report.samples_total > 0 {
        return Err(Error::AllSamplesFailed(report.samples_total));
    }
    Ok(report)
}

/// Tuple directories under `root`, relative and sorted.
pub fn find_tuples(root: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, rel: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
        let dir = root.join(rel);
        if dir.join(META_FILE).is_file() {
            acc.push(rel.to_path_buf());
            return Ok(());
        }
        let mut names: Vec<_> = std::fs::read_dir(&dir)
            .map_err(|e| Error::from(e).at(&dir))?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_ok_and(|t| t.is_dir()))
            .map(|e| e.file_name())
            .collect();
        names.sort();
        for n in names {
            walk(root, &rel.join(n), acc)?;
        }
        Ok(())
    }
    let mut acc = Vec::new();
    walk(root, Path::new(""), &mut acc)?;
    Ok(acc)
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Applies one lateral augmentation to every tuple under `input`, writing the
/// results to the same relative paths under `out`. The class is drawn with
/// weights proportional to the configured class probabilities.
pub fn augment_dataset(input: &Path, out: &Path, cfg: &GenConfig) -> Result<GenerationReport> {
    cfg.validate()?;
    let p = cfg.lateral.probability;
    if p.total() <= 0.0 || cfg.lateral.sides.is_empty() {
        return Err(Error::Config(
            "augment needs a positive class probability and a side".into(),
        ));
    }
    let rels = find_tuples(input)?;
    mkdir(out)?;
    let outcomes: Vec<SampleOutcome> = rels
        .par_iter()
        .map(|rel| {
            let key = rel_string(rel);
            let mut outcome = SampleOutcome::default();
            let tuple = match read_tuple(&input.join(rel)) {
                Ok(t) => t,
                Err(e) => {
                    outcome.event(&key, "skipped", e.to_string());
                    return outcome;
                }
            };
            let mut rng = stream(cfg.global_seed, &key, "augment");
            let r = rng.random::<f64>() * p.total();
            let label = if r < p.flip {
                AugLabel::Flip
            } else if r < p.flip + p.rotate {
                AugLabel::Rotate
            } else {
                AugLabel::Shear
            };
            let side = cfg.lateral.sides[rng.random_range(0..cfg.lateral.sides.len())];
            let spec = cfg
                .lateral
                .ranges
                .sample(label, tuple.flow.grid(), &mut rng);
            let result = apply_lateral_aug(&tuple, &spec, side)
                .and_then(|aug| write_tuple(&out.join(rel), &aug, cfg.output_format));
            match result {
                Ok(meta) => outcome.tuples.push(TupleSummary {
                    path: key,
                    kind: meta.provenance.kind.name(),
                    label: meta.label,
                    augmented: true,
                    coverage: meta.coverage,
                }),
                Err(e) => outcome.event(&key, "augmentation_failed", e.to_string()),
            }
            outcome
        })
        .collect();
    let report = GenerationReport::collect(cfg.global_seed, rels.len(), outcomes);
    write_json(&out.join(REPORT_FILE), &report)?;
    if report.samples_ok == 0 && report.samples_total > 0 {
        return Err(Error::AllSamplesFailed(report.samples_total));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PixelGrid;
    use crate::metrics::evaluate;
    use crate::synthetic::write_demo_dataset;

    fn demo(dir: &Path) -> DatasetManifest {
        let m = write_demo_dataset(&dir.join("in"), PixelGrid::new(48, 36), 5, 1, 1).unwrap();
        DatasetManifest::load(m).unwrap()
    }

    #[test]
    fn emits_six_base_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = demo(dir.path());
        let report =
            run_generation(&manifest, &GenConfig::default(), &dir.path().join("out"), 2).unwrap();
        assert_eq!(report.per_kind.len(), 6);
        assert!(report.per_kind.values().all(|&n| n == 1));
        assert_eq!(report.samples_ok, 2);
        let found = find_tuples(&dir.path().join("out")).unwrap();
        assert_eq!(found.len(), report.tuples.len());
    }

    #[test]
    fn missing_file_is_skipped_and_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = demo(dir.path());
        if let EntrySource::Mono { image, .. } = &mut manifest.entries[0].source {
            *image = dir.path().join("nope.png");
        }
        let report =
            run_generation(&manifest, &GenConfig::default(), &dir.path().join("out"), 1).unwrap();
        assert_eq!(report.samples_ok, 1);
        assert!(report
            .events
            .iter()
            .any(|e| e.event == "skipped" && e.sample_id == "mono_000"));

        manifest.entries.truncate(1);
        let err = run_generation(
            &manifest,
            &GenConfig::default(),
            &dir.path().join("out2"),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::AllSamplesFailed(1)));
    }

    #[test]
    fn emitted_flows_survive_their_own_codec() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = demo(dir.path());
        for format in [FlowFormat::Flo, FlowFormat::KittiPng] {
            let cfg = GenConfig {
                output_format: format,
                ..GenConfig::default()
            };
            let out = dir.path().join(format.extension());
            run_generation(&manifest, &cfg, &out, 1).unwrap();
            for rel in find_tuples(&out).unwrap() {
                let t = read_tuple(&out.join(rel)).unwrap();
                let again = format.decode(&format.encode(&t.flow).unwrap()).unwrap();
                assert_eq!(again, t.flow);
                assert_eq!(evaluate(&again, &t.flow).unwrap().epe, 0.0);
            }
        }
    }

    #[test]
    fn augment_rewrites_every_tuple() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = demo(dir.path());
        let mut cfg = GenConfig::default();
        cfg.lateral.probability = crate::config::ClassProbabilities {
            flip: 0.0,
            rotate: 0.0,
            shear: 0.0,
        };
        let base = dir.path().join("base");
        let gen = run_generation(&manifest, &cfg, &base, 1).unwrap();
        let aug = augment_dataset(&base, &dir.path().join("aug"), &GenConfig::default()).unwrap();
        assert_eq!(aug.tuples.len(), gen.tuples.len());
        assert!(aug
            .tuples
            .iter()
            .all(|t| t.augmented && t.label != AugLabel::None));
    }
}
