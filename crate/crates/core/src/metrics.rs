//! Endpoint error and outlier percentage.
//!
//! Pixels invalid in the ground truth are ignored. Pixels valid in the
//! ground truth but missing from the prediction are outliers for F1-all; the
//! endpoint error averages only over mutually valid pixels.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FlowField;
use crate::io::FlowFormat;

/// Absolute outlier threshold in pixels.
pub const OUTLIER_ABS_PX: f64 = 3.0;
/// Relative outlier threshold (fraction of ground-truth magnitude).
pub const OUTLIER_REL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean endpoint error in pixels over mutually valid pixels.
    pub epe: f64,
    /// Outlier percentage in `[0, 100]` over ground-truth-valid pixels.
    pub f1_all: f64,
    /// Ground-truth-valid pixels evaluated.
    pub n_valid: usize,
    /// Ground-truth-valid pixels without a prediction.
    pub n_missing: usize,
}

/// True if an endpoint error counts as an outlier for a ground-truth vector
/// of magnitude `gt_mag`.
#[inline]
pub fn is_outlier(err: f64, gt_mag: f64) -> bool {
    err > OUTLIER_ABS_PX && err > OUTLIER_REL * gt_mag
}

/// Running totals over any number of flow pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalAccumulator {
    epe_sum: f64,
    n_mutual: usize,
    n_gt: usize,
    n_outliers: usize,
}

impl EvalAccumulator {
    pub fn add(&mut self, pred: &FlowField, gt: &FlowField) -> Result<()> {
        pred.grid().ensure_same(&gt.grid())?;
        for i in 0..gt.grid().len() {
            let Some((gu, gv)) = gt.get_index(i) else {
                continue;
            };
            self.n_gt += 1;
            match pred.get_index(i) {
                Some((pu, pv)) => {
                    let err = (pu - gu).hypot(pv - gv);
                    self.epe_sum += err;
                    self.n_mutual += 1;
                    if is_outlier(err, gu.hypot(gv)) {
                        self.n_outliers += 1;
                    }
                }
                None => self.n_outliers += 1,
            }
        }
        Ok(())
    }

    pub fn report(&self) -> Result<EvalReport> {
        if self.n_mutual == 0 {
            return Err(Error::NoOverlap);
        }
        Ok(EvalReport {
            epe: self.epe_sum / self.n_mutual as f64,
            f1_all: 100.0 * self.n_outliers as f64 / self.n_gt as f64,
            n_valid: self.n_gt,
            n_missing: self.n_gt - self.n_mutual,
        })
    }
}

/// Both metrics for one prediction.
pub fn evaluate(pred: &FlowField, gt: &FlowField) -> Result<EvalReport> {
    let mut acc = EvalAccumulator::default();
    acc.add(pred, gt)?;
    acc.report()
}

/// Mean endpoint error over mutually valid pixels.
pub fn epe(pred: &FlowField, gt: &FlowField) -> Result<f64> {
    evaluate(pred, gt).map(|r| r.epe)
}

/// Percentage of ground-truth-valid pixels whose error exceeds both 3 px and
/// 5 % of the ground-truth magnitude.
pub fn f1_all(pred: &FlowField, gt: &FlowField) -> Result<f64> {
    evaluate(pred, gt).map(|r| r.f1_all)
}

/// Result of comparing two directory trees of flow files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectoryReport {
    #[serde(flatten)]
    pub totals: EvalReport,
    /// Ground-truth files compared.
    pub files: usize,
    /// Ground-truth files without a prediction; all their pixels count as
    /// missing.
    pub missing_files: Vec<String>,
}

fn flow_files(root: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let dir = root.join(&rel);
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::from(e).at(&dir))? {
            let entry = entry.map_err(|e| Error::from(e).at(&dir))?;
            let rel_child = rel.join(entry.file_name());
            let ty = entry
                .file_type()
                .map_err(|e| Error::from(e).at(entry.path()))?;
            if ty.is_dir() {
                stack.push(rel_child);
            } else if rel_child
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case(ext))
            {
                out.push(rel_child);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Pools EPE and F1-all over every flow file under `gt`, matching
/// predictions by relative path under `pred`.
pub fn evaluate_directories(pred: &Path, gt: &Path, format: FlowFormat) -> Result<DirectoryReport> {
    let files = flow_files(gt, format.extension())?;
    let mut acc = EvalAccumulator::default();
    let mut missing_files = Vec::new();
    for rel in &files {
        let gt_path = gt.join(rel);
        let gt_flow = crate::io::read_flow(&gt_path)?;
        let pred_path = pred.join(rel);
        let pred_flow = if pred_path.is_file() {
            crate::io::read_flow(&pred_path)?
        } else {
            missing_files.push(rel.to_string_lossy().replace('\\', "/"));
            FlowField::from_fn(gt_flow.grid(), |_, _| None)
        };
        acc.add(&pred_flow, &gt_flow)
            .map_err(|e| e.at(&pred_path))?;
    }
    Ok(DirectoryReport {
        totals: acc.report()?,
        files: files.len(),
        missing_files,
    })
}

/// Mean of `|Δu|` and `|Δv|` over mutually valid pixels.
pub(crate) fn mutual_l1(a: &FlowField, b: &FlowField) -> Result<f64> {
    a.grid().ensure_same(&b.grid())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..a.grid().len() {
        if let (Some((au, av)), Some((bu, bv))) = (a.get_index(i), b.get_index(i)) {
            sum += (au - bu).abs() + (av - bv).abs();
            n += 2;
        }
    }
    if n == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(sum / n as f64)
}
