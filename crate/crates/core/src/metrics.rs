//! Region similarity (J), boundary accuracy (F) and their mean (J&F).
//!
//! J is mask IoU. F is the F-measure of boundary pixels matched within a
//! Euclidean distance tolerance, which defaults to `ceil(0.008 * diagonal)`
//! pixels as in the DAVIS toolkit. Sequence scores average each object's
//! per-frame values over the evaluated frames and then average objects;
//! dataset scores average all object tracks of all videos.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{iou, BinaryMask, ObjectId, VideoPrediction};

pub const BOUNDARY_TOLERANCE_RATIO: f64 = 0.008;

pub fn default_tolerance(width: u32, height: u32) -> u32 {
    let diagonal = (width as f64).hypot(height as f64);
    (BOUNDARY_TOLERANCE_RATIO * diagonal).ceil() as u32
}

/// IoU of prediction and ground truth; 1.0 when both are empty.
pub fn region_j(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    iou(pred, gt)
}

/// Foreground pixels with a 4-neighbour in the background or outside the
/// image.
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dimensions();
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && (x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1))
    })
    .expect("same dimensions as a valid mask")
}

/// Marks every pixel within Euclidean distance `radius` of a set pixel.
fn dilate_disk(mask: &BinaryMask, radius: u32) -> Vec<bool> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let r = radius as i64;
    let offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let mut out = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as u32, y as u32) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if (0..w).contains(&nx) && (0..h).contains(&ny) {
                    out[(ny * w + nx) as usize] = true;
                }
            }
        }
    }
    out
}

/// `(matched, total)` pixels of `from` lying within `tolerance` of `to`.
pub fn boundary_matches(from: &BinaryMask, to: &BinaryMask, tolerance: u32) -> (u64, u64) {
    let reach = dilate_disk(to, tolerance);
    let mut matched = 0;
    let mut total = 0;
    for (&b, &r) in from.bits().iter().zip(&reach) {
        if b {
            total += 1;
            matched += r as u64;
        }
    }
    (matched, total)
}

pub fn boundary_f(pred: &BinaryMask, gt: &BinaryMask, tolerance: u32) -> Result<f64> {
    if pred.dimensions() != gt.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: gt.dimensions(),
            found: pred.dimensions(),
        });
    }
    let pred_b = boundary(pred);
    let gt_b = boundary(gt);
    let (pred_hits, pred_total) = boundary_matches(&pred_b, &gt_b, tolerance);
    let (gt_hits, gt_total) = boundary_matches(&gt_b, &pred_b, tolerance);
    Ok(f_measure(pred_hits, pred_total, gt_hits, gt_total))
}

fn f_measure(pred_hits: u64, pred_total: u64, gt_hits: u64, gt_total: u64) -> f64 {
    match (pred_total, gt_total) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => {
            let precision = pred_hits as f64 / pred_total as f64;
            let recall = gt_hits as f64 / gt_total as f64;
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Boundary tolerance in pixels; `None` uses the diagonal rule.
    pub tolerance: Option<u32>,
    /// Score the first frame too (it is the given prompt in the
    /// semi-supervised protocol, so it is skipped by default).
    pub include_first_frame: bool,
    pub per_frame: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame: u32,
    pub object: ObjectId,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    #[serde(rename = "J")]
    pub j_mean: f64,
    #[serde(rename = "F")]
    pub f_mean: f64,
    #[serde(rename = "JF")]
    pub jf: f64,
    pub per_object: BTreeMap<ObjectId, ObjectScore>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_frame: Option<Vec<FrameScore>>,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

pub fn score_video(
    pred: &VideoPrediction,
    gt: &VideoPrediction,
    opts: &EvalOptions,
) -> Result<MetricScores> {
    let misaligned = |detail: String| Error::Misaligned {
        video: gt.video_id().to_string(),
        detail,
    };
    let pred_idx: Vec<u32> = pred.frame_indices().collect();
    let gt_idx: Vec<u32> = gt.frame_indices().collect();
    if pred_idx != gt_idx {
        return Err(misaligned(format!(
            "prediction has {} frames, ground truth has {} (or indices differ)",
            pred_idx.len(),
            gt_idx.len()
        )));
    }
    if pred.dimensions() != gt.dimensions() {
        return Err(misaligned(format!(
            "prediction is {:?}, ground truth is {:?}",
            pred.dimensions(),
            gt.dimensions()
        )));
    }
    let objects = gt.object_ids();
    if objects.is_empty() {
        return Err(Error::NoObjects(gt.video_id().to_string()));
    }
    let skip = usize::from(!opts.include_first_frame);
    let evaluated: Vec<_> = pred.frames().iter().zip(gt.frames()).skip(skip).collect();
    if evaluated.is_empty() {
        return Err(misaligned("no frames left to evaluate".into()));
    }
    let (w, h) = gt.dimensions().expect("nonempty");
    let tolerance = opts.tolerance.unwrap_or_else(|| default_tolerance(w, h));

    let mut per_object = BTreeMap::new();
    let mut per_frame = Vec::new();
    for &o in &objects {
        let mut js = Vec::with_capacity(evaluated.len());
        let mut fs = Vec::with_capacity(evaluated.len());
        for (p, g) in &evaluated {
            let pm = p.labels.binary_mask(o)?;
            let gm = g.labels.binary_mask(o)?;
            let j = region_j(&pm, &gm)?;
            let f = boundary_f(&pm, &gm, tolerance)?;
            if opts.per_frame {
                per_frame.push(FrameScore {
                    frame: g.index,
                    object: o,
                    j,
                    f,
                });
            }
            js.push(j);
            fs.push(f);
        }
        per_object.insert(
            o,
            ObjectScore {
                j: mean(js.into_iter()),
                f: mean(fs.into_iter()),
            },
        );
    }
    let j_mean = mean(per_object.values().map(|s| s.j));
    let f_mean = mean(per_object.values().map(|s| s.f));
    per_frame.sort_by_key(|s| (s.frame, s.object));
    Ok(MetricScores {
        j_mean,
        f_mean,
        jf: (j_mean + f_mean) / 2.0,
        per_object,
        per_frame: opts.per_frame.then_some(per_frame),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "JF")]
    pub jf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScores {
    pub global: Summary,
    pub per_video: BTreeMap<String, Summary>,
    /// Keyed `"<video_id>/<object_id>"`.
    pub per_object: BTreeMap<String, ObjectScore>,
}

/// Unweighted mean over every object track of every video.
pub fn score_dataset(
    pairs: &[(VideoPrediction, VideoPrediction)],
    opts: &EvalOptions,
) -> Result<DatasetScores> {
    let scored = pairs
        .iter()
        .map(|(pred, gt)| Ok((gt.video_id().to_string(), score_video(pred, gt, opts)?)))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&scored)
}

/// Combines already-computed sequence scores.
pub fn aggregate(videos: &[(String, MetricScores)]) -> Result<DatasetScores> {
    if videos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut per_video = BTreeMap::new();
    let mut per_object = BTreeMap::new();
    for (id, s) in videos {
        per_video.insert(
            id.clone(),
            Summary {
                j: s.j_mean,
                f: s.f_mean,
                jf: s.jf,
            },
        );
        for (o, score) in &s.per_object {
            per_object.insert(format!("{id}/{o}"), *score);
        }
    }
    let all: Vec<&ObjectScore> = videos.iter().flat_map(|(_, s)| s.per_object.values()).collect();
    let j = mean(all.iter().map(|s| s.j));
    let f = mean(all.iter().map(|s| s.f));
    Ok(DatasetScores {
        global: Summary {
            j,
            f,
            jf: (j + f) / 2.0,
        },
        per_video,
        per_object,
    })
}
