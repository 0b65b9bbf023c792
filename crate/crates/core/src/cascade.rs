//! Cascaded selection between two prediction streams of the same video.
//!
//! Stream A is the primary tracker, stream B the secondary one. Every
//! `(frame, object)` pair is classified by comparing the two masks:
//!
//! * **miss**: exactly one stream has a valid mask;
//! * **wrong**: both are valid but their IoU is at most `iou_threshold`;
//! * **agree**: anything else.
//!
//! Frame tallies are then fed through two prioritised rules. If either
//! stream misses more than `miss_frame_threshold` frames, the stream that
//! misses fewer is taken and nothing else is looked at. Otherwise, if more
//! than `wrong_frame_threshold` frames are wrong, the stream whose masks are
//! fragmented (more than `contour_noise_threshold` contours) on fewer of
//! those frames is taken. Failing both, stream A is kept.
//!
//! A frame counts once toward a tally if any object triggers the condition.
//! Ties always go to A.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::contour::{count_contours_with, ContourMode, ContourStats};
use crate::error::{Error, Result};
use crate::io::FusionReport;
use crate::mask::{Frame, LabelMap, ObjectId, VideoPrediction};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One decision for the whole video.
    #[default]
    Video,
    /// One decision per object track; the output is composed per object.
    Object,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub iou_threshold: f64,
    pub miss_frame_threshold: u32,
    pub wrong_frame_threshold: u32,
    pub contour_noise_threshold: u32,
    pub min_pixels: u64,
    pub granularity: Granularity,
    #[serde(default)]
    pub contour_mode: ContourMode,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.1,
            miss_frame_threshold: 10,
            wrong_frame_threshold: 10,
            contour_noise_threshold: 6,
            min_pixels: 1,
            granularity: Granularity::Video,
            contour_mode: ContourMode::WithHoles,
        }
    }
}

impl CascadeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::InvalidParams(format!(
                "iou_threshold {} is outside [0, 1]",
                self.iou_threshold
            )));
        }
        let counts = [
            ("miss_frame_threshold", self.miss_frame_threshold as u64),
            ("wrong_frame_threshold", self.wrong_frame_threshold as u64),
            ("contour_noise_threshold", self.contour_noise_threshold as u64),
            ("min_pixels", self.min_pixels),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidParams(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Agree,
    /// A has no valid mask, B does.
    MissA,
    /// B has no valid mask, A does.
    MissB,
    Wrong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRecord {
    #[serde(rename = "frame")]
    pub frame_index: u32,
    #[serde(rename = "object")]
    pub object_id: ObjectId,
    pub kind: RecordKind,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    MissTracking,
    WrongTrackingNoise,
    Default,
}

/// Selection verdict with the tallies that produced it. Noise counts are
/// only filled in when the wrong-tracking rule was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CascadeDecision {
    pub source: Source,
    pub reason: Reason,
    pub miss_count_a: u32,
    pub miss_count_b: u32,
    pub wrong_count: u32,
    pub noise_frames_a: u32,
    pub noise_frames_b: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectDecision {
    pub object: ObjectId,
    #[serde(flatten)]
    pub decision: CascadeDecision,
}

/// Per-object high-noise frame counts over the video-level wrong frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectNoise {
    pub object: ObjectId,
    pub noise_frames_a: u32,
    pub noise_frames_b: u32,
}

fn check_pair(a: &VideoPrediction, b: &VideoPrediction) -> Result<()> {
    for v in [a, b] {
        if v.is_empty() {
            return Err(Error::EmptyVideo(v.video_id().to_string()));
        }
    }
    let (da, db) = (a.dimensions(), b.dimensions());
    if da != db {
        return Err(Error::DimensionMismatch {
            expected: da.unwrap_or_default(),
            found: db.unwrap_or_default(),
        });
    }
    Ok(())
}

/// Per-object `(area_a, area_b, intersection)` for one frame, indexed by id.
fn frame_overlaps(a: Option<&LabelMap>, b: Option<&LabelMap>) -> [(u64, u64, u64); 256] {
    let mut acc = [(0u64, 0u64, 0u64); 256];
    match (a, b) {
        (Some(a), Some(b)) => {
            for (&la, &lb) in a.labels().iter().zip(b.labels()) {
                acc[la as usize].0 += 1;
                acc[lb as usize].1 += 1;
                if la == lb {
                    acc[la as usize].2 += 1;
                }
            }
        }
        (Some(a), None) => a.labels().iter().for_each(|&l| acc[l as usize].0 += 1),
        (None, Some(b)) => b.labels().iter().for_each(|&l| acc[l as usize].1 += 1),
        (None, None) => {}
    }
    acc
}

/// One record per `(frame, object)` over the union of both streams' frames
/// and object ids, sorted by frame then object. A frame missing from one
/// stream is treated as an empty prediction there.
pub fn classify_frames(
    a: &VideoPrediction,
    b: &VideoPrediction,
    params: &CascadeParams,
) -> Result<Vec<DisagreementRecord>> {
    params.validate()?;
    check_pair(a, b)?;
    let frames: BTreeSet<u32> = a.frame_indices().chain(b.frame_indices()).collect();
    let objects: BTreeSet<ObjectId> = a.object_ids().union(&b.object_ids()).copied().collect();

    let mut records = Vec::with_capacity(frames.len() * objects.len());
    for &f in &frames {
        let overlaps = frame_overlaps(a.frame(f), b.frame(f));
        for &o in &objects {
            let (area_a, area_b, inter) = overlaps[o as usize];
            let union = area_a + area_b - inter;
            let iou = if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            };
            let valid_a = area_a >= params.min_pixels;
            let valid_b = area_b >= params.min_pixels;
            let kind = match (valid_a, valid_b) {
                (false, true) => RecordKind::MissA,
                (true, false) => RecordKind::MissB,
                (true, true) if iou <= params.iou_threshold => RecordKind::Wrong,
                _ => RecordKind::Agree,
            };
            records.push(DisagreementRecord {
                frame_index: f,
                object_id: o,
                kind,
                iou,
            });
        }
    }
    Ok(records)
}

fn frames_of(records: &[DisagreementRecord], kind: RecordKind) -> BTreeSet<u32> {
    records
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| r.frame_index)
        .collect()
}

fn noisy_frames(
    stats: &[ContourStats],
    frames: &BTreeSet<u32>,
    objects: &BTreeSet<ObjectId>,
    threshold: u32,
) -> BTreeSet<u32> {
    stats
        .iter()
        .filter(|s| {
            frames.contains(&s.frame_index)
                && objects.contains(&s.object_id)
                && s.total_contours > threshold
        })
        .map(|s| s.frame_index)
        .collect()
}

/// Applies the miss-tracking rule, then the wrong-tracking rule, to the
/// records of one video (or one object track). The objects in scope are
/// exactly those appearing in `records`; contour stats for other objects
/// are ignored.
pub fn decide(
    records: &[DisagreementRecord],
    noise_a: &[ContourStats],
    noise_b: &[ContourStats],
    params: &CascadeParams,
) -> CascadeDecision {
    let miss_count_a = frames_of(records, RecordKind::MissA).len() as u32;
    let miss_count_b = frames_of(records, RecordKind::MissB).len() as u32;
    let wrong_frames = frames_of(records, RecordKind::Wrong);
    let mut decision = CascadeDecision {
        source: Source::A,
        reason: Reason::Default,
        miss_count_a,
        miss_count_b,
        wrong_count: wrong_frames.len() as u32,
        noise_frames_a: 0,
        noise_frames_b: 0,
    };

    if miss_count_a.max(miss_count_b) > params.miss_frame_threshold {
        decision.reason = Reason::MissTracking;
        decision.source = if miss_count_b < miss_count_a {
            Source::B
        } else {
            Source::A
        };
        return decision;
    }

    if decision.wrong_count > params.wrong_frame_threshold {
        let objects: BTreeSet<ObjectId> = records.iter().map(|r| r.object_id).collect();
        let threshold = params.contour_noise_threshold;
        decision.noise_frames_a = noisy_frames(noise_a, &wrong_frames, &objects, threshold).len() as u32;
        decision.noise_frames_b = noisy_frames(noise_b, &wrong_frames, &objects, threshold).len() as u32;
        decision.reason = Reason::WrongTrackingNoise;
        decision.source = if decision.noise_frames_b < decision.noise_frames_a {
            Source::B
        } else {
            Source::A
        };
    }
    decision
}

/// Contour stats for every object present in each of `frames` of `video`.
pub fn contour_stats(
    video: &VideoPrediction,
    frames: &BTreeSet<u32>,
    mode: ContourMode,
) -> Vec<ContourStats> {
    let mut out = Vec::new();
    for &f in frames {
        let Some(map) = video.frame(f) else { continue };
        for o in map.object_ids() {
            let mask = map.binary_mask(o).expect("object ids are nonzero");
            out.push(count_contours_with(&mask, mode).tagged(f, o));
        }
    }
    out
}

/// Records plus the contour statistics of both streams on wrong frames.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub records: Vec<DisagreementRecord>,
    pub noise_a: Vec<ContourStats>,
    pub noise_b: Vec<ContourStats>,
}

impl Analysis {
    pub fn run(a: &VideoPrediction, b: &VideoPrediction, params: &CascadeParams) -> Result<Self> {
        let records = classify_frames(a, b, params)?;
        let wrong = frames_of(&records, RecordKind::Wrong);
        Ok(Self {
            noise_a: contour_stats(a, &wrong, params.contour_mode),
            noise_b: contour_stats(b, &wrong, params.contour_mode),
            records,
        })
    }

    pub fn decide(&self, params: &CascadeParams) -> CascadeDecision {
        decide(&self.records, &self.noise_a, &self.noise_b, params)
    }

    pub fn object_ids(&self) -> BTreeSet<ObjectId> {
        self.records.iter().map(|r| r.object_id).collect()
    }

    pub fn object_decisions(&self, params: &CascadeParams) -> Vec<ObjectDecision> {
        self.object_ids()
            .into_iter()
            .map(|object| {
                let records: Vec<_> = self
                    .records
                    .iter()
                    .filter(|r| r.object_id == object)
                    .copied()
                    .collect();
                ObjectDecision {
                    object,
                    decision: decide(&records, &self.noise_a, &self.noise_b, params),
                }
            })
            .collect()
    }

    /// For inspection: on the video's wrong frames, how often each object's
    /// own mask is high-noise in each stream.
    pub fn object_noise(&self, params: &CascadeParams) -> Vec<ObjectNoise> {
        let wrong = frames_of(&self.records, RecordKind::Wrong);
        let threshold = params.contour_noise_threshold;
        self.object_ids()
            .into_iter()
            .map(|object| {
                let only = BTreeSet::from([object]);
                ObjectNoise {
                    object,
                    noise_frames_a: noisy_frames(&self.noise_a, &wrong, &only, threshold).len()
                        as u32,
                    noise_frames_b: noisy_frames(&self.noise_b, &wrong, &only, threshold).len()
                        as u32,
                }
            })
            .collect()
    }
}

/// Runs the cascade and produces the fused stream with its report.
///
/// In video mode the output is the selected stream unchanged. In object
/// mode each object is copied from its own selected stream and objects are
/// painted in ascending id order, so a higher id wins where two selected
/// masks overlap. The report's top-level `decision` is always the
/// video-level verdict.
pub fn fuse(
    a: &VideoPrediction,
    b: &VideoPrediction,
    params: &CascadeParams,
) -> Result<(VideoPrediction, FusionReport)> {
    let analysis = Analysis::run(a, b, params)?;
    let decision = analysis.decide(params);

    let (fused, object_decisions) = match params.granularity {
        Granularity::Video => {
            let chosen = match decision.source {
                Source::A => a,
                Source::B => b,
            };
            (chosen.clone().with_video_id(a.video_id()), Vec::new())
        }
        Granularity::Object => {
            let decisions = analysis.object_decisions(params);
            let sources: Vec<(ObjectId, Source)> = decisions
                .iter()
                .map(|d| (d.object, d.decision.source))
                .collect();
            (compose(a, b, &sources)?, decisions)
        }
    };

    let report = FusionReport {
        video_id: a.video_id().to_string(),
        parameters: *params,
        decision,
        object_decisions,
        records: analysis.records,
    };
    Ok((fused, report))
}

/// Paints each object from its selected stream onto empty frames.
fn compose(
    a: &VideoPrediction,
    b: &VideoPrediction,
    sources: &[(ObjectId, Source)],
) -> Result<VideoPrediction> {
    let uses = |s| sources.iter().any(|&(_, src)| src == s);
    let frames: BTreeSet<u32> = match (uses(Source::A), uses(Source::B)) {
        (_, false) => a.frame_indices().collect(),
        (false, true) => b.frame_indices().collect(),
        (true, true) => a.frame_indices().chain(b.frame_indices()).collect(),
    };
    let (w, h) = a.dimensions().expect("checked nonempty");
    let by_id: BTreeMap<ObjectId, Source> = sources.iter().copied().collect();

    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let mut labels = vec![0u8; w as usize * h as usize];
        for (&object, &source) in &by_id {
            let stream = match source {
                Source::A => a,
                Source::B => b,
            };
            let Some(map) = stream.frame(f) else { continue };
            for (dst, &l) in labels.iter_mut().zip(map.labels()) {
                if l == object {
                    *dst = object;
                }
            }
        }
        out.push(Frame {
            index: f,
            labels: LabelMap::new(w, h, labels)?,
        });
    }
    VideoPrediction::new(a.video_id(), out)
}
