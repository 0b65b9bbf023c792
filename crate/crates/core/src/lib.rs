//! Cascaded fusion of two video object segmentation streams and J/F/J&F
//! evaluation.
//!
//! The library consumes per-frame label maps produced by two external
//! trackers, classifies where they disagree, and picks one stream per video
//! (or per object) with prioritised miss-tracking and wrong-tracking rules.
//! It also scores predictions against ground truth, renders synthetic
//! fixtures with scripted failures, and assembles pseudo-label manifests.

pub mod cascade;
pub mod cli;
pub mod contour;
pub mod error;
pub mod io;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod synth;

pub use cascade::{
    classify_frames, decide, fuse, CascadeDecision, CascadeParams, DisagreementRecord,
    Granularity, Reason, RecordKind, Source,
};
pub use contour::{count_contours, is_high_noise, ContourMode, ContourStats};
pub use error::{Error, Result};
pub use io::{read_sequence, write_report, write_sequence, FusionReport, SequenceLayout};
pub use mask::{iou, BinaryMask, Frame, LabelMap, ObjectId, VideoPrediction};
pub use metrics::{boundary_f, region_j, score_dataset, score_video, EvalOptions, MetricScores};
