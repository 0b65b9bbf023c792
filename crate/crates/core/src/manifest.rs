//! Training manifest that merges annotated sequences with pseudo-labelled
//! ones.
//!
//! Each root uses the DAVIS/MOSE layout, `<root>/JPEGImages/<video>/` for
//! frames and `<root>/Annotations/<video>/` for masks. Pseudo labels are
//! taken as-is: validation only checks that every frame has a readable
//! mask, never the mask content.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{list_frames, list_videos, read_sequence, to_versioned_json, SequenceLayout, SCHEMA_VERSION};

pub const FRAMES_DIR: &str = "JPEGImages";
pub const MASKS_DIR: &str = "Annotations";

const FRAME_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Annotated,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub frames_dir: PathBuf,
    pub masks_dir: PathBuf,
    pub source: LabelSource,
    pub frame_count: u32,
    pub object_count: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Sorted by `(source, video_id)`.
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub video_id: String,
    pub source: LabelSource,
    pub masks_dir: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestBuild {
    pub manifest: DatasetManifest,
    pub failures: Vec<ValidationFailure>,
}

fn videos_under(root: &Path) -> Result<BTreeSet<String>> {
    if !root.is_dir() {
        return Err(Error::Read {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "root directory not found"),
        });
    }
    let mut ids = BTreeSet::new();
    for sub in [FRAMES_DIR, MASKS_DIR] {
        let dir = root.join(sub);
        if dir.is_dir() {
            ids.extend(list_videos(&dir)?);
        }
    }
    Ok(ids)
}

fn validate_sequence(root: &Path, video_id: &str, source: LabelSource) -> Result<ManifestEntry, ValidationFailure> {
    let frames_dir = root.join(FRAMES_DIR).join(video_id);
    let masks_dir = root.join(MASKS_DIR).join(video_id);
    let fail = |error: String| ValidationFailure {
        video_id: video_id.to_string(),
        source,
        masks_dir: masks_dir.clone(),
        error,
    };
    if !masks_dir.is_dir() {
        return Err(fail("mask directory is missing".into()));
    }
    if !frames_dir.is_dir() {
        return Err(fail(format!("frame directory {} is missing", frames_dir.display())));
    }
    let video = read_sequence(&SequenceLayout::new(root.join(MASKS_DIR), video_id))
        .map_err(|e| fail(e.to_string()))?;
    let frames: BTreeSet<u32> = list_frames(&frames_dir, FRAME_EXTENSIONS)
        .map_err(|e| fail(e.to_string()))?
        .into_iter()
        .map(|(i, _)| i)
        .collect();
    let masks: BTreeSet<u32> = video.frame_indices().collect();
    let missing: Vec<u32> = frames.difference(&masks).copied().collect();
    if !missing.is_empty() {
        return Err(fail(format!("no mask for frames {missing:?}")));
    }
    let orphans: Vec<u32> = masks.difference(&frames).copied().collect();
    if !orphans.is_empty() {
        return Err(fail(format!("masks without frames {orphans:?}")));
    }
    Ok(ManifestEntry {
        video_id: video_id.to_string(),
        frames_dir,
        masks_dir,
        source,
        frame_count: video.len() as u32,
        object_count: video.object_ids().len() as u32,
    })
}

/// Scans both roots. A video id present in both is a hard error; any other
/// problem only drops that sequence into `failures`.
pub fn build_manifest(annotated_root: &Path, pseudo_root: &Path) -> Result<ManifestBuild> {
    let annotated = videos_under(annotated_root)?;
    let pseudo = videos_under(pseudo_root)?;
    if let Some(video_id) = annotated.intersection(&pseudo).next() {
        return Err(Error::Collision {
            video_id: video_id.clone(),
            annotated: annotated_root.to_path_buf(),
            pseudo: pseudo_root.to_path_buf(),
        });
    }

    let jobs: Vec<(&Path, &String, LabelSource)> = annotated
        .iter()
        .map(|v| (annotated_root, v, LabelSource::Annotated))
        .chain(pseudo.iter().map(|v| (pseudo_root, v, LabelSource::Pseudo)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(root, video_id, source)| validate_sequence(root, video_id, source))
        .collect();

    let mut build = ManifestBuild::default();
    for r in results {
        match r {
            Ok(entry) => build.manifest.entries.push(entry),
            Err(failure) => build.failures.push(failure),
        }
    }
    build
        .manifest
        .entries
        .sort_by(|x, y| (x.source, &x.video_id).cmp(&(y.source, &y.video_id)));
    Ok(build)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub videos: u64,
    pub objects: u64,
    /// Per-frame object occurrences.
    pub masks: u64,
}

impl std::ops::AddAssign for SourceCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.videos += rhs.videos;
        self.objects += rhs.objects;
        self.masks += rhs.masks;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub annotated: SourceCounts,
    pub pseudo: SourceCounts,
    pub total: SourceCounts,
}

/// Re-reads every mask directory and counts videos, objects and masks.
pub fn manifest_stats(manifest: &DatasetManifest) -> Result<ManifestStats> {
    let per_entry = manifest
        .entries
        .par_iter()
        .map(|e| {
            let root = e.masks_dir.parent().unwrap_or(Path::new("."));
            let video = read_sequence(&SequenceLayout::new(root, e.video_id.clone()))?;
            let masks = video
                .frames()
                .iter()
                .map(|f| f.labels.object_ids().len() as u64)
                .sum();
            Ok((
                e.source,
                SourceCounts {
                    videos: 1,
                    objects: video.object_ids().len() as u64,
                    masks,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stats = ManifestStats::default();
    for (source, counts) in per_entry {
        match source {
            LabelSource::Annotated => stats.annotated += counts,
            LabelSource::Pseudo => stats.pseudo += counts,
        }
        stats.total += counts;
    }
    Ok(stats)
}

#[derive(Serialize)]
struct Line<'a> {
    schema: u32,
    #[serde(flatten)]
    entry: &'a ManifestEntry,
}

/// One JSON object per line.
pub fn to_jsonl(manifest: &DatasetManifest) -> String {
    manifest
        .entries
        .iter()
        .map(|entry| {
            let mut line = serde_json::to_string(&Line {
                schema: SCHEMA_VERSION,
                entry,
            })
            .expect("manifest entries serialize infallibly");
            line.push('\n');
            line
        })
        .collect()
}

pub fn write_manifest(build: &ManifestBuild, manifest_path: &Path, errors_path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Failures<'a> {
        failures: &'a [ValidationFailure],
    }
    fs::write(manifest_path, to_jsonl(&build.manifest)).map_err(|source| Error::Write {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    fs::write(
        errors_path,
        to_versioned_json(&Failures {
            failures: &build.failures,
        }),
    )
    .map_err(|source| Error::Write {
        path: errors_path.to_path_buf(),
        source,
    })
}
