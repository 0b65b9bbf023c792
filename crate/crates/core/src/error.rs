use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("background is not an object")]
    BackgroundId,
    #[error("object identifier {0} exceeds 255")]
    IdOutOfRange(u32),
    #[error("label map must have nonzero width and height")]
    EmptyDimensions,
    #[error("label grid has {found} entries, expected {expected}")]
    LabelLength { expected: usize, found: usize },
    #[error("dimension mismatch: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)]
    DimensionMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("frame indices must be strictly increasing ({previous} followed by {next})")]
    FrameOrder { previous: u32, next: u32 },
    #[error("video {0} has no frames")]
    EmptyVideo(String),

    #[error("no frames found in {}", .0.display())]
    NoFrames(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot decode {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("{} is not an indexed-palette image (color type {color_type})", path.display())]
    NotIndexed { path: PathBuf, color_type: String },
    #[error("{} is {}x{}, expected {}x{}", path.display(), found.0, found.1, expected.0, expected.1)]
    FrameDimensions { path: PathBuf, expected: (u32, u32), found: (u32, u32) },
    #[error("{} duplicates frame index {index}", path.display())]
    DuplicateFrame { path: PathBuf, index: u32 },
    #[error("{} does not have a numeric frame stem", path.display())]
    BadFrameName { path: PathBuf },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot encode {}: {message}", path.display())]
    Encode { path: PathBuf, message: String },
    #[error("invalid JSON in {}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("invalid cascade parameters: {0}")]
    InvalidParams(String),
    #[error("video {video}: {detail}")]
    Misaligned { video: String, detail: String },
    #[error("video {0} has no ground-truth objects to score")]
    NoObjects(String),
    #[error("cannot score an empty dataset")]
    EmptyDataset,

    #[error("invalid failure script: {0}")]
    Script(String),

    #[error("video id {video_id} appears in both {} and {}", annotated.display(), pseudo.display())]
    Collision { video_id: String, annotated: PathBuf, pseudo: PathBuf },
}
