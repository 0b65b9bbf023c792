//! On-disk mask sequences and fusion reports.
//!
//! Sequences follow the DAVIS/MOSE layout: `<root>/<video_id>/<frame>.png`,
//! one 8-bit indexed-palette PNG per frame, pixel value = object id, file
//! stem = zero-padded frame index. Palette colours carry no meaning.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeDecision, CascadeParams, DisagreementRecord, ObjectDecision};
use crate::error::{Error, Result};
use crate::mask::{Frame, LabelMap, VideoPrediction};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_DIGITS: usize = 5;

/// Where one video's mask frames live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceLayout {
    pub root: PathBuf,
    pub video_id: String,
    /// Zero-padding width of frame stems when writing.
    pub digits: usize,
}

impl SequenceLayout {
    pub fn new(root: impl Into<PathBuf>, video_id: impl Into<String>) -> Self {
        Self {
            root: root.into(),
            video_id: video_id.into(),
            digits: DEFAULT_DIGITS,
        }
    }

    pub fn dir(&self) -> PathBuf {
        self.root.join(&self.video_id)
    }

    pub fn frame_path(&self, index: u32) -> PathBuf {
        self.dir()
            .join(format!("{:0width$}.png", index, width = self.digits))
    }
}

/// Sorted subdirectory names of `root`, skipping hidden entries.
pub fn list_videos(root: &Path) -> Result<Vec<String>> {
    let read_err = |source| Error::Read {
        path: root.to_path_buf(),
        source,
    };
    let mut ids = Vec::new();
    for entry in fs::read_dir(root).map_err(read_err)? {
        let entry = entry.map_err(read_err)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        if entry.file_type().map_err(read_err)?.is_dir() {
            ids.push(name);
        }
    }
    ids.sort();
    Ok(ids)
}

/// Numeric frame stems of files in `dir` whose extension is one of `exts`,
/// sorted by index. Duplicate indices are an error.
pub(crate) fn list_frames(dir: &Path, exts: &[&str]) -> Result<Vec<(u32, PathBuf)>> {
    let read_err = |source| Error::Read {
        path: dir.to_path_buf(),
        source,
    };
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(read_err)? {
        let path = entry.map_err(read_err)?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| exts.contains(&e.as_str())) || !path.is_file() {
            continue;
        }
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| Error::BadFrameName { path: path.clone() })?;
        frames.push((index, path));
    }
    // Path order breaks ties so the reported duplicate is stable.
    frames.sort();
    for pair in frames.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::DuplicateFrame {
                path: pair[1].1.clone(),
                index: pair[1].0,
            });
        }
    }
    Ok(frames)
}

/// Decodes one indexed-palette PNG into a label map.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let decode_err = |e: png::DecodingError| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        path: path.to_path_buf(),
        message: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    if info.color_type != png::ColorType::Indexed {
        return Err(Error::NotIndexed {
            path: path.to_path_buf(),
            color_type: format!("{:?}", info.color_type),
        });
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let depth = info.bit_depth as usize;
    let mut labels = Vec::with_capacity(w * h);
    for row in buf[..info.buffer_size()].chunks_exact(info.line_size).take(h) {
        if depth == 8 {
            labels.extend_from_slice(&row[..w]);
        } else {
            let per_byte = 8 / depth;
            let mask = (1u8 << depth) - 1;
            labels.extend((0..w).map(|x| {
                let shift = 8 - depth * (x % per_byte + 1);
                (row[x / per_byte] >> shift) & mask
            }));
        }
    }
    LabelMap::new(info.width, info.height, labels).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Encodes a label map as an 8-bit indexed PNG with the DAVIS palette.
pub fn write_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let encode_err = |e: png::EncodingError| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut encoder = png::Encoder::new(BufWriter::new(file), map.width(), map.height());
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(davis_palette().to_vec());
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(map.labels()).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

/// The 256-entry colour map used by DAVIS/VOC annotation files.
pub fn davis_palette() -> [u8; 768] {
    let mut palette = [0u8; 768];
    for i in 0..256usize {
        let (mut r, mut g, mut b) = (0u8, 0u8, 0u8);
        let mut c = i;
        for j in 0..8 {
            r |= ((c & 1) as u8) << (7 - j);
            g |= (((c >> 1) & 1) as u8) << (7 - j);
            b |= (((c >> 2) & 1) as u8) << (7 - j);
            c >>= 3;
        }
        palette[i * 3..i * 3 + 3].copy_from_slice(&[r, g, b]);
    }
    palette
}

pub fn read_sequence(layout: &SequenceLayout) -> Result<VideoPrediction> {
    let dir = layout.dir();
    let files = list_frames(&dir, &["png"])?;
    if files.is_empty() {
        return Err(Error::NoFrames(dir));
    }
    let mut frames: Vec<Frame> = Vec::with_capacity(files.len());
    for (index, path) in files {
        let labels = read_label_map(&path)?;
        if let Some(first) = frames.first() {
            let expected = first.labels.dimensions();
            if labels.dimensions() != expected {
                return Err(Error::FrameDimensions {
                    path,
                    expected,
                    found: labels.dimensions(),
                });
            }
        }
        frames.push(Frame { index, labels });
    }
    VideoPrediction::new(layout.video_id.clone(), frames)
}

/// Writes one PNG per frame into `layout.dir()`, creating it if needed.
pub fn write_sequence(video: &VideoPrediction, layout: &SequenceLayout) -> Result<()> {
    let dir = layout.dir();
    fs::create_dir_all(&dir).map_err(|source| Error::Write {
        path: dir.clone(),
        source,
    })?;
    for frame in video.frames() {
        write_label_map(&frame.labels, &layout.frame_path(frame.index))?;
    }
    Ok(())
}

/// Everything the cascade decided for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub video_id: String,
    pub parameters: CascadeParams,
    pub decision: CascadeDecision,
    /// Per-object verdicts; empty unless the cascade ran per object.
    #[serde(default)]
    pub object_decisions: Vec<ObjectDecision>,
    /// Sorted by `(frame, object)`.
    pub records: Vec<DisagreementRecord>,
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a leading `"schema"` field and a trailing newline.
pub fn to_versioned_json<T: Serialize>(body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema: SCHEMA_VERSION,
        body,
    })
    .expect("report types serialize infallibly");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(body: &T, path: &Path) -> Result<()> {
    fs::write(path, to_versioned_json(body)).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_report(report: &FusionReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: &Path) -> Result<FusionReport> {
    let text = fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
