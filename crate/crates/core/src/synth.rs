//! Deterministic synthetic videos with scripted tracker failures.
//!
//! Objects are axis-aligned rectangles following a trajectory. Two
//! prediction streams start as exact copies of the ground truth and then
//! have failures injected on chosen frame ranges:
//!
//! * `dropout` erases the object;
//! * `displacement` moves the rectangle, by default a full width (or
//!   height) away so it no longer overlaps the truth at all;
//! * `fragmentation` replaces the rectangle with `pieces` square blocks on
//!   a grid with one-pixel gaps, so the mask has exactly `pieces` contours.
//!
//! Per frame, displacement applies first, then fragmentation, then dropout.
//! Objects are painted in ascending id order.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::Source;
use crate::error::{Error, Result};
use crate::mask::{LabelMap, ObjectId, VideoPrediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Exact IoU of two rectangles.
    pub fn iou(&self, other: &Rect) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) as i64 - self.x.max(other.x) as i64;
        let iy = (self.y + self.h).min(other.y + other.h) as i64 - self.y.max(other.y) as i64;
        let inter = (ix.max(0) * iy.max(0)) as u64;
        inter as f64 / (self.area() + other.area() - inter) as f64
    }

    fn fits(&self, canvas: Canvas) -> bool {
        self.w > 0
            && self.h > 0
            && self.x as u64 + self.w as u64 <= canvas.width as u64
            && self.y as u64 + self.h as u64 <= canvas.height as u64
    }

    fn translated(&self, dx: i64, dy: i64, canvas: Canvas) -> Option<Rect> {
        let x = u32::try_from(self.x as i64 + dx).ok()?;
        let y = u32::try_from(self.y as i64 + dy).ok()?;
        let r = Rect { x, y, ..*self };
        r.fits(canvas).then_some(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trajectory {
    /// One rectangle per frame.
    Frames(Vec<Rect>),
    /// `start` moved by `velocity` pixels per frame.
    Linear { start: Rect, velocity: [i32; 2] },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub id: ObjectId,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InjectionKind {
    Dropout,
    Displacement {
        #[serde(default)]
        offset: Option<[i32; 2]>,
    },
    Fragmentation {
        pieces: u32,
        #[serde(default = "default_block")]
        block: u32,
    },
}

fn default_block() -> u32 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub target: Source,
    pub object: ObjectId,
    /// Half-open `[start, end)` frame range.
    pub frames: [u32; 2],
    #[serde(flatten)]
    pub kind: InjectionKind,
}

impl Injection {
    fn covers(&self, frame: u32) -> bool {
        (self.frames[0]..self.frames[1]).contains(&frame)
    }
}

fn default_video_id() -> String {
    "synth".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureScript {
    #[serde(default = "default_video_id")]
    pub video_id: String,
    pub video_length: u32,
    pub canvas: Canvas,
    pub objects: Vec<ObjectTrack>,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthVideo {
    pub gt: VideoPrediction,
    pub a: VideoPrediction,
    pub b: VideoPrediction,
}

enum Shape {
    Absent,
    Solid(Rect),
    Blocks(Vec<Rect>),
}

fn script_err(msg: impl Into<String>) -> Error {
    Error::Script(msg.into())
}

impl FailureScript {
    /// Ground-truth rectangle of `track` on `frame`.
    pub fn rect_at(&self, track: &ObjectTrack, frame: u32) -> Result<Rect> {
        let rect = match &track.trajectory {
            Trajectory::Frames(rects) => rects[frame as usize],
            Trajectory::Linear { start, velocity } => {
                let f = frame as i64;
                let x = start.x as i64 + velocity[0] as i64 * f;
                let y = start.y as i64 + velocity[1] as i64 * f;
                match (u32::try_from(x), u32::try_from(y)) {
                    (Ok(x), Ok(y)) => Rect { x, y, ..*start },
                    _ => {
                        return Err(script_err(format!(
                            "object {} leaves the canvas at frame {frame}",
                            track.id
                        )))
                    }
                }
            }
        };
        if !rect.fits(self.canvas) {
            return Err(script_err(format!(
                "object {} rectangle {rect:?} is outside the {}x{} canvas at frame {frame}",
                track.id, self.canvas.width, self.canvas.height
            )));
        }
        Ok(rect)
    }

    pub fn validate(&self) -> Result<()> {
        if self.video_length == 0 {
            return Err(script_err("video_length must be at least 1"));
        }
        if self.canvas.width == 0 || self.canvas.height == 0 {
            return Err(script_err("canvas must be nonempty"));
        }
        let mut ids = BTreeSet::new();
        for track in &self.objects {
            if track.id == 0 {
                return Err(script_err("object id 0 is reserved for background"));
            }
            if !ids.insert(track.id) {
                return Err(script_err(format!("object id {} is repeated", track.id)));
            }
            if let Trajectory::Frames(rects) = &track.trajectory {
                if rects.len() != self.video_length as usize {
                    return Err(script_err(format!(
                        "object {} has {} rectangles for {} frames",
                        track.id,
                        rects.len(),
                        self.video_length
                    )));
                }
            }
        }
        for inj in &self.injections {
            if !ids.contains(&inj.object) {
                return Err(script_err(format!(
                    "injection targets unknown object {}",
                    inj.object
                )));
            }
            let [start, end] = inj.frames;
            if start >= end || end > self.video_length {
                return Err(script_err(format!(
                    "injection frame range [{start}, {end}) is empty or beyond {} frames",
                    self.video_length
                )));
            }
            if let InjectionKind::Fragmentation { pieces, block } = inj.kind {
                if pieces == 0 || block == 0 {
                    return Err(script_err("fragmentation needs pieces >= 1 and block >= 1"));
                }
            }
        }
        for (i, x) in self.injections.iter().enumerate() {
            for y in &self.injections[i + 1..] {
                let same_kind =
                    std::mem::discriminant(&x.kind) == std::mem::discriminant(&y.kind);
                let overlap = x.frames[0] < y.frames[1] && y.frames[0] < x.frames[1];
                if same_kind && x.target == y.target && x.object == y.object && overlap {
                    return Err(script_err(format!(
                        "overlapping {:?} injections on object {} of stream {:?}",
                        x.kind, x.object, x.target
                    )));
                }
            }
        }
        Ok(())
    }

    fn shape(&self, stream: Option<Source>, track: &ObjectTrack, frame: u32) -> Result<Shape> {
        let mut rect = self.rect_at(track, frame)?;
        let Some(target) = stream else {
            return Ok(Shape::Solid(rect));
        };
        let active: Vec<InjectionKind> = self
            .injections
            .iter()
            .filter(|i| i.target == target && i.object == track.id && i.covers(frame))
            .map(|i| i.kind)
            .collect();

        let offset = active.iter().find_map(|k| match k {
            InjectionKind::Displacement { offset } => Some(*offset),
            _ => None,
        });
        if let Some(offset) = offset {
            rect = displace(rect, offset, self.canvas).ok_or_else(|| {
                script_err(format!(
                    "displacement of object {} at frame {frame} leaves the canvas",
                    track.id
                ))
            })?;
        }
        if active.contains(&InjectionKind::Dropout) {
            return Ok(Shape::Absent);
        }
        let split = active.iter().find_map(|k| match k {
            InjectionKind::Fragmentation { pieces, block } => Some((*pieces, *block)),
            _ => None,
        });
        if let Some((pieces, block)) = split {
            let seed = mix_seed(self.seed, target, track.id, frame);
            return fragment(rect, pieces, block, seed)
                .map(Shape::Blocks)
                .ok_or_else(|| {
                    script_err(format!(
                        "object {} at frame {frame} is too small for {pieces} blocks of {block}px",
                        track.id
                    ))
                });
        }
        Ok(Shape::Solid(rect))
    }

    fn render(&self, stream: Option<Source>) -> Result<VideoPrediction> {
        let Canvas { width, height } = self.canvas;
        let mut tracks: Vec<&ObjectTrack> = self.objects.iter().collect();
        tracks.sort_by_key(|t| t.id);
        let mut maps = Vec::with_capacity(self.video_length as usize);
        for frame in 0..self.video_length {
            let mut labels = vec![0u8; width as usize * height as usize];
            for track in &tracks {
                let rects = match self.shape(stream, track, frame)? {
                    Shape::Absent => vec![],
                    Shape::Solid(r) => vec![r],
                    Shape::Blocks(rs) => rs,
                };
                for r in rects {
                    for y in r.y..r.y + r.h {
                        let row = y as usize * width as usize;
                        labels[row + r.x as usize..row + (r.x + r.w) as usize].fill(track.id);
                    }
                }
            }
            maps.push(LabelMap::new(width, height, labels)?);
        }
        VideoPrediction::from_maps(self.video_id.clone(), maps)
    }

    pub fn generate(&self) -> Result<SynthVideo> {
        self.validate()?;
        Ok(SynthVideo {
            gt: self.render(None)?,
            a: self.render(Some(Source::A))?,
            b: self.render(Some(Source::B))?,
        })
    }
}

/// Explicit offset, or the first full-size shift (right, left, down, up)
/// that stays on the canvas. A full-size shift leaves zero overlap.
fn displace(rect: Rect, offset: Option<[i32; 2]>, canvas: Canvas) -> Option<Rect> {
    match offset {
        Some([dx, dy]) => rect.translated(dx as i64, dy as i64, canvas),
        None => {
            let (w, h) = (rect.w as i64, rect.h as i64);
            [(w, 0), (-w, 0), (0, h), (0, -h)]
                .into_iter()
                .find_map(|(dx, dy)| rect.translated(dx, dy, canvas))
        }
    }
}

/// `pieces` square blocks of side `block` on a grid of pitch `block + 1`
/// inside `rect`. Blocks never touch, even diagonally.
fn fragment(rect: Rect, pieces: u32, block: u32, seed: u64) -> Option<Vec<Rect>> {
    let pitch = block + 1;
    let cols = (rect.w + 1) / pitch;
    let rows = (rect.h + 1) / pitch;
    let cells = (cols * rows) as usize;
    if cells < pieces as usize {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, cells, pieces as usize).into_vec();
    chosen.sort_unstable();
    Some(
        chosen
            .into_iter()
            .map(|c| Rect {
                x: rect.x + (c as u32 % cols) * pitch,
                y: rect.y + (c as u32 / cols) * pitch,
                w: block,
                h: block,
            })
            .collect(),
    )
}

fn mix_seed(seed: u64, target: Source, object: ObjectId, frame: u32) -> u64 {
    let key = ((target as u64) << 40) | ((object as u64) << 32) | frame as u64;
    // splitmix64 finaliser
    let mut z = seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DatasetScript {
    videos: Vec<FailureScript>,
}

/// Parses either a single script or `{"videos": [...]}`. Syntax and schema
/// errors keep serde's line and column.
pub fn parse_scripts(text: &str, path: &Path) -> Result<Vec<FailureScript>> {
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let scripts = if value.get("videos").is_some() {
        serde_json::from_str::<DatasetScript>(text)
            .map_err(json_err)?
            .videos
    } else {
        vec![serde_json::from_str::<FailureScript>(text).map_err(json_err)?]
    };
    let mut seen = BTreeSet::new();
    for s in &scripts {
        if !seen.insert(s.video_id.as_str()) {
            return Err(script_err(format!("video id {} is repeated", s.video_id)));
        }
    }
    Ok(scripts)
}
