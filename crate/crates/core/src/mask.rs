//! Label maps, single-object binary masks and video prediction streams.
//!
//! Everything here is immutable once constructed. Object identifiers are
//! stored as `u8`, which is the pixel format of the indexed mask files the
//! benchmarks distribute; 0 is background.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub type ObjectId = u8;

/// One frame's multi-object segmentation, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<ObjectId>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, labels: Vec<ObjectId>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyDimensions);
        }
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(Error::LabelLength {
                expected,
                found: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Builds a map from wide identifiers, rejecting anything above 255.
    pub fn from_ids(width: u32, height: u32, ids: &[u32]) -> Result<Self> {
        let labels = ids
            .iter()
            .map(|&id| ObjectId::try_from(id).map_err(|_| Error::IdOutOfRange(id)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, labels)
    }

    pub fn zeros(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, vec![0; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[ObjectId] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<ObjectId> {
        self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> ObjectId {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Nonzero identifiers present, ascending.
    pub fn object_ids(&self) -> BTreeSet<ObjectId> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=255u8).filter(|&id| seen[id as usize]).collect()
    }

    pub fn binary_mask(&self, id: ObjectId) -> Result<BinaryMask> {
        if id == 0 {
            return Err(Error::BackgroundId);
        }
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == id).collect(),
        })
    }
}

/// Foreground membership of a single object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyDimensions);
        }
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(Error::LabelLength {
                expected,
                found: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::new(width, height, vec![false; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Result<Self> {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// A mask is valid when it has at least `min_pixels` foreground pixels.
    pub fn is_valid(&self, min_pixels: u64) -> bool {
        self.area() >= min_pixels
    }
}

/// Exact `(intersection, union)` pixel counts.
pub fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> Result<(u64, u64)> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: a.dimensions(),
            found: b.dimensions(),
        });
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += (p && q) as u64;
        union += (p || q) as u64;
    }
    Ok((inter, union))
}

/// Intersection over union. Two empty masks agree perfectly (1.0).
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, union) = overlap_counts(a, b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub index: u32,
    pub labels: LabelMap,
}

/// The ordered per-frame output of one model on one video.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VideoPrediction {
    video_id: String,
    frames: Vec<Frame>,
}

impl VideoPrediction {
    pub fn new(video_id: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            let dims = first.labels.dimensions();
            for pair in frames.windows(2) {
                if pair[1].index <= pair[0].index {
                    return Err(Error::FrameOrder {
                        previous: pair[0].index,
                        next: pair[1].index,
                    });
                }
                if pair[1].labels.dimensions() != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims,
                        found: pair[1].labels.dimensions(),
                    });
                }
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            frames,
        })
    }

    /// Frames numbered 0, 1, 2, ... in order.
    pub fn from_maps(video_id: impl Into<String>, maps: Vec<LabelMap>) -> Result<Self> {
        let frames = maps
            .into_iter()
            .enumerate()
            .map(|(i, labels)| Frame {
                index: i as u32,
                labels,
            })
            .collect();
        Self::new(video_id, frames)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `None` for a video without frames.
    pub fn dimensions(&self) -> Option<(u32, u32)> {
        self.frames.first().map(|f| f.labels.dimensions())
    }

    pub fn frame(&self, index: u32) -> Option<&LabelMap> {
        self.frames
            .binary_search_by_key(&index, |f| f.index)
            .ok()
            .map(|i| &self.frames[i].labels)
    }

    pub fn frame_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.frames.iter().map(|f| f.index)
    }

    /// Union of nonzero identifiers over all frames, ascending.
    pub fn object_ids(&self) -> BTreeSet<ObjectId> {
        let mut seen = [false; 256];
        for frame in &self.frames {
            for &l in frame.labels.labels() {
                seen[l as usize] = true;
            }
        }
        (1..=255u8).filter(|&id| seen[id as usize]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: u32, h: u32, ids: &[u8]) -> LabelMap {
        LabelMap::new(w, h, ids.to_vec()).unwrap()
    }

    #[test]
    fn object_ids_of_empty_video() {
        let v = VideoPrediction::from_maps("v", vec![LabelMap::zeros(4, 4).unwrap(); 3]).unwrap();
        assert!(v.object_ids().is_empty());
    }

    #[test]
    fn object_ids_single_and_union() {
        let v = VideoPrediction::from_maps("v", vec![map(2, 2, &[1, 0, 3, 3])]).unwrap();
        assert_eq!(v.object_ids().into_iter().collect::<Vec<_>>(), vec![1, 3]);
        let v = VideoPrediction::from_maps("v", vec![map(2, 1, &[1, 0]), map(2, 1, &[0, 2])])
            .unwrap();
        assert_eq!(v.object_ids().into_iter().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn binary_mask_selection() {
        let m = map(2, 2, &[1, 1, 2, 0]);
        assert_eq!(m.binary_mask(1).unwrap().bits(), &[true, true, false, false]);
        assert_eq!(m.binary_mask(2).unwrap().bits(), &[false, false, true, false]);
        let z = LabelMap::zeros(3, 3).unwrap();
        assert!(z.binary_mask(1).unwrap().is_empty());
        assert!(matches!(m.binary_mask(0), Err(Error::BackgroundId)));
    }

    #[test]
    fn validity_threshold() {
        let empty = BinaryMask::empty(4, 4).unwrap();
        assert!(!empty.is_valid(1));
        let one = BinaryMask::from_fn(4, 4, |x, y| x == 2 && y == 1).unwrap();
        assert!(one.is_valid(1));
        let three = BinaryMask::from_fn(4, 4, |x, y| y == 0 && x < 3).unwrap();
        assert_eq!(three.area(), 3);
        assert!(!three.is_valid(5));
    }

    #[test]
    fn iou_examples() {
        let a = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2).unwrap();
        let b = BinaryMask::from_fn(4, 4, |x, y| x >= 2 && y >= 2).unwrap();
        let half = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y == 0).unwrap();
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&a, &half).unwrap(), 0.5);
        let e = BinaryMask::empty(4, 4).unwrap();
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn iou_dimension_mismatch() {
        let a = BinaryMask::empty(4, 4).unwrap();
        let b = BinaryMask::empty(4, 5).unwrap();
        assert!(matches!(iou(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn label_map_rejects_wide_ids_and_bad_lengths() {
        assert!(matches!(
            LabelMap::from_ids(2, 1, &[1, 300]),
            Err(Error::IdOutOfRange(300))
        ));
        assert!(matches!(
            LabelMap::new(2, 2, vec![0; 3]),
            Err(Error::LabelLength { .. })
        ));
        assert!(matches!(LabelMap::zeros(0, 2), Err(Error::EmptyDimensions)));
    }

    #[test]
    fn video_rejects_unordered_or_mixed_frames() {
        let f = |index, w| Frame {
            index,
            labels: LabelMap::zeros(w, 2).unwrap(),
        };
        assert!(matches!(
            VideoPrediction::new("v", vec![f(3, 2), f(3, 2)]),
            Err(Error::FrameOrder { .. })
        ));
        assert!(matches!(
            VideoPrediction::new("v", vec![f(0, 2), f(1, 3)]),
            Err(Error::DimensionMismatch { .. })
        ));
        let v = VideoPrediction::new("v", vec![f(0, 2), f(5, 2)]).unwrap();
        assert!(v.frame(5).is_some());
        assert!(v.frame(4).is_none());
    }
}
