//! Contour counting for single-object masks.
//!
//! A mask's contours are the outer borders of its 8-connected foreground
//! components plus the borders of the holes they enclose, where a hole is a
//! 4-connected background component that does not touch the image border.
//! This is the same hierarchy a border-following contour tracer reports, but
//! only the counts are needed, so components are labelled directly with a
//! two-pass union-find scan.

use serde::{Deserialize, Serialize};

use crate::mask::{BinaryMask, ObjectId};

/// Which closed curves count as contours.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourMode {
    /// Outer borders and hole borders.
    #[default]
    WithHoles,
    /// Outer borders only; hole counts are reported as zero.
    ExternalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContourStats {
    pub object_id: ObjectId,
    pub frame_index: u32,
    pub external_contours: u32,
    pub hole_contours: u32,
    pub total_contours: u32,
}

impl ContourStats {
    pub fn tagged(mut self, frame_index: u32, object_id: ObjectId) -> Self {
        self.frame_index = frame_index;
        self.object_id = object_id;
        self
    }
}

/// Counts outer and hole contours. The returned stats carry frame 0 and
/// object 0; use [`ContourStats::tagged`] to attach the real coordinates.
pub fn count_contours(mask: &BinaryMask) -> ContourStats {
    count_contours_with(mask, ContourMode::WithHoles)
}

pub fn count_contours_with(mask: &BinaryMask, mode: ContourMode) -> ContourStats {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.bits();
    let external = label_components(w, h, |i| bits[i], true).count;
    // No foreground means no enclosed background either.
    let holes = if external == 0 || mode == ContourMode::ExternalOnly {
        0
    } else {
        label_components(w, h, |i| !bits[i], false).enclosed
    };
    ContourStats {
        object_id: 0,
        frame_index: 0,
        external_contours: external,
        hole_contours: holes,
        total_contours: external + holes,
    }
}

/// True when the mask has strictly more than `threshold` contours.
pub fn is_high_noise(mask: &BinaryMask, threshold: u32) -> bool {
    is_high_noise_with(mask, threshold, ContourMode::WithHoles)
}

pub fn is_high_noise_with(mask: &BinaryMask, threshold: u32, mode: ContourMode) -> bool {
    count_contours_with(mask, mode).total_contours > threshold
}

struct Components {
    count: u32,
    /// Components that do not touch the image border.
    enclosed: u32,
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn with_capacity(n: usize) -> Self {
        Self {
            parent: Vec::with_capacity(n),
        }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

fn label_components(
    w: usize,
    h: usize,
    member: impl Fn(usize) -> bool,
    eight: bool,
) -> Components {
    const NONE: u32 = u32::MAX;
    let mut labels = vec![NONE; w * h];
    let mut sets = DisjointSet::with_capacity(64);

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !member(i) {
                continue;
            }
            let mut current = NONE;
            let mut visit = |j: usize, sets: &mut DisjointSet| {
                let l = labels[j];
                if l == NONE {
                    return;
                }
                if current == NONE {
                    current = l;
                } else {
                    sets.union(current, l);
                }
            };
            if x > 0 {
                visit(i - 1, &mut sets);
            }
            if y > 0 {
                visit(i - w, &mut sets);
                if eight {
                    if x > 0 {
                        visit(i - w - 1, &mut sets);
                    }
                    if x + 1 < w {
                        visit(i - w + 1, &mut sets);
                    }
                }
            }
            labels[i] = if current == NONE { sets.make() } else { current };
        }
    }

    let n = sets.parent.len();
    let mut is_root = vec![false; n];
    let mut on_border = vec![false; n];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == NONE {
                continue;
            }
            let r = sets.find(l) as usize;
            is_root[r] = true;
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                on_border[r] = true;
            }
        }
    }
    let count = is_root.iter().filter(|&&r| r).count() as u32;
    let enclosed = (0..n).filter(|&r| is_root[r] && !on_border[r]).count() as u32;
    Components { count, enclosed }
}
