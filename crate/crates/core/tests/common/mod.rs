//! Brute-force oracles and fixture helpers shared by the integration tests.
//! Nothing here calls into the library's algorithms; only its types.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voscascade::synth::{Canvas, FailureScript, Injection, InjectionKind, ObjectTrack, Rect, Trajectory};
use voscascade::{BinaryMask, Source};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mask up to `max_side` on each side with a random fill density.
pub fn random_mask(rng: &mut ChaCha8Rng, w: u32, h: u32) -> BinaryMask {
    let density: f64 = rng.gen_range(0.0..1.0);
    let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    BinaryMask::new(w, h, bits).unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng, max_side: u32) -> (u32, u32) {
    (rng.gen_range(1..=max_side), rng.gen_range(1..=max_side))
}

/// `|a ∩ b| / |a ∪ b|` by enumerating pixel coordinates.
pub fn brute_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let mut inter = 0u64;
    let mut union = 0u64;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.get(x, y), b.get(x, y));
            if p && q {
                inter += 1;
            }
            if p || q {
                union += 1;
            }
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn neighbours(x: i64, y: i64, eight: bool) -> Vec<(i64, i64)> {
    let mut n = vec![(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)];
    if eight {
        n.extend([(x - 1, y - 1), (x + 1, y - 1), (x - 1, y + 1), (x + 1, y + 1)]);
    }
    n
}

/// Stack-based flood fill from `seed`, marking `visited`.
fn flood(grid: &[Vec<bool>], visited: &mut [Vec<bool>], seed: (usize, usize), eight: bool) {
    let h = grid.len() as i64;
    let w = grid[0].len() as i64;
    let want = grid[seed.1][seed.0];
    let mut stack = vec![seed];
    visited[seed.1][seed.0] = true;
    while let Some((x, y)) = stack.pop() {
        for (nx, ny) in neighbours(x as i64, y as i64, eight) {
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let (ux, uy) = (nx as usize, ny as usize);
            if !visited[uy][ux] && grid[uy][ux] == want {
                visited[uy][ux] = true;
                stack.push((ux, uy));
            }
        }
    }
}

fn to_grid(m: &BinaryMask) -> Vec<Vec<bool>> {
    (0..m.height())
        .map(|y| (0..m.width()).map(|x| m.get(x, y)).collect())
        .collect()
}

/// Number of 8-connected foreground components.
pub fn oracle_external(m: &BinaryMask) -> u32 {
    let grid = to_grid(m);
    let mut visited = vec![vec![false; grid[0].len()]; grid.len()];
    let mut count = 0;
    for y in 0..grid.len() {
        for x in 0..grid[0].len() {
            if grid[y][x] && !visited[y][x] {
                flood(&grid, &mut visited, (x, y), true);
                count += 1;
            }
        }
    }
    count
}

/// Background flooded (4-connectivity) from every border pixel; the 4-connected
/// background components left over are holes.
pub fn oracle_holes(m: &BinaryMask) -> u32 {
    let grid = to_grid(m);
    let (h, w) = (grid.len(), grid[0].len());
    let mut visited = vec![vec![false; w]; h];
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            if border && !grid[y][x] && !visited[y][x] {
                flood(&grid, &mut visited, (x, y), false);
            }
        }
    }
    let mut holes = 0;
    for y in 0..h {
        for x in 0..w {
            if !grid[y][x] && !visited[y][x] {
                flood(&grid, &mut visited, (x, y), false);
                holes += 1;
            }
        }
    }
    holes
}

pub fn oracle_boundary_points(m: &BinaryMask) -> Vec<(i64, i64)> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && m.get(x as u32, y as u32);
    let mut pts = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if inside(x, y)
                && neighbours(x, y, false).into_iter().any(|(nx, ny)| !inside(nx, ny))
            {
                pts.push((x, y));
            }
        }
    }
    pts
}

/// `(matched, total)` over all pairs by squared Euclidean distance.
pub fn brute_matches(from: &[(i64, i64)], to: &[(i64, i64)], tol: u32) -> (u64, u64) {
    let t2 = (tol as i64) * (tol as i64);
    let matched = from
        .iter()
        .filter(|&&(x, y)| to.iter().any(|&(u, v)| (x - u).pow(2) + (y - v).pow(2) <= t2))
        .count() as u64;
    (matched, from.len() as u64)
}

pub fn brute_boundary_f(pred: &BinaryMask, gt: &BinaryMask, tol: u32) -> f64 {
    let pb = oracle_boundary_points(pred);
    let gb = oracle_boundary_points(gt);
    if pb.is_empty() && gb.is_empty() {
        return 1.0;
    }
    if pb.is_empty() || gb.is_empty() {
        return 0.0;
    }
    let (pm, pt) = brute_matches(&pb, &gb, tol);
    let (gm, gt_total) = brute_matches(&gb, &pb, tol);
    let p = pm as f64 / pt as f64;
    let r = gm as f64 / gt_total as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Masks from ASCII art, `#` = foreground.
pub fn grid(rows: &[&str]) -> BinaryMask {
    let h = rows.len() as u32;
    let w = rows[0].len() as u32;
    BinaryMask::new(w, h, rows.iter().flat_map(|r| r.bytes().map(|c| c == b'#')).collect())
        .unwrap()
}

// Fixture scripts -----------------------------------------------------------

pub fn rect(x: u32, y: u32, w: u32, h: u32) -> Rect {
    Rect { x, y, w, h }
}

/// 64x48 canvas, 30 frames, object 1 drifting right and object 2 static.
pub fn two_object_script(video_id: &str, injections: Vec<Injection>) -> FailureScript {
    FailureScript {
        video_id: video_id.into(),
        video_length: 30,
        canvas: Canvas {
            width: 64,
            height: 48,
        },
        objects: vec![
            ObjectTrack {
                id: 1,
                trajectory: Trajectory::Linear {
                    start: rect(2, 4, 14, 12),
                    velocity: [1, 0],
                },
            },
            ObjectTrack {
                id: 2,
                trajectory: Trajectory::Linear {
                    start: rect(10, 28, 16, 14),
                    velocity: [0, 0],
                },
            },
        ],
        injections,
        seed: 17,
    }
}

pub fn injection(target: Source, object: u8, frames: [u32; 2], kind: InjectionKind) -> Injection {
    Injection {
        target,
        object,
        frames,
        kind,
    }
}

pub fn dropout(target: Source, object: u8, frames: [u32; 2]) -> Injection {
    injection(target, object, frames, InjectionKind::Dropout)
}

pub fn displacement(target: Source, object: u8, frames: [u32; 2]) -> Injection {
    injection(target, object, frames, InjectionKind::Displacement { offset: None })
}

pub fn fragmentation(target: Source, object: u8, frames: [u32; 2], pieces: u32) -> Injection {
    injection(
        target,
        object,
        frames,
        InjectionKind::Fragmentation { pieces, block: 2 },
    )
}

// Dataset roots ---------------------------------------------------------------

/// Writes `<root>/JPEGImages/<vid>/*.jpg` placeholders and matching masks in
/// `<root>/Annotations/<vid>/`, with objects `1..=objects` each covering one
/// column band of a 16x8 frame.
pub fn write_dataset_video(root: &std::path::Path, vid: &str, frames: u32, objects: u8) {
    use voscascade::{LabelMap, SequenceLayout, VideoPrediction};
    let jpg = root.join("JPEGImages").join(vid);
    std::fs::create_dir_all(&jpg).unwrap();
    for f in 0..frames {
        std::fs::write(jpg.join(format!("{f:05}.jpg")), b"").unwrap();
    }
    let map = LabelMap::new(16, 8, (0..128u32).map(|i| ((i % 16) / 3).min(objects as u32) as u8).collect())
        .unwrap();
    let video = VideoPrediction::from_maps(vid, vec![map; frames as usize]).unwrap();
    voscascade::write_sequence(&video, &SequenceLayout::new(root.join("Annotations"), vid)).unwrap();
}

// CLI -----------------------------------------------------------------------

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&std::ffi::OsStr]) -> Outcome {
    cli_with_env(args, &[])
}

pub fn cli_with_env(args: &[&std::ffi::OsStr], env: &[(&str, &str)]) -> Outcome {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_voscascade"));
    cmd.args(args).env_remove("VOSCASCADE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// `cli(&args!["fuse", "--out", &path])` without the `OsStr` noise.
#[macro_export]
macro_rules! args {
    ($($a:expr),* $(,)?) => { [$(std::ffi::OsStr::new($a)),*] };
}

pub fn write_scripts(path: &std::path::Path, scripts: &[FailureScript]) {
    let doc = serde_json::json!({ "videos": scripts });
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
}

/// Every file under `root` with its bytes, keyed by relative path.
pub fn tree(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}
