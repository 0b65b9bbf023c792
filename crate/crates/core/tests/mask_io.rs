mod common;

use std::fs;

use proptest::prelude::*;
use voscascade::cascade::{fuse, CascadeParams};
use voscascade::io::{read_report, write_label_map};
use voscascade::{read_sequence, write_report, write_sequence, Error, Frame, LabelMap, SequenceLayout, VideoPrediction};

fn video_strategy() -> impl Strategy<Value = VideoPrediction> {
    (1u32..20, 1u32..20, 1usize..5).prop_flat_map(|(w, h, n)| {
        (
            proptest::collection::vec(proptest::collection::vec(any::<u8>(), (w * h) as usize), n),
            proptest::collection::btree_set(0u32..1000, n),
        )
            .prop_map(move |(maps, indices)| {
                let frames = indices
                    .into_iter()
                    .zip(maps)
                    .map(|(index, labels)| Frame {
                        index,
                        labels: LabelMap::new(w, h, labels).unwrap(),
                    })
                    .collect();
                VideoPrediction::new("vid", frames).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn sequences_round_trip(v in video_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let layout = SequenceLayout::new(dir.path(), "vid");
        write_sequence(&v, &layout).unwrap();
        prop_assert_eq!(read_sequence(&layout).unwrap(), v);
    }
}

fn zeros_video(n: u32, w: u32, h: u32) -> VideoPrediction {
    VideoPrediction::from_maps("seq", vec![LabelMap::zeros(w, h).unwrap(); n as usize]).unwrap()
}

#[test]
fn reads_five_consecutive_frames() {
    let dir = tempfile::tempdir().unwrap();
    let layout = SequenceLayout::new(dir.path(), "seq");
    write_sequence(&zeros_video(5, 64, 64), &layout).unwrap();
    let names: Vec<_> = fs::read_dir(layout.dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.contains(&"00000.png".to_string()) && names.contains(&"00004.png".to_string()));
    let v = read_sequence(&layout).unwrap();
    assert_eq!(v.frame_indices().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    assert!(v.frames().iter().all(|f| f.labels.labels().iter().all(|&l| l == 0)));
}

#[test]
fn mismatched_frame_size_names_second_file() {
    let dir = tempfile::tempdir().unwrap();
    let layout = SequenceLayout::new(dir.path(), "seq");
    fs::create_dir_all(layout.dir()).unwrap();
    write_label_map(&LabelMap::zeros(64, 64).unwrap(), &layout.frame_path(0)).unwrap();
    write_label_map(&LabelMap::zeros(32, 32).unwrap(), &layout.frame_path(1)).unwrap();
    match read_sequence(&layout) {
        Err(Error::FrameDimensions { path, .. }) => assert!(path.ends_with("00001.png")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_directory_has_no_frames() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("seq")).unwrap();
    let err = read_sequence(&SequenceLayout::new(dir.path(), "seq")).unwrap_err();
    assert!(matches!(err, Error::NoFrames(_)));
    assert!(err.to_string().contains("no frames found"));
}

#[test]
fn frame_order_comes_from_stems() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    fs::create_dir_all(&seq).unwrap();
    for (name, id) in [("10.png", 3u8), ("9.png", 2), ("00100.png", 4)] {
        write_label_map(&LabelMap::new(1, 1, vec![id]).unwrap(), &seq.join(name)).unwrap();
    }
    let v = read_sequence(&SequenceLayout::new(dir.path(), "seq")).unwrap();
    assert_eq!(v.frame_indices().collect::<Vec<_>>(), vec![9, 10, 100]);
    assert_eq!(v.frame(10).unwrap().labels(), &[3]);
}

#[test]
fn duplicate_and_unparseable_stems_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    fs::create_dir_all(&seq).unwrap();
    let m = LabelMap::zeros(2, 2).unwrap();
    write_label_map(&m, &seq.join("00001.png")).unwrap();
    write_label_map(&m, &seq.join("1.png")).unwrap();
    assert!(matches!(
        read_sequence(&SequenceLayout::new(dir.path(), "seq")),
        Err(Error::DuplicateFrame { index: 1, .. })
    ));
    fs::remove_file(seq.join("1.png")).unwrap();
    write_label_map(&m, &seq.join("cover.png")).unwrap();
    assert!(matches!(
        read_sequence(&SequenceLayout::new(dir.path(), "seq")),
        Err(Error::BadFrameName { .. })
    ));
}

#[test]
fn corrupt_file_is_a_decode_error() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    fs::create_dir_all(&seq).unwrap();
    fs::write(seq.join("00000.png"), b"not a png").unwrap();
    match read_sequence(&SequenceLayout::new(dir.path(), "seq")) {
        Err(Error::Decode { path, .. }) => assert!(path.ends_with("00000.png")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn identifiers_above_255_are_rejected() {
    assert!(matches!(
        LabelMap::from_ids(2, 2, &[0, 1, 300, 0]),
        Err(Error::IdOutOfRange(300))
    ));
}

#[test]
fn unwritable_destination_errors() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let err = write_sequence(&zeros_video(1, 2, 2), &SequenceLayout::new(&blocker, "seq")).unwrap_err();
    assert!(matches!(err, Error::Write { .. }));
}

fn sample_report(b_source: bool) -> voscascade::FusionReport {
    let a = zeros_video(12, 6, 6);
    let blob = {
        let mut l = vec![0u8; 36];
        l[..4].fill(1);
        LabelMap::new(6, 6, l).unwrap()
    };
    let b = if b_source {
        VideoPrediction::from_maps("seq", vec![blob; 12]).unwrap()
    } else {
        a.clone()
    };
    fuse(&a, &b, &CascadeParams::default()).unwrap().1
}

#[test]
fn report_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let report = sample_report(true);
    let (p1, p2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));
    write_report(&report, &p1).unwrap();
    write_report(&report, &p2).unwrap();
    let bytes = fs::read(&p1).unwrap();
    assert_eq!(bytes, fs::read(&p2).unwrap());

    let doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["video_id"], "seq");
    assert_eq!(doc["decision"]["source"], "B");
    assert_eq!(doc["decision"]["reason"], "miss_tracking");
    assert_eq!(doc["decision"]["miss_count_a"], 12);
    for key in [
        "iou_threshold",
        "miss_frame_threshold",
        "wrong_frame_threshold",
        "contour_noise_threshold",
        "min_pixels",
        "granularity",
    ] {
        assert!(doc["parameters"].get(key).is_some(), "missing {key}");
    }
    let first = &doc["records"][0];
    assert_eq!(first["frame"], 0);
    assert_eq!(first["object"], 1);
    assert_eq!(first["kind"], "miss_a");
    assert_eq!(first["iou"], 0.0);
    assert_eq!(read_report(&p1).unwrap(), report);
}

#[test]
fn report_without_records() {
    let dir = tempfile::tempdir().unwrap();
    let report = sample_report(false);
    assert!(report.records.is_empty());
    let path = dir.path().join("r.json");
    write_report(&report, &path).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(doc["records"], serde_json::json!([]));
    assert_eq!(doc["decision"]["source"], "A");
    assert_eq!(doc["decision"]["reason"], "default");
}
