mod common;

use std::collections::HashSet;
use std::fs;

use common::*;
use grasp_core::dataset::*;
use grasp_core::geometry::corners_to_rect;
use grasp_core::Error;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn loads_fixture_sample() {
    let dir = tempfile::tempdir().unwrap();
    let labels = [rect(30.0, 20.0, 0.3, 16.0, 6.0), rect(34.0, 22.0, -1.2, 10.0, 5.0)];
    write_sample(
        dir.path(),
        &FixtureSample {
            id: "pcd0100",
            width: 64,
            height: 48,
            labels: &labels,
            nan_quads: 1,
            with_cloud: true,
        },
    );
    assert_eq!(scan_dataset(dir.path()).unwrap(), vec!["pcd0100"]);
    let s = load_sample(dir.path(), "pcd0100").unwrap();
    assert_eq!((s.width(), s.height()), (64, 48));
    assert_eq!(s.pos_rects.len(), 2);
    assert_eq!(s.stats.nonfinite_rects, 1);
    for (got, want) in s.pos_rects.iter().zip(&labels) {
        assert!(rect_close(got, want, 1e-5), "{got:?} vs {want:?}");
    }
    assert!(!s.depth_missing);
    // pixel 5 holds z = 0.5 + 5/64; pixel 3 was left out of the cloud
    assert!((s.depth.values[5] - (0.5 + 5.0 / 64.0)).abs() < 1e-6);
    assert!(s.depth.missing[3] && !s.depth.missing[5]);
    assert_eq!(s.depth.missing_count(), 64 * 48 / 4);
}

#[test]
fn parsed_rects_match_public_conversion() {
    let dir = tempfile::tempdir().unwrap();
    let labels = [rect(30.0, 20.0, 0.3, 16.0, 6.0)];
    write_sample(
        dir.path(),
        &FixtureSample { id: "a", width: 64, height: 48, labels: &labels, nan_quads: 0, with_cloud: false },
    );
    let path = dir.path().join("acpos.txt");
    let text = fs::read_to_string(&path).unwrap();
    let quads = parse_label_text(&text, &path).unwrap();
    let (rects, _) = read_label_file(&path).unwrap();
    assert_eq!(corners_to_rect(&quads[0]).unwrap(), rects[0]);
}

#[test]
fn missing_cloud_gives_zero_depth() {
    let dir = tempfile::tempdir().unwrap();
    let labels = [rect(30.0, 20.0, 0.0, 10.0, 5.0)];
    write_sample(
        dir.path(),
        &FixtureSample { id: "b", width: 40, height: 30, labels: &labels, nan_quads: 0, with_cloud: false },
    );
    let s = load_sample(dir.path(), "b").unwrap();
    assert!(s.depth_missing);
    assert!(s.depth.values.iter().all(|&v| v == 0.0));
}

#[test]
fn errors_name_their_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(scan_dataset(dir.path()), Err(Error::EmptyDataset { .. })));
    assert!(matches!(load_sample(dir.path(), "nope"), Err(Error::UnknownSample(_))));

    let labels = [rect(30.0, 20.0, 0.0, 10.0, 5.0)];
    write_sample(
        dir.path(),
        &FixtureSample { id: "c", width: 40, height: 30, labels: &labels, nan_quads: 0, with_cloud: false },
    );
    let pos = dir.path().join("ccpos.txt");
    fs::write(&pos, "1 1\n2 2\nthree 3\n").unwrap();
    match load_sample(dir.path(), "c") {
        Err(e @ Error::MalformedLabelFile { .. }) => assert!(e.to_string().contains("ccpos.txt"), "{e}"),
        other => panic!("{other:?}"),
    }
    // bow-tie quad
    fs::write(&pos, "0 0\n10 0\n0 10\n10 10\n").unwrap();
    assert!(matches!(load_sample(dir.path(), "c"), Err(Error::MalformedLabelFile { .. })));

    fs::write(&pos, "").unwrap();
    fs::write(dir.path().join("c.txt"), "FIELDS x y z\nDATA binary\n").unwrap();
    match load_sample(dir.path(), "c") {
        Err(e @ Error::MalformedPointCloud { .. }) => assert!(e.to_string().contains("c.txt"), "{e}"),
        other => panic!("{other:?}"),
    }
    fs::write(dir.path().join("cr.png"), b"not a png").unwrap();
    assert!(matches!(load_sample(dir.path(), "c"), Err(Error::ImageDecode { .. })));
}

#[test]
fn manifest_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = (0..30).map(|i| format!("s{i}")).collect();
    let s = split(&ids, 0.9, 4).unwrap();
    let path = dir.path().join("split.txt");
    s.write(&path).unwrap();
    assert_eq!(DatasetSplit::read(&path).unwrap(), s);
}

#[test]
fn pick_is_uniform() {
    let labels = [0usize, 1, 2, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        counts[*pick_from(&labels, &mut rng).unwrap()] += 1;
    }
    for c in counts {
        let f = c as f64 / 10_000.0;
        assert!((0.22..=0.28).contains(&f), "{counts:?}");
    }
    let mut a = ChaCha8Rng::seed_from_u64(3);
    let mut b = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        assert_eq!(pick_from(&labels, &mut a).unwrap(), pick_from(&labels, &mut b).unwrap());
    }
    assert_eq!(*pick_from(&[7], &mut a).unwrap(), 7);
    assert!(pick_from::<usize, _>(&[], &mut a).is_err());
}

proptest! {
    #[test]
    fn split_partitions(n in 2usize..300, ratio in 0.05..0.95f64, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i:04}")).collect();
        let s = split(&ids, ratio, seed).unwrap();
        let train: HashSet<_> = s.train_ids.iter().collect();
        let val: HashSet<_> = s.val_ids.iter().collect();
        prop_assert!(train.is_disjoint(&val));
        prop_assert_eq!(train.len() + val.len(), n);
        prop_assert_eq!(s.train_ids.len(), s.train_ids.iter().collect::<HashSet<_>>().len());
        prop_assert_eq!(split(&ids, ratio, seed).unwrap(), s.clone());
        prop_assert_eq!(DatasetSplit::from_manifest(&s.to_manifest()).unwrap(), s);
    }
}
