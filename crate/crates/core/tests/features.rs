use grasp_core::features::*;
use grasp_core::preprocess::NetInput;
use grasp_core::Error;
use proptest::prelude::*;

/// Byte layout assembled by hand, independent of `FeatureSet::to_bytes`.
fn hand_built(backbone: &str, ids: &[&str], rows: &[Vec<f32>]) -> Vec<u8> {
    let mut b = b"GFEA".to_vec();
    b.extend(1u32.to_le_bytes());
    b.extend((backbone.len() as u32).to_le_bytes());
    b.extend(backbone.as_bytes());
    b.extend((rows[0].len() as u64).to_le_bytes());
    b.extend((ids.len() as u64).to_le_bytes());
    for id in ids {
        b.extend((id.len() as u32).to_le_bytes());
        b.extend(id.as_bytes());
    }
    for row in rows {
        for v in row {
            b.extend(v.to_le_bytes());
        }
    }
    b
}

#[test]
fn reads_hand_built_file() {
    let bytes = hand_built("alexnet", &["pcd0100", "pcd0101"], &[vec![1.5, -2.0, 0.25], vec![0.0, 3.0, -0.5]]);
    let set = FeatureSet::from_bytes(&bytes).unwrap();
    assert_eq!((set.backbone.as_str(), set.dim, set.len()), ("alexnet", 3, 2));
    assert_eq!(set.get("pcd0101").unwrap().values(), &[0.0, 3.0, -0.5]);
    assert_eq!(set.to_bytes(), bytes);
}

#[test]
fn damaged_files_give_typed_errors() {
    let good = hand_built("vgg19_bn", &["a", "b"], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
    assert!(matches!(
        FeatureSet::from_bytes(&good[..good.len() - 1]),
        Err(Error::TruncatedPayload { .. })
    ));
    let mut longer = good.clone();
    longer.push(0);
    assert!(matches!(FeatureSet::from_bytes(&longer), Err(Error::TrailingData { extra: 1 })));
    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(matches!(FeatureSet::from_bytes(&magic), Err(Error::BadMagic { .. })));
    let mut version = good.clone();
    version[4] = 2;
    assert!(matches!(FeatureSet::from_bytes(&version), Err(Error::VersionUnsupported(2))));
    let dup = hand_built("x", &["a", "a"], &[vec![1.0], vec![2.0]]);
    assert!(matches!(FeatureSet::from_bytes(&dup), Err(Error::DuplicateId(_))));
    let nan = hand_built("x", &["a"], &[vec![1.0, f32::NAN]]);
    assert!(matches!(
        FeatureSet::from_bytes(&nan),
        Err(Error::NonFiniteFeature { index: 1, .. })
    ));
    let mut huge = hand_built("x", &["a"], &[vec![1.0]]);
    // count field sits after magic, version, name and dim
    huge[4 + 4 + 4 + 1 + 8..4 + 4 + 4 + 1 + 16].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(FeatureSet::from_bytes(&huge).is_err());
}

#[test]
fn alexnet_shaped_file_validates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alexnet.gfea");
    let mut set = FeatureSet::new("alexnet", 256 * 6 * 6);
    for i in 0..3 {
        let values = (0..9216).map(|k| ((k * (i + 1)) % 97) as f64 / 8.0).collect();
        set.insert(format!("pcd{i:04}"), FeatureVec::new(values).unwrap()).unwrap();
    }
    set.write(&path).unwrap();
    let summary = validate_feature_file(&path).unwrap();
    assert_eq!((summary.dim, summary.count), (9216, 3));
    assert_eq!(summary.checksum.len(), 64);
    assert_eq!(validate_feature_file(&path).unwrap().checksum, summary.checksum);
}

#[test]
fn toy_extraction_is_frozen() {
    let input = NetInput::new(std::array::from_fn(|c| {
        grasp_core::plane::Plane::from_fn(224, 224, |u, v| ((u + 2 * v + c) % 13) as f64 / 6.5 - 1.0)
    }));
    let a = toy_extract(&input, 9, 64);
    let b = toy_extract(&input, 9, 64);
    assert_eq!(a, b);
    assert_eq!(a.dim(), 64);
    assert_ne!(a, toy_extract(&input, 10, 64));
    assert!(a.values().iter().all(|v| v.abs() < 1.0));
}

proptest! {
    #[test]
    fn write_load_identity(
        rows in prop::collection::vec(prop::collection::vec(-1e3f32..1e3, 5), 1..20),
        name in "[a-z0-9_]{1,12}",
    ) {
        let mut set = FeatureSet::new(name, 5);
        for (i, row) in rows.iter().enumerate() {
            let v = row.iter().map(|&x| x as f64).collect();
            set.insert(format!("id{i}/r1z2"), FeatureVec::new(v).unwrap()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.gfea");
        set.write(&path).unwrap();
        let back = load_features(&path).unwrap();
        prop_assert_eq!(back.backbone.clone(), set.backbone.clone());
        prop_assert_eq!(back.len(), set.len());
        for ((ia, fa), (ib, fb)) in set.iter().zip(back.iter()) {
            prop_assert_eq!(ia, ib);
            prop_assert_eq!(fa.values(), fb.values());
        }
    }
}
