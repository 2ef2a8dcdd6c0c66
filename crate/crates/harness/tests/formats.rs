use std::fs;
use std::io::Cursor;

use proptest::prelude::*;

use ltm_core::neural::NetConfig;
use ltm_core::oracle::InstanceMeta;
use ltm_core::{InfoType, LabelMask, LabeledInstance, Labeling, MethodId, Net, ProbModel};
use ltm_harness::checkpoint::{read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to};
use ltm_harness::config::{Cell, ExperimentConfig};
use ltm_harness::dataset::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, DatasetHeader, HEADER_LEN};
use ltm_harness::pipeline::generate_instances;
use ltm_harness::HarnessError;

fn cell() -> Cell {
    Cell {
        method: MethodId::Borda,
        model: ProbModel::Uniform,
        n: 5,
        m: 3,
        info: InfoType::MajorityMatrix,
        labeling: Labeling::Optimizing,
        seed: 3,
    }
}

fn header_for(cell: &Cell, count: usize) -> DatasetHeader {
    DatasetHeader::new(cell.method, cell.info, cell.model, cell.n, cell.m, cell.labeling, count as u64)
}

#[test]
fn dataset_file_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::default();
    let cell = cell();
    let instances = generate_instances(&cell, 1000, &config).unwrap();
    let header = header_for(&cell, 1000);
    assert_eq!((header.feature_dim, header.num_classes), (12, 6));

    let (a, b) = (dir.path().join("a.ltmd"), dir.path().join("b.ltmd"));
    write_dataset(&a, &header, &instances).unwrap();
    write_dataset(&b, &header, &generate_instances(&cell, 1000, &config).unwrap()).unwrap();
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes.len(), HEADER_LEN + 1000 * (12 * 4 + 1));
    assert_eq!(&bytes[..4], b"LTMD");

    let back = read_dataset(&a).unwrap();
    assert_eq!(back.header, header);
    assert_eq!(back.instances.len(), 1000);
    assert!(back.instances.iter().all(|i| !i.labels.is_empty()));
    // utilities survive the f32 round trip to single precision, counts exactly
    for (x, y) in back.instances.iter().zip(&instances) {
        assert_eq!(x.labels, y.labels);
        for (p, q) in x.features.iter().zip(&y.features) {
            assert_eq!(*p, *q as f32 as f64);
        }
        assert!(x.features[3..].iter().all(|v| v.fract() == 0.0));
    }
}

#[test]
fn reader_rejects_bad_files_with_distinct_errors() {
    let cell = cell();
    let instances = generate_instances(&cell, 10, &ExperimentConfig::default()).unwrap();
    let mut bytes = Vec::new();
    write_dataset_to(&mut bytes, &header_for(&cell, 10), &instances).unwrap();
    assert!(read_dataset_from(&mut Cursor::new(&bytes)).is_ok());

    let mut magic = bytes.clone();
    magic[0] = b'X';
    let e1 = read_dataset_from(&mut Cursor::new(&magic)).unwrap_err();
    assert!(matches!(e1, HarnessError::BadMagic { .. }), "{e1}");

    let mut version = bytes.clone();
    version[4] = 9;
    let e2 = read_dataset_from(&mut Cursor::new(&version)).unwrap_err();
    assert!(matches!(e2, HarnessError::UnsupportedVersion { found: 9, .. }), "{e2}");

    let e3 = read_dataset_from(&mut Cursor::new(&bytes[..bytes.len() - 3])).unwrap_err();
    assert!(matches!(e3, HarnessError::Corrupt(_)), "{e3}");

    let mut dims = bytes.clone();
    dims[21] = 13;
    let e4 = read_dataset_from(&mut Cursor::new(&dims)).unwrap_err();
    assert!(matches!(e4, HarnessError::Corrupt(_)), "{e4}");

    let mut method = bytes.clone();
    method[6] = 200;
    assert!(matches!(read_dataset_from(&mut Cursor::new(&method)), Err(HarnessError::Corrupt(_))));

    let mut empty_mask = bytes.clone();
    let first_label = HEADER_LEN + 12 * 4;
    empty_mask[first_label] = 0;
    assert!(matches!(read_dataset_from(&mut Cursor::new(&empty_mask)), Err(HarnessError::Corrupt(_))));

    let codes = [e1.code(), e2.code(), e3.code()];
    assert!(codes[0] != codes[1] && codes[1] != codes[2] && codes[0] != codes[2]);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let net = Net::new(NetConfig::new(12, &[16, 8], 6, 42)).unwrap();
    let path = dir.path().join("net.ltmw");
    write_checkpoint(&path, &net).unwrap();
    assert_eq!(read_checkpoint(&path).unwrap(), net);

    let mut bytes = Vec::new();
    write_checkpoint_to(&mut bytes, &net).unwrap();
    let expected_len = 4 + 2 + 4 + 4 + 1 + 2 * 4 + 1 + 8 + 8 * net.param_count();
    assert_eq!(bytes.len(), expected_len);
    let mut bad = bytes.clone();
    bad[3] = b'D';
    assert!(matches!(read_checkpoint_from(&mut Cursor::new(&bad)), Err(HarnessError::BadMagic { .. })));
    let mut version = bytes.clone();
    version[4] = 2;
    assert!(matches!(read_checkpoint_from(&mut Cursor::new(&version)), Err(HarnessError::UnsupportedVersion { .. })));
    assert!(matches!(read_checkpoint_from(&mut Cursor::new(&bytes[..40])), Err(HarnessError::Corrupt(_))));
}

fn instance_strategy(classes: usize, dim: usize) -> impl Strategy<Value = (Vec<f32>, Vec<usize>)> {
    (prop::collection::vec(-100.0f32..100.0, dim), prop::collection::btree_set(0..classes, 1..=classes))
        .prop_map(|(f, s)| (f, s.into_iter().collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip(m in 2usize..=5, records in prop::collection::vec(instance_strategy(120, 5 + 25), 0..8)) {
        let classes = ltm_core::oracle::num_classes(m);
        let info = InfoType::MarginMatrix;
        let meta = InstanceMeta { method: MethodId::Nanson, info, n: 7, m };
        let instances: Vec<LabeledInstance<f64>> = records
            .iter()
            .map(|(f, labels)| {
                let mut labels: Vec<usize> = labels.iter().map(|k| k % classes).collect();
                labels.dedup();
                LabeledInstance {
                    features: f.iter().take(info.feature_len(m)).map(|&x| x as f64).collect(),
                    labels: LabelMask::from_indices(classes, labels),
                    meta,
                }
            })
            .collect();
        let header = DatasetHeader::new(MethodId::Nanson, info, ProbModel::Spatial2D, 7, m, Labeling::Satisficing, instances.len() as u64);
        let mut bytes = Vec::new();
        write_dataset_to(&mut bytes, &header, &instances).unwrap();
        prop_assert_eq!(bytes.len(), HEADER_LEN + instances.len() * header.record_len());
        let back = read_dataset_from(&mut Cursor::new(&bytes)).unwrap();
        prop_assert_eq!(back.header, header);
        prop_assert_eq!(back.instances, instances);
    }
}
