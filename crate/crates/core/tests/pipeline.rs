//! File-level round trip through the library: bundle on disk, extraction,
//! feature file, weights file, classification, label table, evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use icclass::io::{read_feature_file, read_labels, read_recording_bundle, write_feature_file, write_labels, write_recording_bundle};
use icclass::metrics::MergeScheme;
use icclass::network::{load_weights, save_weights, NetworkWeights};
use icclass::pipeline::{classify, evaluate_labels, extract, synthetic_bundle, ClassifyOptions};
use icclass::{Execution, LabelVector};

#[test]
fn recording_to_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = synthetic_bundle("rt", 24, 8, 30.0, 128.0, 11).unwrap();
    write_recording_bundle(&dir.path().join("rec"), &bundle).unwrap();
    let loaded = read_recording_bundle(&dir.path().join("rec")).unwrap();

    let par = extract(&loaded, Execution::Parallel).unwrap();
    let seq = extract(&loaded, Execution::Sequential).unwrap();
    assert!(par.failures.is_empty());
    assert_eq!(par.bundle.components, seq.bundle.components);
    assert_eq!(par.bundle.components.len(), 8);

    let feature_path = dir.path().join("features.bin");
    write_feature_file(&feature_path, &par.bundle).unwrap();
    let features = read_feature_file(&feature_path).unwrap();
    // the file stores f32
    for ((ia, fa), (ib, fb)) in features.components.iter().zip(&par.bundle.components) {
        assert_eq!(ia, ib);
        let a = fa.topo.pixels().iter().chain(&fa.psd).chain(&fa.autocorr);
        let b = fb.topo.pixels().iter().chain(&fb.psd).chain(&fb.autocorr);
        for (x, y) in a.zip(b) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }

    let weights = NetworkWeights::<f32>::init(&mut ChaCha8Rng::seed_from_u64(11));
    let weights_path = dir.path().join("w.bin");
    save_weights(&weights, &weights_path).unwrap();
    let reloaded = load_weights(&weights_path).unwrap();

    let options = ClassifyOptions::default();
    let a = classify(&weights, &features, &options).unwrap();
    let b = classify(&reloaded, &features, &options).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let labels: Vec<(String, LabelVector)> = a
        .components
        .iter()
        .map(|c| {
            let p: [f64; 7] = c.probabilities.clone().try_into().unwrap();
            (c.component_id.clone(), LabelVector::new(p).unwrap())
        })
        .collect();
    let label_path = dir.path().join("labels.csv");
    write_labels(&label_path, &labels).unwrap();
    let read_back = read_labels(&label_path).unwrap();
    assert_eq!(read_back.len(), labels.len());
    for ((ia, la), (ib, lb)) in labels.iter().zip(&read_back) {
        assert_eq!(ia, ib);
        for (x, y) in la.as_array().iter().zip(lb.as_array()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    let report = evaluate_labels(&read_back, &labels, MergeScheme::Seven).unwrap();
    assert_eq!(report.balanced_accuracy, 1.0);
}
