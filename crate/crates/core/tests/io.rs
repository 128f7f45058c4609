//! File formats, sample data and model persistence.

mod common;

use common::{samples, toy_bundle};
use lrfr::features::{Extractor, FeatureSpace, Vocab};
use lrfr::io::model_file::{from_bytes, to_bytes};
use lrfr::io::{
    load_clusters, load_embeddings, load_instances, load_model, load_templates, parse_instances,
    save_model, ClusterMap, UNK_CLUSTER,
};
use lrfr::model::{Form, Task};
use lrfr::pipeline::{NgramMode, Pipeline};
use lrfr::scoring::Scorer;
use lrfr::synth::{random_instance, random_model, ToySpec};
use lrfr::training::{train, TrainConfig};
use lrfr::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn sample_files_load() {
    let dir = samples();
    let emb = load_embeddings(dir.join("embeddings.txt")).unwrap();
    assert_eq!(emb.dim(), 8);
    assert_eq!(emb.lookup("no-such-word"), &[0.0; 8]);
    let clusters = load_clusters(dir.join("clusters.txt"), Some(2)).unwrap();
    assert!(clusters.len() > 10);
    assert!(clusters.cluster("apple").len() <= 2);
    for name in ["relations.train.jsonl", "relations.dev.jsonl", "attach.train.jsonl"] {
        assert!(!load_instances(dir.join(name)).unwrap().is_empty(), "{name}");
    }
    let test = load_instances(dir.join("relations.test.jsonl")).unwrap();
    assert!(test.iter().all(|i| i.label.is_none()));
    assert_eq!(load_templates(dir.join("relations.templates")).unwrap().len(), 7);
    assert_eq!(load_templates(dir.join("attach.templates")).unwrap().len(), 3);
}

#[test]
fn cluster_paths_truncate_and_fall_back() {
    let c = ClusterMap::parse("0110\tapple\n", "c", None).unwrap();
    assert_eq!(c.cluster("apple"), "0110");
    let c = ClusterMap::parse("0110\tapple\n", "c", Some(2)).unwrap();
    assert_eq!(c.cluster("apple"), "01");
    assert_eq!(c.cluster("pear"), UNK_CLUSTER);
    match ClusterMap::parse("0110\tapple\n01x0\tpear\n", "c", None) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn instance_schema_errors_carry_line_numbers() {
    let ok = r#"{"tokens":["a","b"],"label":"x"}"#;
    let cases = [
        format!("{ok}\n{{\"tokens\":[\"a\"],\"bogus\":1}}\n"),
        format!("{ok}\n\n{{\"tokens\":[\"a\"],\"annotations\":{{\"pos\":[\"N\",\"V\"]}}}}\n"),
        format!("{ok}\n{{\"tokens\":[\"a\"],\"roles\":{{\"h\":3}}}}\n"),
        format!("{ok}\nnot json\n"),
    ];
    let expected = [2, 3, 2, 2];
    for (text, line) in cases.iter().zip(expected) {
        match parse_instances(text, "i.jsonl") {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn empty_training_data_is_refused() {
    assert!(parse_instances("\n\n", "empty").unwrap().is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = random_model(&ToySpec::default(), 0.1, &mut rng).unwrap();
    let err = train(&mut model, &[], &[], &TrainConfig::default(), |_| {}).unwrap_err();
    assert!(matches!(err, Error::EmptyDataset(_)), "{err}");
}

#[test]
fn extraction_is_stable() {
    let dir = samples();
    let insts = load_instances(dir.join("relations.train.jsonl")).unwrap();
    let templates = load_templates(dir.join("relations.templates")).unwrap();
    let mut p = Pipeline::new(
        Extractor::new(templates, true),
        FeatureSpace::new(Vocab::with_unk()),
        NgramMode::MultiTensor,
        None,
    )
    .unwrap();
    let first = p.prepare_all(&insts).unwrap();
    let second = p.prepare_all(&insts).unwrap();
    assert_eq!(first, second);
    p.space.freeze();
    assert_eq!(p.prepare_all(&insts).unwrap(), first);
}

fn round_trip(spec: &ToySpec, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_model(spec, 1.0, &mut rng).unwrap();
    let bundle = toy_bundle(model);
    let bytes = to_bytes(&bundle);
    let loaded = from_bytes(&bytes).unwrap();
    assert_eq!(loaded, bundle);
    assert_eq!(to_bytes(&loaded), bytes);
    let (a, b) = (Scorer::new(&bundle.model), Scorer::new(&loaded.model));
    for _ in 0..100 {
        let inst = random_instance(&bundle.model, &[3, 2], 4, &mut rng);
        let (p, q) = (a.predict(&inst).unwrap(), b.predict(&inst).unwrap());
        assert_eq!(p, q);
    }
}

#[test]
fn models_round_trip_exactly() {
    for task in [Task::Classify { labels: 3 }, Task::Rank] {
        for form in [Form::Tucker, Form::Cp] {
            for (embedding, fine_tune) in [(None, false), (Some(4), true)] {
                let spec = ToySpec {
                    task,
                    embedding,
                    fine_tune,
                    unigram_form: form,
                    ngram_form: Form::Cp,
                    ..ToySpec::default()
                };
                round_trip(&spec, 3);
            }
        }
    }
}

#[test]
fn saved_files_are_identical_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bundle = toy_bundle(random_model(&ToySpec::default(), 1.0, &mut rng).unwrap());
    let (a, b) = (dir.path().join("a.model"), dir.path().join("b.model"));
    save_model(&bundle, &a).unwrap();
    save_model(&load_model(&a).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn version_mismatch_names_both_versions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bundle = toy_bundle(random_model(&ToySpec::default(), 1.0, &mut rng).unwrap());
    let mut bytes = to_bytes(&bundle);
    let at = bytes.iter().position(|&b| b == b'\n').unwrap();
    bytes.splice(at - 1..at, b"7".iter().copied());
    let err = from_bytes(&bytes).unwrap_err();
    assert!(matches!(&err, Error::Version { found, expected } if found == "7" && expected == "1"));
    let msg = err.to_string();
    assert!(msg.contains('7') && msg.contains('1'), "{msg}");
}

#[test]
fn damaged_model_files_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bundle = toy_bundle(random_model(&ToySpec::default(), 1.0, &mut rng).unwrap());
    let bytes = to_bytes(&bundle);
    assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::ModelFormat(_))));
    assert!(matches!(from_bytes(b"hello\n"), Err(Error::ModelFormat(_))));
    // A descriptor whose dimensions disagree with the vocabularies.
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let header_end = text.find("data ").unwrap();
    let header = &text[..header_end];
    let bad = header.replacen("property:4:", "property:5:", 1);
    assert_ne!(bad, header);
    let mut damaged = bad.into_bytes();
    damaged.extend_from_slice(&bytes[header_end..]);
    assert!(matches!(from_bytes(&damaged), Err(Error::ModelFormat(_))));
}
