use std::io::Write;

use labelcon::data::{default_class_names, load_dataset, LabelVector, Sample, Split};
use labelcon::synth::synth_generate;
use labelcon::{Dataset, Error};
use proptest::prelude::*;
use tempfile::NamedTempFile;

fn write_lines(lines: &[String]) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    f.flush().unwrap();
    f
}

fn header(c: usize, e: usize) -> String {
    serde_json::json!({
        "num_classes": c,
        "embed_dim": e,
        "class_names": default_class_names(c),
    })
    .to_string()
}

fn sample_line(id: &str, labels: &[u8], embedding: &str) -> String {
    format!(
        r#"{{"id":"{id}","lang":"en","split":"train","labels":{},"embedding":{embedding}}}"#,
        serde_json::to_string(labels).unwrap()
    )
}

fn load_error(lines: &[String]) -> (usize, String) {
    let f = write_lines(lines);
    match load_dataset(f.path()) {
        Err(Error::Load { line, message, .. }) => (line, message),
        other => panic!("expected a load error, got {other:?}"),
    }
}

#[test]
fn three_sample_file_loads_in_order() {
    let mut one = [0u8; 14];
    one[3] = 1;
    let lines = vec![
        header(14, 4),
        sample_line("a", &one, "[0.1,0.2,0.3,0.4]"),
        sample_line("b", &one, "[1,2,3,4]"),
        sample_line("c", &one, "[-1e-300,5e300,0,1]"),
    ];
    let ds = load_dataset(write_lines(&lines).path()).unwrap();
    assert_eq!(ds.len(), 3);
    let ids: Vec<&str> = ds.samples().iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    assert_eq!(ds.samples()[2].embedding[0], -1e-300);
}

#[test]
fn short_label_vector_names_line_two() {
    let lines = vec![header(14, 2), sample_line("x", &[1; 13], "[1,0]")];
    let (line, message) = load_error(&lines);
    assert_eq!(line, 2);
    assert!(message.contains("label length mismatch"), "{message}");
    let rendered = Error::Load {
        path: "d.jsonl".into(),
        line,
        message,
    }
    .to_string();
    assert!(rendered.contains("line 2"), "{rendered}");
}

#[test]
fn nan_embedding_names_the_sample() {
    let lines = vec![
        header(2, 3),
        sample_line("fine", &[1, 0], "[1,2,3]"),
        sample_line("broken-7", &[0, 1], "[1,NaN,3]"),
    ];
    let (line, message) = load_error(&lines);
    assert_eq!(line, 3);
    assert!(message.contains("broken-7"), "{message}");
}

#[test]
fn other_invalid_lines_are_reported() {
    let (line, message) = load_error(&[header(2, 2), sample_line("a", &[1, 0], "[1,2,3]")]);
    assert_eq!(line, 2);
    assert!(message.contains("embedding length mismatch"), "{message}");

    let (line, message) = load_error(&[
        header(2, 2),
        sample_line("a", &[1, 0], "[1,2]"),
        sample_line("a", &[0, 1], "[3,4]"),
    ]);
    assert_eq!(line, 3);
    assert!(message.contains("duplicate"), "{message}");

    let (line, message) = load_error(&[header(2, 2), r#"{"id":"a","lang":"en","labels":[1,0],"embedding":[1,2]}"#.into()]);
    assert_eq!(line, 2);
    assert!(message.contains("split"), "{message}");

    let (line, _) = load_error(&[header(2, 2), sample_line("a", &[1, 2], "[1,2]")]);
    assert_eq!(line, 2);
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let langs = vec!["en".to_string(), "de".to_string()];
    let ds = synth_generate(60, 5, 7, &langs, 0.4, 3).unwrap();
    let f = NamedTempFile::new().unwrap();
    ds.save(f.path()).unwrap();
    let back = Dataset::load(f.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in ds.samples().iter().zip(back.samples()) {
        let bits_a: Vec<u64> = a.embedding.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.embedding.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }
}

#[test]
fn text_field_survives_round_trip() {
    let s = Sample {
        id: "t".into(),
        lang: "it".into(),
        split: Split::Dev,
        labels: LabelVector::new(vec![0, 1]).unwrap(),
        embedding: vec![0.1 + 0.2, f64::MIN_POSITIVE],
        text: Some("quoted \"text\"\nwith NaN inside".into()),
    };
    let ds = Dataset::new(vec![s], 2, 2, default_class_names(2)).unwrap();
    let f = NamedTempFile::new().unwrap();
    ds.save(f.path()).unwrap();
    assert_eq!(Dataset::load(f.path()).unwrap(), ds);
}

#[test]
fn synth_examples() {
    let langs = vec!["en".to_string(), "de".to_string()];
    let a = synth_generate(280, 14, 32, &langs, 0.3, 7).unwrap();
    let b = synth_generate(280, 14, 32, &langs, 0.3, 7).unwrap();
    assert_eq!(a, b);

    let en = vec!["en".to_string()];
    let small = synth_generate(14, 14, 8, &en, 0.0, 1).unwrap();
    for c in 0..14 {
        assert!(small.samples().iter().any(|s| s.labels.has(c)), "class {c}");
    }

    let ds = synth_generate(100, 14, 16, &en, 0.3, 3).unwrap();
    let bits: usize = ds.samples().iter().map(|s| s.labels.bits().iter().filter(|&&b| b == 1).count()).sum();
    let density = bits as f64 / ds.len() as f64;
    assert!((1.0..=14.0).contains(&density), "{density}");

    assert!(matches!(synth_generate(0, 14, 8, &en, 0.3, 1), Err(Error::Argument(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn synth_is_a_pure_function(seed in any::<u64>(), n in 1usize..40, rho in 0.0f64..=1.0) {
        let langs = vec!["en".to_string(), "fr".to_string(), "ka".to_string()];
        let a = synth_generate(n, 4, 3, &langs, rho, seed).unwrap();
        let b = synth_generate(n, 4, 3, &langs, rho, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
