use dpdg_core::data::{load_csv, synth_group_mixture, write_csv, ColumnSchema, MixtureSpec};
use dpdg_core::numerics::RngStream;

#[test]
fn mixture_csv_round_trip_with_preamble() {
    let spec = MixtureSpec {
        q: vec![0.25, 0.75],
        centers: vec![
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![2.0, 2.0], vec![-2.0, -2.0]],
        ],
        noise_std: 0.1,
    };
    let ds = synth_group_mixture::<f64>(&spec, 64, &mut RngStream::new(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mix.csv");
    write_csv(
        &ds,
        &path,
        &["version: test".to_string(), "seed: 3".to_string()],
    )
    .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# version: test\n# seed: 3\nf0,f1,label,group\n"));
    let (back, enc) = load_csv::<f64>(&path, &ColumnSchema::identity(2)).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.groups(), ds.groups());
    assert_eq!(back.features(), ds.features());
    assert_eq!(enc.feature_names, vec!["f0", "f1"]);
}

#[test]
fn empty_field_is_reported_with_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "f0,label,group\n1.0,0,0\n,1,0\n").unwrap();
    let err = load_csv::<f64>(&path, &ColumnSchema::identity(1))
        .unwrap_err()
        .to_string();
    assert!(err.contains("row 2") && err.contains("f0"), "{err}");
}
