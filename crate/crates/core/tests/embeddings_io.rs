use entailment::embeddings::{self, EmbeddingTable, Format};
use entailment::Error;

fn sample() -> EmbeddingTable {
    EmbeddingTable::from_rows(
        3,
        vec![("king", vec![0.5f32, -1.25, 3.0]), ("queen", vec![1e-3, 2.5e6, -7.0]), ("Über", vec![0.0, 0.0, 1.0])],
    )
    .unwrap()
}

#[test]
fn binary_and_text_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = sample();

    let bin = dir.path().join("vectors.bin");
    let mut bytes = Vec::new();
    table.write_binary(&mut bytes).unwrap();
    std::fs::write(&bin, &bytes).unwrap();
    let txt = dir.path().join("vectors.txt");
    let mut text = Vec::new();
    table.write_text(&mut text).unwrap();
    std::fs::write(&txt, &text).unwrap();

    assert_eq!(Format::sniff(&bin), Format::Binary);
    assert_eq!(Format::sniff(&txt), Format::Text);
    for loaded in [embeddings::load(&bin, None).unwrap(), embeddings::load(&txt, None).unwrap()] {
        assert_eq!(loaded.words(), table.words());
        for w in table.words() {
            assert_eq!(loaded.row_of(w), table.row_of(w));
        }
    }
    assert!(embeddings::load(&bin, Some(Format::Text)).is_err());
}

#[test]
fn truncated_binary_reports_error() {
    let mut bytes = Vec::new();
    sample().write_binary(&mut bytes).unwrap();
    for cut in [bytes.len() - 2, bytes.len() - 6, 8] {
        let err = embeddings::read_binary(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. } | Error::CountMismatch { .. }), "{cut}: {err}");
    }
}

#[test]
fn missing_file_is_io_error() {
    let err = embeddings::load(std::path::Path::new("/nonexistent/vectors.bin"), None).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
}
