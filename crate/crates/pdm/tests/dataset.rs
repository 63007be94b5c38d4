use std::fs;
use std::path::Path;

use pdm::dataset::{load_dataset, read_manifest, save_dataset, MANIFEST};
use pdm::DataError;
use pdm_core::run_store::{generate_synthetic, Dataset, DatasetError, GeneratorProfile};

fn tiny_profile() -> GeneratorProfile {
    GeneratorProfile {
        run_days: (2.0, 3.0),
        degradation_days: (1.0, 1.5),
        vibration_duration_s: 0.25,
        ..GeneratorProfile::default()
    }
}

fn tiny(seed: u64) -> Dataset {
    generate_synthetic(seed, 2, 1, &tiny_profile()).unwrap()
}

fn write_text(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

const HEADER: &str = "run_id,maintenance,start_iso8601,end_iso8601\n";

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny(3);
    save_dataset(dir.path(), &ds).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    assert_eq!((back.corrective_count(), back.preventive_count()), (2, 1));

    let again = tempfile::tempdir().unwrap();
    save_dataset(again.path(), &back).unwrap();
    assert_eq!(load_dataset(again.path()).unwrap(), ds);
    assert_eq!(
        fs::read(dir.path().join(MANIFEST)).unwrap(),
        fs::read(again.path().join(MANIFEST)).unwrap()
    );
}

#[test]
fn empty_manifest_is_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    write_text(&dir.path().join(MANIFEST), HEADER);
    assert!(load_dataset(dir.path()).unwrap().is_empty());
}

#[test]
fn missing_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(DataError::MissingManifest(_))));
}

#[test]
fn duplicate_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let row = "A,corrective,2020-01-01T00:00:00Z,2020-01-03T00:00:00Z\n";
    write_text(&dir.path().join(MANIFEST), &format!("{HEADER}{row}{}", row.replace("corrective", "preventive")));
    match read_manifest(dir.path()) {
        Err(DataError::Dataset(DatasetError::DuplicateRunId(id))) => assert_eq!(id, "A"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{HEADER}A,corrective,2020-01-01T00:00:00Z,2020-01-03T00:00:00Z\nB,scrapped,2020-01-01T00:00:00Z,2020-01-03T00:00:00Z\n"
    );
    write_text(&dir.path().join(MANIFEST), &text);
    match read_manifest(dir.path()) {
        Err(DataError::MalformedRow { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("scrapped"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

/// Blanks every `stride`-th value of the first channel of the first run,
/// limited to the first `limit` of its samples.
fn blank_values(root: &Path, stride: usize, limit: usize) {
    let run = &read_manifest(root).unwrap()[0].id;
    let path = root.join(run).join("channels.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let first = lines[1].split(',').nth(1).unwrap().to_string();
    let mut seen = 0;
    for line in lines.iter_mut().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[1] != first {
            continue;
        }
        if seen < limit && seen % stride == 0 {
            *line = format!("{},{},", cells[0], cells[1]);
        }
        seen += 1;
    }
    fs::write(&path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn small_gaps_are_filled() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &tiny(4)).unwrap();
    blank_values(dir.path(), 20, usize::MAX);
    let loaded = load_dataset(dir.path()).unwrap();
    assert!(loaded.runs()[0].channels[0].values.iter().all(|v| v.is_finite()));
}

#[test]
fn sparse_channel_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny(4);
    let n = ds.runs()[0].channels[0].values.len();
    save_dataset(dir.path(), &ds).unwrap();
    blank_values(dir.path(), 1, n / 5);
    assert!(matches!(
        load_dataset(dir.path()),
        Err(DataError::Dataset(DatasetError::InvariantViolation { .. }))
    ));
}

#[test]
fn generator_is_seeded() {
    assert_eq!(tiny(7), tiny(7));
    assert_ne!(tiny(7), tiny(8));
}
