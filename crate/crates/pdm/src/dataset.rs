//! On-disk dataset layout.
//!
//! ```text
//! <root>/manifest.csv                    run_id,maintenance,start_iso8601,end_iso8601
//! <root>/<run_id>/channels.csv           timestamp_iso8601,channel,value
//! <root>/<run_id>/vibration/meta.csv     sample_rate_hz,duration_s
//! <root>/<run_id>/vibration/<start>.csv  amplitude
//! ```
//!
//! Timestamps are RFC 3339 in UTC. An empty `value` is a missing sample.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use pdm_core::run_store::{AcquisitionWindow, Dataset, DatasetError, Maintenance, Run, SensorChannel};

use crate::error::DataError;

pub const MANIFEST: &str = "manifest.csv";
const MANIFEST_HEADER: [&str; 4] = ["run_id", "maintenance", "start_iso8601", "end_iso8601"];
const CHANNELS_HEADER: [&str; 3] = ["timestamp_iso8601", "channel", "value"];
const META_HEADER: [&str; 2] = ["sample_rate_hz", "duration_s"];

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub maintenance: Maintenance,
    pub start_unix_s: i64,
    pub end_unix_s: i64,
}

const NANOS: i64 = 1_000_000_000;

/// Formats `unix_ns` nanoseconds since the epoch.
pub fn format_iso(unix_ns: i64) -> String {
    let t = DateTime::<Utc>::from_timestamp(unix_ns.div_euclid(NANOS), unix_ns.rem_euclid(NANOS) as u32)
        .expect("timestamp in chrono range");
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn parse_iso(s: &str) -> Result<i64, String> {
    let t = DateTime::parse_from_rfc3339(s.trim()).map_err(|e| format!("bad timestamp `{s}`: {e}"))?;
    t.timestamp_nanos_opt().ok_or_else(|| format!("timestamp `{s}` out of range"))
}

fn offset_ns(seconds: f64) -> i64 {
    (seconds * 1e9).round() as i64
}

fn offset_s(ns: i64) -> f64 {
    ns as f64 / 1e9
}

/// Shortest decimal form that parses back to the same value; empty for
/// missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, DataError> {
    let file = File::create(path).map_err(DataError::io(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

pub(crate) fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |e| {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(source) => DataError::Io { path: path.to_path_buf(), source },
            kind => DataError::malformed(path, line, format!("{kind:?}")),
        }
    }
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(DataError::io(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

pub(crate) fn check_header(rdr: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<(), DataError> {
    let header = rdr.headers().map_err(csv_err(path))?;
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(DataError::malformed(path, 1, format!("expected header `{}`", expected.join(","))));
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub(crate) fn parse_f64(field: &str, path: &Path, line: u64, what: &str) -> Result<f64, DataError> {
    field.trim().parse::<f64>().map_err(|_| DataError::malformed(path, line, format!("bad {what} `{field}`")))
}

pub(crate) fn flush(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), DataError> {
    let mut inner = w.into_inner().map_err(|e| DataError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    inner.flush().map_err(DataError::io(path))
}

/// Reads the manifest, rejecting duplicate run ids.
pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>, DataError> {
    let path = root.join(MANIFEST);
    if !path.is_file() {
        return Err(DataError::MissingManifest(path));
    }
    let mut rdr = reader(&path)?;
    check_header(&mut rdr, &path, &MANIFEST_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(&path))?;
        let line = line_of(&rec);
        if rec.len() != 4 {
            return Err(DataError::malformed(&path, line, "expected 4 fields"));
        }
        let id = rec[0].trim().to_string();
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            return Err(DataError::malformed(&path, line, format!("invalid run id `{id}`")));
        }
        let maintenance = Maintenance::parse(&rec[1])
            .ok_or_else(|| DataError::malformed(&path, line, format!("unknown maintenance `{}`", &rec[1])))?;
        let whole = |field: &str| -> Result<i64, DataError> {
            let ns = parse_iso(field).map_err(|m| DataError::malformed(&path, line, m))?;
            if ns % NANOS != 0 {
                return Err(DataError::malformed(&path, line, "run bounds must be whole seconds"));
            }
            Ok(ns / NANOS)
        };
        let entry = ManifestEntry { id, maintenance, start_unix_s: whole(&rec[2])?, end_unix_s: whole(&rec[3])? };
        if !seen.insert(entry.id.clone()) {
            return Err(DataError::Dataset(DatasetError::DuplicateRunId(entry.id)));
        }
        out.push(entry);
    }
    Ok(out)
}

fn read_channels(path: &Path, start_ns: i64) -> Result<Vec<SensorChannel>, DataError> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &CHANNELS_HEADER)?;
    let mut channels: Vec<SensorChannel> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(DataError::malformed(path, line, "expected 3 fields"));
        }
        let t = parse_iso(&rec[0]).map_err(|m| DataError::malformed(path, line, m))?;
        let name = rec[1].trim();
        let raw = rec[2].trim();
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            f64::NAN
        } else {
            parse_f64(raw, path, line, "value")?
        };
        let idx = match channels.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                channels.push(SensorChannel {
                    name: name.to_string(),
                    sample_period_s: 0.0,
                    timestamps_s: Vec::new(),
                    values: Vec::new(),
                });
                channels.len() - 1
            }
        };
        channels[idx].timestamps_s.push(offset_s(t - start_ns));
        channels[idx].values.push(value);
    }
    for ch in &mut channels {
        ch.sample_period_s = median_step(&ch.timestamps_s);
    }
    Ok(channels)
}

/// Median spacing of the timestamps; one hour for a single sample.
fn median_step(ts: &[f64]) -> f64 {
    let mut d: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    if d.is_empty() {
        return 3600.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

fn read_vibration(dir: &Path, start_ns: i64, run_id: &str) -> Result<Vec<AcquisitionWindow>, DataError> {
    let meta_path = dir.join("meta.csv");
    let mut rdr = reader(&meta_path)?;
    check_header(&mut rdr, &meta_path, &META_HEADER)?;
    let rec = match rdr.records().next() {
        Some(r) => r.map_err(csv_err(&meta_path))?,
        None => return Err(DataError::malformed(&meta_path, 2, "missing sample rate row")),
    };
    let line = line_of(&rec);
    if rec.len() != 2 {
        return Err(DataError::malformed(&meta_path, line, "expected 2 fields"));
    }
    let rate = parse_f64(&rec[0], &meta_path, line, "sample rate")?;
    let duration = parse_f64(&rec[1], &meta_path, line, "duration")?;

    let mut files: Vec<(i64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(DataError::io(dir))? {
        let entry = entry.map_err(DataError::io(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == "meta.csv" {
            continue;
        }
        let Some(stem) = name.strip_suffix(".csv") else { continue };
        let path = entry.path();
        let t = parse_iso(stem).map_err(|m| DataError::malformed(&path, 0, m))?;
        files.push((t, path));
    }
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for (t, path) in files {
        let mut rdr = reader(&path)?;
        check_header(&mut rdr, &path, &["amplitude"])?;
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err(&path))?;
            let line = line_of(&rec);
            if rec.len() != 1 {
                return Err(DataError::malformed(&path, line, "expected 1 field"));
            }
            samples.push(parse_f64(&rec[0], &path, line, "amplitude")?);
        }
        if (samples.len() as f64 - rate * duration).abs() > 1.0 {
            return Err(DataError::Dataset(DatasetError::InvariantViolation {
                run_id: run_id.to_string(),
                description: format!(
                    "{} has {} samples, meta.csv implies {}",
                    path.display(),
                    samples.len(),
                    rate * duration
                ),
            }));
        }
        out.push(AcquisitionWindow { start_s: offset_s(t - start_ns), sample_rate_hz: rate, samples });
    }
    Ok(out)
}

/// Loads one run, fills channel gaps and checks its invariants.
pub fn load_run(root: &Path, entry: &ManifestEntry) -> Result<Run, DataError> {
    let dir = root.join(&entry.id);
    let start_ns = entry.start_unix_s * NANOS;
    let channels_path = dir.join("channels.csv");
    let channels = if channels_path.is_file() { read_channels(&channels_path, start_ns)? } else { Vec::new() };
    let vib_dir = dir.join("vibration");
    let vibration =
        if vib_dir.is_dir() { read_vibration(&vib_dir, start_ns, &entry.id)? } else { Vec::new() };
    let mut run = Run {
        id: entry.id.clone(),
        maintenance: entry.maintenance,
        start_unix_s: entry.start_unix_s,
        end_unix_s: entry.end_unix_s,
        channels,
        vibration,
    };
    run.prepare()?;
    Ok(run)
}

pub fn load_dataset(root: &Path) -> Result<Dataset, DataError> {
    let entries = read_manifest(root)?;
    let runs = entries.iter().map(|e| load_run(root, e)).collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(runs)?)
}

pub fn write_manifest<'a>(root: &Path, runs: impl IntoIterator<Item = &'a ManifestEntry>) -> Result<(), DataError> {
    fs::create_dir_all(root).map_err(DataError::io(root))?;
    let path = root.join(MANIFEST);
    let mut w = writer(&path)?;
    w.write_record(MANIFEST_HEADER).map_err(csv_err(&path))?;
    for e in runs {
        w.write_record([
            e.id.as_str(),
            e.maintenance.as_str(),
            &format_iso(e.start_unix_s * NANOS),
            &format_iso(e.end_unix_s * NANOS),
        ])
        .map_err(csv_err(&path))?;
    }
    flush(w, &path)
}

impl From<&Run> for ManifestEntry {
    fn from(r: &Run) -> Self {
        ManifestEntry {
            id: r.id.clone(),
            maintenance: r.maintenance,
            start_unix_s: r.start_unix_s,
            end_unix_s: r.end_unix_s,
        }
    }
}

/// Writes the files of one run (not its manifest row). An existing run
/// directory is replaced.
pub fn write_run(root: &Path, run: &Run) -> Result<(), DataError> {
    let dir = root.join(&run.id);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(DataError::io(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(DataError::io(&dir))?;
    let start_ns = run.start_unix_s * NANOS;

    let path = dir.join("channels.csv");
    let mut w = writer(&path)?;
    w.write_record(CHANNELS_HEADER).map_err(csv_err(&path))?;
    for ch in &run.channels {
        for (t, v) in ch.timestamps_s.iter().zip(&ch.values) {
            w.write_record([format_iso(start_ns + offset_ns(*t)).as_str(), ch.name.as_str(), &fmt_f64(*v)])
                .map_err(csv_err(&path))?;
        }
    }
    flush(w, &path)?;

    let Some(first) = run.vibration.first() else { return Ok(()) };
    let rate = first.sample_rate_hz;
    let n = first.samples.len();
    if run.vibration.iter().any(|a| a.sample_rate_hz != rate || a.samples.len() != n) {
        return Err(DataError::Dataset(DatasetError::InvariantViolation {
            run_id: run.id.clone(),
            description: "acquisitions of one run must share sample rate and length".into(),
        }));
    }
    let vib = dir.join("vibration");
    fs::create_dir_all(&vib).map_err(DataError::io(&vib))?;
    let meta = vib.join("meta.csv");
    let mut w = writer(&meta)?;
    w.write_record(META_HEADER).map_err(csv_err(&meta))?;
    w.write_record([fmt_f64(rate), fmt_f64(first.duration_s())]).map_err(csv_err(&meta))?;
    flush(w, &meta)?;

    for acq in &run.vibration {
        let path = vib.join(format!("{}.csv", format_iso(start_ns + offset_ns(acq.start_s))));
        let file = File::create(&path).map_err(DataError::io(&path))?;
        let mut out = BufWriter::new(file);
        let io = DataError::io(&path);
        let mut body = String::with_capacity(acq.samples.len() * 20 + 10);
        body.push_str("amplitude\n");
        for v in &acq.samples {
            body.push_str(&fmt_f64(*v));
            body.push('\n');
        }
        out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(io)?;
    }
    Ok(())
}

pub fn save_dataset(root: &Path, ds: &Dataset) -> Result<(), DataError> {
    fs::create_dir_all(root).map_err(DataError::io(root))?;
    for run in ds.runs() {
        write_run(root, run)?;
    }
    let entries: Vec<ManifestEntry> = ds.runs().iter().map(ManifestEntry::from).collect();
    write_manifest(root, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip() {
        for ns in [0, 1_577_836_800 * NANOS, 1_577_836_800 * NANOS + 500_000_000, 1_577_836_800 * NANOS + 1] {
            assert_eq!(parse_iso(&format_iso(ns)).unwrap(), ns);
        }
        assert_eq!(format_iso(1_577_836_800 * NANOS), "2020-01-01T00:00:00Z");
        assert!(parse_iso("yesterday").is_err());
    }

    #[test]
    fn floats_print_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 45.123456789012345] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "");
    }

    #[test]
    fn step_is_median_spacing() {
        assert_eq!(median_step(&[0.0, 60.0, 120.0, 300.0]), 60.0);
        assert_eq!(median_step(&[5.0]), 3600.0);
    }
}
