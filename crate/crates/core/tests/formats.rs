use std::fs::File;
use std::io::BufReader;

use narrowband_pairs::config::{load_config, RunConfig};
use narrowband_pairs::pairsim::{read_binary, read_csv, write_binary, write_csv, Channel, TimeTag};
use narrowband_pairs::tomography::{canonical_16_settings, simulate_counts, DensityMatrix, TomographyRecord};
use proptest::prelude::*;

fn tags(raw: &[(i64, bool)]) -> Vec<TimeTag> {
    let mut v: Vec<TimeTag> = raw
        .iter()
        .map(|&(t, a)| TimeTag {
            time_ps: t,
            channel: if a { Channel::A } else { Channel::B },
        })
        .collect();
    v.sort_by_key(|t| t.time_ps);
    v
}

proptest! {
    #[test]
    fn stream_formats_round_trip_through_files(raw in proptest::collection::vec((0i64..1 << 50, any::<bool>()), 0..200)) {
        let dir = tempfile::tempdir().unwrap();
        let tags = tags(&raw);
        let bin = dir.path().join("s.bin");
        write_binary(File::create(&bin).unwrap(), &tags).unwrap();
        prop_assert_eq!(std::fs::metadata(&bin).unwrap().len(), 9 * tags.len() as u64);
        prop_assert_eq!(&read_binary(BufReader::new(File::open(&bin).unwrap())).unwrap(), &tags);
        let csv = dir.path().join("s.csv");
        write_csv(File::create(&csv).unwrap(), &tags).unwrap();
        prop_assert_eq!(&read_csv(BufReader::new(File::open(&csv).unwrap())).unwrap(), &tags);
    }
}

#[test]
fn truncated_binary_stream_is_rejected() {
    let mut bytes = Vec::new();
    write_binary(&mut bytes, &tags(&[(5, true), (9, false)])).unwrap();
    bytes.pop();
    assert!(read_binary(bytes.as_slice()).is_err());
}

#[test]
fn tomography_counts_round_trip() {
    let record = simulate_counts(&DensityMatrix::werner(0.8).unwrap(), &canonical_16_settings(), 1e3, 1.5, 4).unwrap();
    let mut csv = Vec::new();
    record.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with("setting_label,raw_count,accidental_count\n"));
    assert_eq!(TomographyRecord::read_csv(csv.as_slice(), 1.0).unwrap(), record);
}

#[test]
fn malformed_counts_report_position() {
    let text = "setting_label,raw_count,accidental_count\nHH,12,0\nHV,twelve,0\n";
    let e = TomographyRecord::read_csv(text.as_bytes(), 1.0).unwrap_err().to_string();
    assert!(e.contains("line 3"), "{e}");
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    let mut config = RunConfig {
        seed: u64::MAX - 3,
        ..RunConfig::default()
    };
    config.source.pump_power_mw = 35.0;
    std::fs::write(&path, config.dump().unwrap()).unwrap();
    assert_eq!(load_config(&path).unwrap(), config);
    assert!(load_config(&dir.path().join("missing.toml")).is_err());
}
