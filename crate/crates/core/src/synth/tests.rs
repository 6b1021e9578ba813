use super::*;
use crate::ingest::{clean_and_join, read_observations, read_series, read_stations, VariableKind};
use crate::preprocess::log_transform;
use crate::stats::pearson_r;

#[test]
fn generation_is_deterministic() {
    assert_eq!(SyntheticDataset::generate(5), SyntheticDataset::generate(5));
    assert_ne!(SyntheticDataset::generate(5).observations, SyntheticDataset::generate(6).observations);
}

#[test]
fn fixture_exercises_each_rule_once() {
    let (obs, stations) = prepare_fixture();
    let obs = read_observations(obs.as_bytes(), "obs").unwrap();
    let stations = read_stations(stations.as_bytes(), "stations").unwrap();
    assert_eq!(obs.len(), 12);
    let (rows, report) = clean_and_join(obs, &stations, 48.28).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!((report.container, report.merged, report.proximity, report.retained), (2, 1, 1, 8));
    assert!(report.reconciles());
    let merged = rows.iter().find(|r| r.location_id == "C").unwrap();
    assert_eq!(merged.larvae_count, 200);
}

#[test]
fn dataset_parses_and_plants_the_signal() {
    let ds = SyntheticDataset::generate(DEFAULT_SEED);
    let obs = read_observations(ds.observations.as_bytes(), "obs").unwrap();
    let stations = read_stations(ds.stations.as_bytes(), "stations").unwrap();
    let (rows, report) = clean_and_join(obs, &stations, 48.28).unwrap();
    assert!(report.reconciles());
    assert_eq!(report.container, 12);
    assert_eq!(report.proximity, 6);
    assert!(report.merged > 0);
    assert_eq!(rows.len(), 12 * 4 * 5);

    let planted: Vec<f64> = rows.iter().map(|r| planted_log_count(&r.features())).collect();
    let observed: Vec<f64> = rows.iter().map(|r| log_transform(r.larvae_count as f64).unwrap()).collect();
    let r = pearson_r(&planted, &observed).unwrap();
    assert!(r > 0.9, "planted signal correlation {r}");

    let series = read_series(ds.series.as_bytes(), "series", false).unwrap();
    assert_eq!(series.len(), 6 * 4);
    for s in &series {
        assert_eq!((s.start_year(), s.end_year()), (FIRST_SERIES_YEAR, LAST_SERIES_YEAR));
        if s.variable() == VariableKind::SummerPrecip {
            assert!(s.values().iter().all(|v| *v > 0.0));
        }
    }
}
