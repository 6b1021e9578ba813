use chrono::NaiveDate;
use tempfile::TempDir;

use super::*;
use crate::synth::prepare_fixture;

fn fixture_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (obs, stations) = prepare_fixture();
    fs::write(dir.path().join("obs.csv"), obs).unwrap();
    fs::write(dir.path().join("stations.csv"), stations).unwrap();
    dir
}

fn prepare_cfg(dir: &Path) -> PrepareConfig {
    PrepareConfig {
        report_out: Some(dir.join("ingest.json")),
        ..PrepareConfig::new(dir.join("obs.csv"), dir.join("stations.csv"), dir.join("features.csv"))
    }
}

#[test]
fn prepare_fixture_counts() {
    let dir = fixture_dir();
    let report = cmd_prepare(&prepare_cfg(dir.path())).unwrap();
    assert_eq!((report.input_rows, report.container, report.merged, report.proximity, report.retained), (12, 2, 1, 1, 8));
    assert!(report.reconciles());
    let rows = ingest::parse_features(&dir.path().join("features.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ingest.json")).unwrap()).unwrap();
    assert_eq!(json["merged"], 1);
}

#[test]
fn prepare_is_byte_identical_on_rerun() {
    let dir = fixture_dir();
    let cfg = prepare_cfg(dir.path());
    cmd_prepare(&cfg).unwrap();
    let first = fs::read(&cfg.features_out).unwrap();
    cmd_prepare(&cfg).unwrap();
    assert_eq!(fs::read(&cfg.features_out).unwrap(), first);
}

#[test]
fn prepare_names_the_rule_that_emptied_the_data() {
    let dir = fixture_dir();
    let only_containers: String = prepare_fixture()
        .0
        .lines()
        .enumerate()
        .filter(|(i, l)| *i == 0 || l.contains("container"))
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    fs::write(dir.path().join("obs.csv"), only_containers).unwrap();
    match cmd_prepare(&prepare_cfg(dir.path())) {
        Err(Error::Data(m)) => assert!(m.contains("container"), "{m}"),
        other => panic!("expected data error, got {other:?}"),
    }

    let dir = fixture_dir();
    let cfg = PrepareConfig {
        max_km: 0.5,
        ..prepare_cfg(dir.path())
    };
    match cmd_prepare(&cfg) {
        Err(Error::Data(m)) => assert!(m.contains("proximity"), "{m}"),
        other => panic!("expected data error, got {other:?}"),
    }
    let bad = PrepareConfig {
        max_km: -1.0,
        ..prepare_cfg(dir.path())
    };
    assert!(matches!(cmd_prepare(&bad), Err(Error::Config(_))));
}

fn row(id: &str, date: &str) -> FeatureRow {
    FeatureRow {
        location_id: id.into(),
        date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
        tmean_c: 20.0,
        tmax_c: 25.0,
        tmin_c: 15.0,
        precip_days: 5.0,
        precip_mm: 2.0,
        elevation_m: 100.0,
        larvae_count: 1,
    }
}

#[test]
fn split_holds_out_the_oldest_rows() {
    let rows = vec![
        row("b", "2020-05-01"),
        row("a", "2019-01-01"),
        row("c", "2020-05-01"),
        row("a", "2020-05-01"),
        row("z", "2018-07-04"),
    ];
    let (train, val) = chronological_split(rows.clone(), 2).unwrap();
    let ids = |v: &[FeatureRow]| v.iter().map(|r| r.location_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&val), ["z", "a"]);
    assert_eq!(ids(&train), ["a", "b", "c"]);
    assert!(matches!(chronological_split(rows.clone(), 5), Err(Error::Config(_))));
    assert_eq!(chronological_split(rows, 0).unwrap().1.len(), 0);
}

#[test]
fn training_set_below_batch_size_is_a_config_error() {
    let dir = fixture_dir();
    cmd_prepare(&prepare_cfg(dir.path())).unwrap();
    let cfg = TrainAbundanceConfig {
        holdout_oldest: 7,
        ..TrainAbundanceConfig::new(dir.path().join("features.csv"), dir.path().join("m.json"), 1)
    };
    assert!(matches!(cmd_train_abundance(&cfg), Err(Error::Config(_))));
}

#[test]
fn percent_change_examples() {
    assert_eq!(percent_change(200.0, 300.0), Some(50.0));
    assert_eq!(percent_change(42.0, 42.0), Some(0.0));
    assert_eq!(percent_change(0.0, 5.0), None);
}

fn projection(region: &str, year: i32, abundance: f64) -> AbundanceProjection {
    AbundanceProjection {
        region_id: region.into(),
        year,
        log10_abundance: (abundance + 1.0).log10(),
        abundance,
        features: [20.0, 27.0, 13.0, 6.0, 2.5, 800.0],
    }
}

#[test]
fn report_flags_undefined_change_and_unmatched_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let rows = [
        projection("A", 2030, 200.0),
        projection("A", 2050, 300.0),
        projection("B", 2030, 0.0),
        projection("B", 2050, 4.0),
        projection("C", 2030, 10.0),
        projection("C", 2050, 10.0),
    ];
    write_file(&p("proj.csv"), projections_csv(&rows).unwrap()).unwrap();
    let geometry = serde_json::json!({
        "type": "FeatureCollection",
        "features": [
            { "type": "Feature", "properties": { "name": "A", "pop": 3 },
              "geometry": { "type": "Point", "coordinates": [-100.25, 35.125] } },
            { "type": "Feature", "properties": { "name": "Q" },
              "geometry": { "type": "Point", "coordinates": [1, 2] } },
            { "type": "Feature", "properties": { "name": "B" }, "geometry": null }
        ]
    });
    fs::write(p("in.geojson"), geometry.to_string()).unwrap();
    let cfg = ReportConfig {
        geometry: Some(p("in.geojson")),
        geometry_out: Some(p("out.geojson")),
        region_key: "name".into(),
        ..ReportConfig::new(p("proj.csv"), p("choropleth.csv"), p("change.csv"))
    };
    let outcome = cmd_report(&cfg).unwrap();
    assert_eq!(outcome.changes[0].percent, Some(50.0));
    assert_eq!(outcome.changes[2].percent, Some(0.0));
    assert_eq!(outcome.undefined, ["B"]);
    assert_eq!(outcome.unmatched_regions, ["C"]);
    assert_eq!(outcome.unmatched_features, ["Q"]);

    let change = fs::read_to_string(p("change.csv")).unwrap();
    assert!(change.contains("B,2030,2050,0,4,,undefined change"), "{change}");
    let choropleth = fs::read_to_string(p("choropleth.csv")).unwrap();
    assert_eq!(choropleth.lines().next().unwrap(), "region_id,log10_abundance,abundance");
    assert_eq!(choropleth.lines().count(), 4);

    let merged: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("out.geojson")).unwrap()).unwrap();
    assert_eq!(merged["features"][0]["geometry"], geometry["features"][0]["geometry"]);
    assert_eq!(merged["features"][0]["properties"]["abundance"], 300.0);
    assert_eq!(merged["features"][0]["properties"]["pop"], 3);
    assert_eq!(merged["features"][1]["properties"], geometry["features"][1]["properties"]);
    assert!(merged["features"][2]["properties"]["percent_change"].is_null());
}

#[test]
fn report_requires_both_years() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    write_file(&p("proj.csv"), projections_csv(&[projection("A", 2050, 3.0)]).unwrap()).unwrap();
    let cfg = ReportConfig::new(p("proj.csv"), p("c.csv"), p("d.csv"));
    assert!(matches!(cmd_report(&cfg), Err(Error::Data(m)) if m.contains("2030")));
}

#[test]
fn projections_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let rows = vec![projection("A", 2050, 1.0 / 3.0), projection("B", 2050, 12345.678)];
    write_file(&path, projections_csv(&rows).unwrap()).unwrap();
    assert_eq!(read_projections(&path).unwrap(), rows);
}
