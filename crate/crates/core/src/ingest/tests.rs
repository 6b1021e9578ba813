use proptest::prelude::*;

use super::*;

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

fn obs(loc: &str, d: &str, source: WaterSource, count: u64) -> LarvaeObservation {
    LarvaeObservation {
        location_id: loc.into(),
        position: LatLon { lat: 35.0, lon: -100.0 },
        date: date(d),
        water_source: source,
        larvae_count: count,
    }
}

fn station(id: &str, lat: f64, lon: f64, month: &str) -> StationRecord {
    StationRecord {
        station_id: id.into(),
        position: LatLon { lat, lon },
        month: month.parse().unwrap(),
        tmean_c: 25.0,
        tmax_c: 31.0,
        tmin_c: 19.0,
        precip_days: 6.0,
        precip_mm: 2.5,
        elevation_m: 300.0,
    }
}

#[test]
fn header_only_file_is_empty() {
    let csv = "location_id,latitude,longitude,date,water_source,larvae_count\n";
    assert!(read_observations(csv.as_bytes(), "obs").unwrap().is_empty());
}

#[test]
fn parses_container_variant() {
    let csv = "location_id,latitude,longitude,date,water_source,larvae_count\n\
               a,10.5,-70.25,2020-06-01,container,12\n";
    let rows = read_observations(csv.as_bytes(), "obs").unwrap();
    assert_eq!(rows[0].water_source, WaterSource::Container);
    assert_eq!(rows[0].larvae_count, 12);
    assert_eq!(rows[0].date, date("2020-06-01"));
}

#[test]
fn latitude_out_of_range_names_row() {
    let csv = "location_id,latitude,longitude,date,water_source,larvae_count\n\
               a,10,10,2020-06-01,still,1\n\
               b,95,10,2020-06-01,still,1\n";
    match read_observations(csv.as_bytes(), "obs.csv").unwrap_err() {
        Error::Parse { line, field, .. } => {
            assert_eq!(line, 3);
            assert_eq!(field, "latitude");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_column_and_bad_values_are_reported() {
    let csv = "location_id,latitude,date,water_source,larvae_count\n";
    assert!(matches!(
        read_observations(csv.as_bytes(), "obs").unwrap_err(),
        Error::Parse { ref field, .. } if field == "longitude"
    ));
    let csv = "location_id,latitude,longitude,date,water_source,larvae_count\n\
               a,10,10,2020-13-01,still,1\n";
    assert!(matches!(
        read_observations(csv.as_bytes(), "obs").unwrap_err(),
        Error::Parse { ref field, line: 2, .. } if field == "date"
    ));
    let csv = "location_id,latitude,longitude,date,water_source,larvae_count\n\
               a,10,10,2020-01-01,puddle,1\n";
    assert!(read_observations(csv.as_bytes(), "obs").is_err());
    let csv = "location_id,latitude,longitude,date,water_source,larvae_count\n\
               a,10,10,2020-01-01,still,-4\n";
    assert!(read_observations(csv.as_bytes(), "obs").is_err());
}

#[test]
fn station_temperature_ordering_is_enforced() {
    let header = STATION_COLUMNS.join(",");
    let good = format!("{header}\ns1,30,-90,2020-07,25,31,19,6,2.5,120\n");
    let rows = read_stations(good.as_bytes(), "st").unwrap();
    assert_eq!(rows[0].month, YearMonth { year: 2020, month: 7 });
    let bad = format!("{header}\ns1,30,-90,2020-07,35,31,19,6,2.5,120\n");
    assert!(matches!(read_stations(bad.as_bytes(), "st"), Err(Error::Parse { line: 2, .. })));
    let bad = format!("{header}\ns1,30,-90,2020-07,25,31,19,40,2.5,120\n");
    assert!(matches!(
        read_stations(bad.as_bytes(), "st"),
        Err(Error::Parse { ref field, .. }) if field == "precip_days"
    ));
}

#[test]
fn series_are_grouped_and_checked_for_gaps() {
    let csv = "region_id,variable,year,value\n\
               b,summer_tmean,1980,2\n\
               a,summer_precip,1979,5\n\
               b,summer_tmean,1979,1\n";
    let s = read_series(csv.as_bytes(), "series", false).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].region_id(), "a");
    assert_eq!(s[1].values(), &[1.0, 2.0]);
    assert_eq!(s[1].start_year(), 1979);
    assert_eq!(s[1].end_year(), 1980);

    let gap = "region_id,variable,year,value\nb,summer_tmean,1979,1\nb,summer_tmean,1981,2\n";
    assert!(matches!(
        read_series(gap.as_bytes(), "series", false),
        Err(Error::Parse { line: 3, .. })
    ));
    let derived = "region_id,variable,year,value\nb,precip_days,1979,1\n";
    assert!(read_series(derived.as_bytes(), "series", false).is_err());
    assert!(read_series(derived.as_bytes(), "series", true).is_ok());
}

#[test]
fn container_filter() {
    let input = vec![
        obs("a", "2020-01-01", WaterSource::Still, 1),
        obs("b", "2020-01-01", WaterSource::Container, 1),
        obs("c", "2020-01-01", WaterSource::Flowing, 1),
    ];
    let (kept, removed) = filter_container_sources(input.clone());
    assert_eq!(removed, 1);
    assert_eq!(kept.iter().map(|o| o.location_id.as_str()).collect::<Vec<_>>(), ["a", "c"]);

    let all: Vec<_> = (0..3).map(|_| obs("x", "2020-01-01", WaterSource::Container, 1)).collect();
    assert!(filter_container_sources(all).0.is_empty());

    let none = vec![input[0].clone(), input[2].clone()];
    assert_eq!(filter_container_sources(none.clone()).0, none);
}

#[test]
fn merge_sums_same_site_same_day() {
    let (merged, absorbed) = merge_duplicates(vec![
        obs("a", "2020-01-01", WaterSource::Still, 10),
        obs("a", "2020-01-01", WaterSource::Still, 20),
    ]);
    assert_eq!(absorbed, 1);
    assert_eq!(merged.len(), 1);
    assert_eq!(merged[0].larvae_count, 30);

    let (merged, absorbed) = merge_duplicates(vec![
        obs("a", "2020-01-02", WaterSource::Still, 1),
        obs("a", "2020-01-01", WaterSource::Still, 2),
    ]);
    assert_eq!(absorbed, 0);
    assert_eq!(merged[0].date, date("2020-01-01"));

    let single = vec![obs("z", "2021-05-05", WaterSource::Flowing, 3)];
    assert_eq!(merge_duplicates(single.clone()).0, single);
}

#[test]
fn haversine_examples() {
    let a = LatLon { lat: 12.0, lon: 34.0 };
    assert_eq!(haversine_km(a, a).unwrap(), 0.0);
    let d = haversine_km(LatLon { lat: 0.0, lon: 0.0 }, LatLon { lat: 0.0, lon: 90.0 }).unwrap();
    let quarter = std::f64::consts::FRAC_PI_2 * 6371.0;
    assert!((d - quarter).abs() < 1e-9, "{d}");
    assert!((d - 10007.5).abs() < 0.1);
    assert!(haversine_km(LatLon { lat: 91.0, lon: 0.0 }, a).is_err());
}

proptest! {
    #[test]
    fn haversine_is_symmetric(
        la in -90f64..=90.0, lo in -180f64..=180.0,
        lb in -90f64..=90.0, lob in -180f64..=180.0,
    ) {
        let a = LatLon { lat: la, lon: lo };
        let b = LatLon { lat: lb, lon: lob };
        prop_assert_eq!(haversine_km(a, b).unwrap(), haversine_km(b, a).unwrap());
    }
}

/// Offsets `km` due north of (35, -100).
fn north_of_origin(km: f64) -> (f64, f64) {
    (35.0 + (km / 6371.0).to_degrees(), -100.0)
}

#[test]
fn joins_station_within_radius() {
    let (lat, lon) = north_of_origin(10.0);
    let out = join_nearest_station(
        &[obs("a", "2020-07-15", WaterSource::Still, 5)],
        &[station("s1", lat, lon, "2020-07")],
        DEFAULT_MAX_STATION_KM,
    )
    .unwrap();
    assert_eq!(out.rows.len(), 1);
    assert_eq!(out.rows[0].tmean_c, 25.0);
    assert_eq!(out.rows[0].larvae_count, 5);
}

#[test]
fn excludes_remote_observation() {
    let (lat, lon) = north_of_origin(60.0);
    let out = join_nearest_station(
        &[obs("a", "2020-07-15", WaterSource::Still, 5)],
        &[station("s1", lat, lon, "2020-07")],
        DEFAULT_MAX_STATION_KM,
    )
    .unwrap();
    assert!(out.rows.is_empty());
    assert_eq!(out.excluded.len(), 1);
}

#[test]
fn requires_matching_month() {
    let (lat, lon) = north_of_origin(1.0);
    let out = join_nearest_station(
        &[obs("a", "2020-07-15", WaterSource::Still, 5)],
        &[station("s1", lat, lon, "2020-08")],
        DEFAULT_MAX_STATION_KM,
    )
    .unwrap();
    assert_eq!(out.excluded.len(), 1);
}

#[test]
fn joins_the_nearest_station() {
    let (la, lo) = north_of_origin(20.0);
    let (lb, lob) = north_of_origin(5.0);
    let mut far = station("far", la, lo, "2020-07");
    far.tmean_c = 10.0;
    let mut near = station("near", lb, lob, "2020-07");
    near.tmean_c = 20.0;
    let o = [obs("a", "2020-07-15", WaterSource::Still, 5)];
    let a = join_nearest_station(&o, &[far.clone(), near.clone()], DEFAULT_MAX_STATION_KM).unwrap();
    let b = join_nearest_station(&o, &[near, far], DEFAULT_MAX_STATION_KM).unwrap();
    assert_eq!(a.rows[0].tmean_c, 20.0);
    assert_eq!(a, b);
}

#[test]
fn join_rejects_nonpositive_radius() {
    assert!(matches!(join_nearest_station(&[], &[], 0.0), Err(Error::Config(_))));
}

#[test]
fn clean_and_join_reconciles() {
    let (lat, lon) = north_of_origin(3.0);
    let mut remote = obs("r", "2020-07-01", WaterSource::Still, 4);
    remote.position = LatLon { lat: 10.0, lon: 10.0 };
    let input = vec![
        obs("a", "2020-07-01", WaterSource::Still, 1),
        obs("a", "2020-07-01", WaterSource::Still, 2),
        obs("b", "2020-07-01", WaterSource::Container, 9),
        remote,
        obs("c", "2020-07-02", WaterSource::Flowing, 3),
    ];
    let (rows, report) = clean_and_join(input, &[station("s", lat, lon, "2020-07")], 48.28).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(
        report,
        IngestionReport {
            input_rows: 5,
            container: 1,
            merged: 1,
            proximity: 1,
            retained: 2
        }
    );
    assert!(report.reconciles());
}

#[test]
fn feature_csv_round_trip() {
    let rows = vec![FeatureRow {
        location_id: "loc,1".into(),
        date: date("2019-08-03"),
        tmean_c: 24.123456789012345,
        tmax_c: 30.1,
        tmin_c: 18.0,
        precip_days: 7.0,
        precip_mm: 0.1 + 0.2,
        elevation_m: 1234.5,
        larvae_count: 42,
    }];
    let mut buf = Vec::new();
    write_features(&mut buf, &rows).unwrap();
    assert_eq!(read_features(buf.as_slice(), "f").unwrap(), rows);
}

#[test]
fn summer_average_examples() {
    let daily: Vec<(NaiveDate, f64)> = (0..365)
        .map(|d| (date("2010-01-01") + chrono::Days::new(d), 4.5))
        .collect();
    assert_eq!(summer_average(&daily, 2010).unwrap(), 4.5);

    let outside = vec![(date("2010-01-05"), 1.0), (date("2010-12-01"), 2.0)];
    match summer_average(&outside, 2010).unwrap_err() {
        Error::Data(msg) => assert!(msg.contains("2010")),
        other => panic!("{other:?}"),
    }

    // Ramp over June 22 .. September 22 (93 days): mean is the middle value.
    let start = date("2011-06-22");
    let ramp: Vec<(NaiveDate, f64)> = (0..93)
        .map(|d| (start + chrono::Days::new(d), d as f64))
        .collect();
    assert_eq!(ramp.last().unwrap().0, date("2011-09-22"));
    assert_eq!(summer_average(&ramp, 2011).unwrap(), 46.0);
}
