//! Visit-corpus ingestion: CSV parsing, itinerary preprocessing, corpus
//! profiling and the on-disk corpus bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::haversine_km;
use crate::model::{Itinerary, Level, Poi, PoiCatalog, PoiId};

pub const DEFAULT_MIN_LEN: usize = 3;
pub const DEFAULT_WINDOW: usize = 21;

/// Maps logical fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisitSchema {
    pub user_id: String,
    pub poi_id: String,
    pub timestamp: String,
    pub seq_id: String,
    pub category: String,
    pub lat: String,
    pub lon: String,
    /// `,` or `;`
    pub delimiter: char,
}

impl Default for VisitSchema {
    fn default() -> Self {
        VisitSchema {
            user_id: "user_id".into(),
            poi_id: "poi_id".into(),
            timestamp: "timestamp".into(),
            seq_id: "seq_id".into(),
            category: "category".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            delimiter: ',',
        }
    }
}

impl VisitSchema {
    /// Parses `field=column` pairs separated by commas, e.g.
    /// `user_id=userID,poi_id=poiID,delimiter=semicolon`. Unmentioned fields
    /// keep their default column names.
    pub fn parse_inline(spec: &str) -> Result<Self> {
        let mut schema = VisitSchema::default();
        for pair in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("expected field=column, got {pair:?}")))?;
            let value = value.trim().to_string();
            match key.trim() {
                "user_id" => schema.user_id = value,
                "poi_id" => schema.poi_id = value,
                "timestamp" => schema.timestamp = value,
                "seq_id" => schema.seq_id = value,
                "category" => schema.category = value,
                "lat" => schema.lat = value,
                "lon" => schema.lon = value,
                "delimiter" => {
                    schema.delimiter = match value.as_str() {
                        "," | "comma" => ',',
                        ";" | "semicolon" => ';',
                        other => {
                            return Err(Error::Schema(format!("unsupported delimiter {other:?}")))
                        }
                    }
                }
                other => return Err(Error::Schema(format!("unknown schema field {other:?}"))),
            }
        }
        Ok(schema)
    }

    /// Loads a schema from a TOML or JSON file, or parses `spec` inline when
    /// it is not an existing path.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if !path.is_file() {
            return Self::parse_inline(spec);
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: VisitSchema = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?
        };
        if schema.delimiter != ',' && schema.delimiter != ';' {
            return Err(Error::Schema(format!(
                "unsupported delimiter {:?}",
                schema.delimiter
            )));
        }
        Ok(schema)
    }
}

/// A CSV row that did not make it into the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectRow {
    /// 1-based line number in the input file (header is line 1).
    pub line: u64,
    pub reason: String,
    pub raw: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ParsedVisits {
    pub pois: PoiCatalog,
    pub itineraries: Vec<Itinerary>,
    pub rejects: Vec<RejectRow>,
}

struct Visit {
    user: String,
    seq: String,
    timestamp: f64,
    row: u64,
    poi: PoiId,
}

/// Reads a visit CSV into POIs and itineraries.
///
/// One itinerary per `(user_id, seq_id)`, ordered by timestamp (file order
/// breaks ties). A POI's `visit_freq` is the number of distinct
/// `(user_id, seq_id)` sequences that contain it. The first valid row for a
/// POI fixes its category and coordinates.
pub fn parse_visits(path: &Path, schema: &VisitSchema) -> Result<ParsedVisits> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    };
    let idx_user = column(&schema.user_id)?;
    let idx_poi = column(&schema.poi_id)?;
    let idx_ts = column(&schema.timestamp)?;
    let idx_seq = column(&schema.seq_id)?;
    let idx_cat = column(&schema.category)?;
    let idx_lat = column(&schema.lat)?;
    let idx_lon = column(&schema.lon)?;

    let mut rejects = Vec::new();
    let mut visits = Vec::new();
    let mut attrs: BTreeMap<PoiId, (String, f64, f64)> = BTreeMap::new();

    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejects.push(RejectRow {
                    line,
                    reason: format!("malformed row: {e}"),
                    raw: Vec::new(),
                });
                continue;
            }
        };
        let raw: Vec<String> = record.iter().map(str::to_string).collect();
        let mut reject = |reason: &str| {
            rejects.push(RejectRow {
                line,
                reason: reason.to_string(),
                raw: raw.clone(),
            })
        };
        let field = |i: usize| record.get(i).unwrap_or("");
        let (user, poi, ts, seq, cat) = (
            field(idx_user),
            field(idx_poi),
            field(idx_ts),
            field(idx_seq),
            field(idx_cat),
        );
        if user.is_empty() || poi.is_empty() || seq.is_empty() || ts.is_empty() {
            reject("missing value");
            continue;
        }
        if cat.is_empty() {
            reject("empty category");
            continue;
        }
        let (Ok(lat), Ok(lon)) = (field(idx_lat).parse::<f64>(), field(idx_lon).parse::<f64>())
        else {
            reject("unparseable coordinate");
            continue;
        };
        if !lat.is_finite() || !lon.is_finite() {
            reject("unparseable coordinate");
            continue;
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            reject("coordinate out of range");
            continue;
        }
        let Ok(timestamp) = ts.parse::<f64>() else {
            reject("unparseable timestamp");
            continue;
        };
        let poi_id = PoiId::from(poi);
        attrs
            .entry(poi_id.clone())
            .or_insert_with(|| (cat.to_string(), lat, lon));
        visits.push(Visit {
            user: user.to_string(),
            seq: seq.to_string(),
            timestamp,
            row: line,
            poi: poi_id,
        });
    }

    if visits.is_empty() {
        return Err(Error::Corpus(format!(
            "{}: no valid rows ({} rejected)",
            path.display(),
            rejects.len()
        )));
    }

    let mut groups: BTreeMap<(String, String), Vec<Visit>> = BTreeMap::new();
    for v in visits {
        groups
            .entry((v.user.clone(), v.seq.clone()))
            .or_default()
            .push(v);
    }

    let mut freq: BTreeMap<&PoiId, u64> = BTreeMap::new();
    for group in groups.values() {
        let distinct: BTreeSet<&PoiId> = group.iter().map(|v| &v.poi).collect();
        for id in distinct {
            *freq.entry(id).or_default() += 1;
        }
    }

    let pois: PoiCatalog = attrs
        .iter()
        .map(|(id, (cat, lat, lon))| {
            let poi = Poi {
                id: id.clone(),
                category: cat.clone(),
                lat: *lat,
                lon: *lon,
                visit_freq: freq.get(id).copied().unwrap_or(0),
            };
            (id.clone(), poi)
        })
        .collect();

    let itineraries = groups
        .into_iter()
        .map(|((user, seq), mut group)| {
            group.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.row.cmp(&b.row)));
            let seq_pois = group.iter().map(|v| pois[&v.poi].clone()).collect();
            Itinerary::new(seq, user, seq_pois)
        })
        .collect();

    Ok(ParsedVisits {
        pois,
        itineraries,
        rejects,
    })
}

/// Drops itineraries shorter than `min_len` and splits longer-than-`window`
/// ones into consecutive non-overlapping chunks of `window` POIs. A final
/// remainder is kept when it has at least `min_len` POIs. Split chunks get
/// `#k` appended to their seq id.
pub fn preprocess(
    itineraries: &[Itinerary],
    min_len: usize,
    window: usize,
) -> Result<Vec<Itinerary>> {
    if min_len < DEFAULT_MIN_LEN {
        return Err(Error::Parameter(format!("min_len {min_len} < 3")));
    }
    if window < min_len {
        return Err(Error::Parameter(format!(
            "window {window} < min_len {min_len}"
        )));
    }
    let mut out = Vec::with_capacity(itineraries.len());
    for it in itineraries {
        if it.len() < min_len {
            continue;
        }
        if it.len() <= window {
            out.push(it.clone());
            continue;
        }
        for (k, chunk) in it.pois.chunks(window).enumerate() {
            if chunk.len() >= min_len {
                out.push(Itinerary::new(
                    format!("{}#{k}", it.seq_id),
                    it.user_id.clone(),
                    chunk.to_vec(),
                ));
            }
        }
    }
    Ok(out)
}

/// Corpus-relative level thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusProfile {
    pub source_corpus: String,
    pub n_pois: usize,
    pub n_itineraries: usize,
    /// Visit-frequency cut points `[t1, t2]`.
    pub pop_thresholds: [u64; 2],
    /// Segment-distance cut points `[d1, d2]` in kilometres.
    pub dist_thresholds: [f64; 2],
}

/// `v ≤ t1 → LOW`, `t1 < v ≤ t2 → MEDIUM`, `v > t2 → HIGH`.
///
/// When the cut points coincide the middle bucket is the single value
/// `t1 = t2`, so a constant-valued corpus lands entirely in MEDIUM.
pub fn bin_level<T: PartialOrd>(value: T, t1: T, t2: T) -> Level {
    if t1 == t2 {
        return if value < t1 {
            Level::Low
        } else if value > t2 {
            Level::High
        } else {
            Level::Medium
        };
    }
    if value <= t1 {
        Level::Low
    } else if value <= t2 {
        Level::Medium
    } else {
        Level::High
    }
}

impl CorpusProfile {
    pub fn popularity_level(&self, poi: &Poi) -> Level {
        let [t1, t2] = self.pop_thresholds;
        bin_level(poi.visit_freq, t1, t2)
    }

    pub fn distance_level(&self, km: f64) -> Level {
        let [d1, d2] = self.dist_thresholds;
        bin_level(km, d1, d2)
    }
}

/// Nearest-rank tertile cut points of a sorted sample: the values at ranks
/// `⌈N/3⌉` and `⌈2N/3⌉` (1-based).
pub fn tertiles<T: Copy>(sorted: &[T]) -> Option<[T; 2]> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let rank = |k: usize| (k * n).div_ceil(3).max(1);
    Some([sorted[rank(1) - 1], sorted[rank(2) - 1]])
}

/// Haversine lengths of all successive POI pairs, itinerary by itinerary.
pub fn segment_distances(itineraries: &[Itinerary]) -> Vec<f64> {
    itineraries
        .par_iter()
        .map(|it| {
            it.pois
                .windows(2)
                .map(|w| haversine_km(w[0].coords(), w[1].coords()))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

pub fn profile_corpus(
    name: &str,
    pois: &PoiCatalog,
    itineraries: &[Itinerary],
) -> Result<CorpusProfile> {
    if let Some(short) = itineraries.iter().find(|it| it.len() < 2) {
        return Err(Error::Domain(format!(
            "itinerary {} has fewer than 2 POIs",
            short.seq_id
        )));
    }
    let mut distances = segment_distances(itineraries);
    distances.sort_by(f64::total_cmp);
    let mut distinct = distances.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateProfile(format!(
            "only {} distinct segment distances",
            distinct.len()
        )));
    }
    let mut freqs: Vec<u64> = pois.values().map(|p| p.visit_freq).collect();
    freqs.sort_unstable();
    let pop_thresholds =
        tertiles(&freqs).ok_or_else(|| Error::DegenerateProfile("corpus has no POIs".into()))?;
    let dist_thresholds = tertiles(&distances).expect("non-empty after distinct check");
    Ok(CorpusProfile {
        source_corpus: name.to_string(),
        n_pois: pois.len(),
        n_itineraries: itineraries.len(),
        pop_thresholds,
        dist_thresholds,
    })
}

#[derive(Serialize, Deserialize)]
struct ItineraryRow {
    seq_id: String,
    user_id: String,
    pois: Vec<PoiId>,
}

/// A corpus bundle directory: `pois.json`, `itineraries.jsonl`, `profile.json`.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    pub pois: PoiCatalog,
    pub itineraries: Vec<Itinerary>,
    pub profile: CorpusProfile,
}

impl Corpus {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let pois: Vec<&Poi> = self.pois.values().collect();
        write_json(&dir.join("pois.json"), &pois)?;
        write_json(&dir.join("profile.json"), &self.profile)?;
        let rows = self.itineraries.iter().map(|it| ItineraryRow {
            seq_id: it.seq_id.clone(),
            user_id: it.user_id.clone(),
            pois: it.ids(),
        });
        write_jsonl(&dir.join("itineraries.jsonl"), rows)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let pois: Vec<Poi> = read_json(&dir.join("pois.json"))?;
        for poi in &pois {
            poi.validate()?;
        }
        let pois: PoiCatalog = pois.into_iter().map(|p| (p.id.clone(), p)).collect();
        let profile: CorpusProfile = read_json(&dir.join("profile.json"))?;
        let rows: Vec<ItineraryRow> = read_jsonl(&dir.join("itineraries.jsonl"))?;
        let itineraries = rows
            .into_iter()
            .map(|row| Itinerary::resolve(row.seq_id, row.user_id, &row.pois, &pois))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            name: profile.source_corpus.clone(),
            pois,
            itineraries,
            profile,
        })
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "user_id,poi_id,timestamp,seq_id,category,lat,lon\n";

    #[test]
    fn orders_by_timestamp() {
        let f = write_csv(&format!(
            "{HEADER}u1,c,30,s1,park,1.0,1.0\nu1,a,10,s1,museum,0.0,0.0\nu1,b,20,s1,park,0.5,0.5\n"
        ));
        let parsed = parse_visits(f.path(), &VisitSchema::default()).unwrap();
        assert_eq!(parsed.itineraries.len(), 1);
        let ids: Vec<_> = parsed.itineraries[0].ids();
        assert_eq!(ids, vec![PoiId::from("a"), "b".into(), "c".into()]);
        assert!(parsed.rejects.is_empty());
    }

    #[test]
    fn visit_freq_counts_distinct_sequences() {
        let mut rows = String::from(HEADER);
        // p visited in 4 distinct (user, seq) sequences, twice in one of them
        for (user, seq) in [
            ("u1", "s1"),
            ("u1", "s2"),
            ("u2", "s1"),
            ("u3", "s9"),
            ("u3", "s9"),
        ] {
            rows.push_str(&format!("{user},p,1,{seq},park,1.0,2.0\n"));
        }
        rows.push_str("u1,q,2,s1,park,1.0,2.5\n");
        let f = write_csv(&rows);
        let parsed = parse_visits(f.path(), &VisitSchema::default()).unwrap();
        let lines: Vec<(&str, &str)> = rows
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(1) == Some("p"))
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                (cols[0], cols[3])
            })
            .collect();
        let brute: BTreeSet<_> = lines.into_iter().collect();
        assert_eq!(
            parsed.pois[&PoiId::from("p")].visit_freq,
            brute.len() as u64
        );
        assert_eq!(parsed.pois[&PoiId::from("p")].visit_freq, 4);
        assert_eq!(parsed.pois[&PoiId::from("q")].visit_freq, 1);
    }

    #[test]
    fn rejects_bad_rows() {
        let f = write_csv(&format!(
            "{HEADER}u1,a,1,s1,park,200,0\nu1,b,2,s1,park,abc,0\nu1,c,x,s1,park,0,0\nu1,d,3,s1,park,0,0\n"
        ));
        let parsed = parse_visits(f.path(), &VisitSchema::default()).unwrap();
        let reasons: Vec<_> = parsed.rejects.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(
            reasons,
            [
                "coordinate out of range",
                "unparseable coordinate",
                "unparseable timestamp"
            ]
        );
        assert_eq!(parsed.rejects[0].line, 2);
        assert_eq!(parsed.pois.len(), 1);
    }

    #[test]
    fn schema_and_corpus_errors() {
        let f = write_csv("user_id,poi_id\nu,p\n");
        assert!(matches!(
            parse_visits(f.path(), &VisitSchema::default()),
            Err(Error::Schema(_))
        ));
        let f = write_csv(&format!("{HEADER}u1,a,1,s1,park,100,0\n"));
        assert!(matches!(
            parse_visits(f.path(), &VisitSchema::default()),
            Err(Error::Corpus(_))
        ));
    }

    #[test]
    fn semicolon_schema_mapping() {
        let schema = VisitSchema::parse_inline(
            "user_id=userID,poi_id=poiID,seq_id=seqID,delimiter=semicolon",
        )
        .unwrap();
        let f = write_csv(
            "userID;poiID;timestamp;seqID;category;lat;lon\nu;a;1;s;park;0;0\nu;b;2;s;zoo;0;1\n",
        );
        let parsed = parse_visits(f.path(), &schema).unwrap();
        assert_eq!(parsed.itineraries[0].len(), 2);
        assert!(VisitSchema::parse_inline("colour=x").is_err());
        assert!(VisitSchema::parse_inline("delimiter=tab").is_err());
    }

    fn itin_of_len(seq: &str, n: usize) -> Itinerary {
        let pois = (0..n)
            .map(|k| Poi::new(format!("p{k}"), "park", 0.0, k as f64 * 0.01, 1).unwrap())
            .collect();
        Itinerary::new(seq, "u", pois)
    }

    #[test]
    fn preprocess_examples() {
        assert!(preprocess(&[itin_of_len("a", 2)], 3, 21)
            .unwrap()
            .is_empty());
        let out = preprocess(&[itin_of_len("b", 21)], 3, 21).unwrap();
        assert_eq!(out, vec![itin_of_len("b", 21)]);
        let out = preprocess(&[itin_of_len("c", 45)], 3, 21).unwrap();
        let lens: Vec<_> = out.iter().map(Itinerary::len).collect();
        assert_eq!(lens, [21, 21, 3]);
        assert_eq!(lens.iter().sum::<usize>(), 45);
        assert_eq!(out[2].seq_id, "c#2");
        let out = preprocess(&[itin_of_len("d", 44)], 3, 21).unwrap();
        assert_eq!(out.iter().map(Itinerary::len).collect::<Vec<_>>(), [21, 21]);
        assert!(preprocess(&[], 2, 21).is_err());
        assert!(preprocess(&[], 5, 4).is_err());
    }

    #[test]
    fn tertile_examples() {
        let d: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(tertiles(&d), Some([3.0, 6.0]));
        assert_eq!(tertiles(&[1u64, 10, 100]), Some([1, 10]));
        assert_eq!(tertiles(&[7u64, 7, 7, 7]), Some([7, 7]));
        assert_eq!(tertiles::<u64>(&[]), None);
    }

    #[test]
    fn binning_rule() {
        assert_eq!(bin_level(1u64, 1, 10), Level::Low);
        assert_eq!(bin_level(10u64, 1, 10), Level::Medium);
        assert_eq!(bin_level(100u64, 1, 10), Level::High);
        assert_eq!(bin_level(3.0, 3.0, 6.0), Level::Low);
        assert_eq!(bin_level(7u64, 7, 7), Level::Medium);
        assert_eq!(bin_level(6u64, 7, 7), Level::Low);
        assert_eq!(bin_level(8u64, 7, 7), Level::High);
    }

    #[test]
    fn profile_from_segments() {
        // one itinerary along the equator with segments of 1..=9 "units"
        let mut lon = 0.0;
        let mut pois = vec![Poi::new("p0", "park", 0.0, 0.0, 5).unwrap()];
        for k in 1..=9 {
            lon += k as f64 * 0.01;
            pois.push(Poi::new(format!("p{k}"), "park", 0.0, lon, 5).unwrap());
        }
        let catalog: PoiCatalog = pois.iter().map(|p| (p.id.clone(), p.clone())).collect();
        let it = Itinerary::new("s", "u", pois);
        let profile = profile_corpus("toy", &catalog, std::slice::from_ref(&it)).unwrap();
        let seg = segment_distances(std::slice::from_ref(&it));
        assert_eq!(profile.dist_thresholds, [seg[2], seg[5]]);
        assert_eq!(profile.pop_thresholds, [5, 5]);
        assert!(catalog
            .values()
            .all(|p| profile.popularity_level(p) == Level::Medium));
        let again = profile_corpus("toy", &catalog, std::slice::from_ref(&it)).unwrap();
        assert_eq!(
            serde_json::to_string(&profile).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn degenerate_profile() {
        let pois: Vec<Poi> = (0..4)
            .map(|k| Poi::new(format!("p{k}"), "park", 0.0, k as f64, 1).unwrap())
            .collect();
        let catalog: PoiCatalog = pois.iter().map(|p| (p.id.clone(), p.clone())).collect();
        let it = Itinerary::new("s", "u", pois);
        assert!(matches!(
            profile_corpus("toy", &catalog, &[it]),
            Err(Error::DegenerateProfile(_))
        ));
    }
}
