//! Domain types: POIs, itineraries, operations, intents and perturbations.
//!
//! Everything here is an immutable value once constructed. Constructors
//! validate the invariants so downstream code can rely on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque POI identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoiId(pub String);

impl PoiId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PoiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PoiId {
    fn from(s: &str) -> Self {
        PoiId(s.to_string())
    }
}

impl From<String> for PoiId {
    fn from(s: String) -> Self {
        PoiId(s)
    }
}

/// A point of interest. Popularity is kept as the raw visit frequency; the
/// low/medium/high level is corpus-relative and comes from a
/// [`CorpusProfile`](crate::ingest::CorpusProfile).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: PoiId,
    pub category: String,
    pub lat: f64,
    pub lon: f64,
    pub visit_freq: u64,
}

impl Poi {
    pub fn new(
        id: impl Into<PoiId>,
        category: impl Into<String>,
        lat: f64,
        lon: f64,
        visit_freq: u64,
    ) -> Result<Self> {
        let poi = Poi {
            id: id.into(),
            category: category.into(),
            lat,
            lon,
            visit_freq,
        };
        poi.validate()?;
        Ok(poi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Domain(format!(
                "poi {}: coordinate out of range ({}, {})",
                self.id, self.lat, self.lon
            )));
        }
        if self.category.trim().is_empty() {
            return Err(Error::Domain(format!("poi {}: empty category", self.id)));
        }
        Ok(())
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.lat, self.lon)
    }
}

/// All POIs of a corpus keyed by id.
pub type PoiCatalog = BTreeMap<PoiId, Poi>;

/// A chronologically ordered POI sequence. Revisits are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub seq_id: String,
    pub user_id: String,
    pub pois: Vec<Poi>,
}

impl Itinerary {
    pub fn new(seq_id: impl Into<String>, user_id: impl Into<String>, pois: Vec<Poi>) -> Self {
        Itinerary {
            seq_id: seq_id.into(),
            user_id: user_id.into(),
            pois,
        }
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn ids(&self) -> Vec<PoiId> {
        self.pois.iter().map(|p| p.id.clone()).collect()
    }

    pub fn contains(&self, id: &PoiId) -> bool {
        self.pois.iter().any(|p| &p.id == id)
    }

    /// Canonical serialization: the JSON array of POI ids.
    pub fn canonical(&self) -> String {
        serde_json::to_string(&self.ids()).expect("string ids always serialize")
    }

    /// Rebuilds an itinerary from ids against a catalog.
    pub fn resolve(
        seq_id: impl Into<String>,
        user_id: impl Into<String>,
        ids: &[PoiId],
        catalog: &PoiCatalog,
    ) -> Result<Self> {
        let pois = ids
            .iter()
            .map(|id| {
                catalog
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::Domain(format!("unknown poi id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Itinerary::new(seq_id, user_id, pois))
    }

    fn with_pois(&self, pois: Vec<Poi>) -> Self {
        Itinerary {
            seq_id: self.seq_id.clone(),
            user_id: self.user_id.clone(),
            pois,
        }
    }
}

/// Single edit applied to an itinerary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Add,
    Delete,
    Replace,
}

impl Operation {
    pub const ALL: [Operation; 3] = [Operation::Add, Operation::Delete, Operation::Replace];

    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Add => "add",
            Operation::Delete => "delete",
            Operation::Replace => "replace",
        }
    }

    /// The operation that undoes this one.
    pub fn inverse(self) -> Operation {
        match self {
            Operation::Add => Operation::Delete,
            Operation::Delete => Operation::Add,
            Operation::Replace => Operation::Replace,
        }
    }

    /// Length change |i*| - |i| produced by the operation.
    pub fn length_delta(self) -> isize {
        match self {
            Operation::Add => 1,
            Operation::Delete => -1,
            Operation::Replace => 0,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl std::str::FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "add" => Ok(Operation::Add),
            "delete" => Ok(Operation::Delete),
            "replace" => Ok(Operation::Replace),
            other => Err(Error::Parameter(format!("unknown operation {other:?}"))),
        }
    }
}

/// Itinerary attribute a perturbation must disrupt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    Popularity,
    Distance,
    Diversity,
}

impl Intent {
    pub const ALL: [Intent; 3] = [Intent::Popularity, Intent::Distance, Intent::Diversity];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Popularity => "popularity",
            Intent::Distance => "distance",
            Intent::Diversity => "diversity",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Intent::Popularity => 1,
            Intent::Distance => 2,
            Intent::Diversity => 4,
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Intent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "popularity" | "pop" => Ok(Intent::Popularity),
            "distance" | "dis" => Ok(Intent::Distance),
            "diversity" | "div" => Ok(Intent::Diversity),
            other => Err(Error::Parameter(format!("unknown intent {other:?}"))),
        }
    }
}

/// Non-empty set of intents, iterated in the fixed order popularity,
/// distance, diversity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntentSet(u8);

impl IntentSet {
    pub fn new(intents: &[Intent]) -> Result<Self> {
        let mut bits = 0u8;
        for intent in intents {
            if bits & intent.bit() != 0 {
                return Err(Error::Domain(format!("duplicate intent {intent}")));
            }
            bits |= intent.bit();
        }
        if bits == 0 {
            return Err(Error::Domain("intent set must not be empty".into()));
        }
        Ok(IntentSet(bits))
    }

    pub fn single(intent: Intent) -> Self {
        IntentSet(intent.bit())
    }

    pub fn all() -> Self {
        IntentSet(7)
    }

    pub fn contains(&self, intent: Intent) -> bool {
        self.0 & intent.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = Intent> + '_ {
        Intent::ALL.into_iter().filter(move |i| self.contains(*i))
    }

    pub fn to_vec(&self) -> Vec<Intent> {
        self.iter().collect()
    }
}

impl fmt::Display for IntentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Intent::as_str).collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

impl Serialize for IntentSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntentSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let intents = Vec::<Intent>::deserialize(deserializer)?;
        IntentSet::new(&intents).map_err(serde::de::Error::custom)
    }
}

/// Ordinal popularity or distance level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn ordinal(self) -> i8 {
        match self {
            Level::Low => 0,
            Level::Medium => 1,
            Level::High => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" | "l" => Ok(Level::Low),
            "medium" | "med" | "m" => Ok(Level::Medium),
            "high" | "h" => Ok(Level::High),
            other => Err(Error::Parameter(format!("unknown level {other:?}"))),
        }
    }
}

/// A single edit `original -> perturbed`, validated on construction.
///
/// `position` is zero-based: for ADD it is the insert-before index in
/// `[0, |i|]`, for DELETE and REPLACE the index of the affected element.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub op: Operation,
    pub position: usize,
    pub poi_in: Option<Poi>,
    pub poi_out: Option<Poi>,
    pub original: Itinerary,
    pub perturbed: Itinerary,
}

impl Perturbation {
    pub fn add(original: &Itinerary, position: usize, poi: Poi) -> Result<Self> {
        if position > original.len() {
            return Err(Error::Structural(format!(
                "ADD position {position} outside [0, {}]",
                original.len()
            )));
        }
        if original.contains(&poi.id) {
            return Err(Error::Structural(format!(
                "ADD poi {} already in itinerary",
                poi.id
            )));
        }
        let mut pois = original.pois.clone();
        pois.insert(position, poi.clone());
        Ok(Perturbation {
            op: Operation::Add,
            position,
            poi_in: Some(poi),
            poi_out: None,
            perturbed: original.with_pois(pois),
            original: original.clone(),
        })
    }

    pub fn delete(original: &Itinerary, position: usize) -> Result<Self> {
        if position >= original.len() {
            return Err(Error::Structural(format!(
                "DELETE position {position} outside [0, {})",
                original.len()
            )));
        }
        if original.len() < 3 {
            return Err(Error::Structural(format!(
                "DELETE would leave fewer than 2 POIs (|i|={})",
                original.len()
            )));
        }
        let mut pois = original.pois.clone();
        let removed = pois.remove(position);
        Ok(Perturbation {
            op: Operation::Delete,
            position,
            poi_in: None,
            poi_out: Some(removed),
            perturbed: original.with_pois(pois),
            original: original.clone(),
        })
    }

    pub fn replace(original: &Itinerary, position: usize, poi: Poi) -> Result<Self> {
        if position >= original.len() {
            return Err(Error::Structural(format!(
                "REPLACE position {position} outside [0, {})",
                original.len()
            )));
        }
        if original.contains(&poi.id) {
            return Err(Error::Structural(format!(
                "REPLACE poi {} already in itinerary",
                poi.id
            )));
        }
        let mut pois = original.pois.clone();
        let removed = std::mem::replace(&mut pois[position], poi.clone());
        Ok(Perturbation {
            op: Operation::Replace,
            position,
            poi_in: Some(poi),
            poi_out: Some(removed),
            perturbed: original.with_pois(pois),
            original: original.clone(),
        })
    }

    /// Builds the perturbation for `op`; `poi` is ignored for DELETE.
    pub fn apply(
        original: &Itinerary,
        op: Operation,
        position: usize,
        poi: Option<Poi>,
    ) -> Result<Self> {
        let need =
            |poi: Option<Poi>| poi.ok_or_else(|| Error::Structural(format!("{op} requires a POI")));
        match op {
            Operation::Add => Perturbation::add(original, position, need(poi)?),
            Operation::Delete => Perturbation::delete(original, position),
            Operation::Replace => Perturbation::replace(original, position, need(poi)?),
        }
    }

    /// Undoes the edit on `perturbed`, reconstructing the original.
    pub fn revert(&self) -> Result<Itinerary> {
        let mut pois = self.perturbed.pois.clone();
        match self.op {
            Operation::Add => {
                if self.position >= pois.len() {
                    return Err(Error::Structural("ADD position out of range".into()));
                }
                pois.remove(self.position);
            }
            Operation::Delete => {
                let out = self
                    .poi_out
                    .clone()
                    .ok_or_else(|| Error::Structural("DELETE without poi_out".into()))?;
                if self.position > pois.len() {
                    return Err(Error::Structural("DELETE position out of range".into()));
                }
                pois.insert(self.position, out);
            }
            Operation::Replace => {
                let out = self
                    .poi_out
                    .clone()
                    .ok_or_else(|| Error::Structural("REPLACE without poi_out".into()))?;
                let slot = pois
                    .get_mut(self.position)
                    .ok_or_else(|| Error::Structural("REPLACE position out of range".into()))?;
                *slot = out;
            }
        }
        Ok(self.perturbed.with_pois(pois))
    }

    /// Re-checks the structural invariants of a (possibly deserialized) edit.
    pub fn check(&self) -> Result<()> {
        let n = self.original.len();
        let m = self.perturbed.len();
        let (len_ok, in_ok, out_ok) = match self.op {
            Operation::Add => (m == n + 1, self.poi_in.is_some(), self.poi_out.is_none()),
            Operation::Delete => (
                m + 1 == n && m >= 2,
                self.poi_in.is_none(),
                self.poi_out.is_some(),
            ),
            Operation::Replace => (m == n, self.poi_in.is_some(), self.poi_out.is_some()),
        };
        if !(len_ok && in_ok && out_ok) {
            return Err(Error::Structural(format!(
                "{} record inconsistent: |i|={n}, |i*|={m}, poi_in={}, poi_out={}",
                self.op,
                self.poi_in.is_some(),
                self.poi_out.is_some()
            )));
        }
        if let Some(poi) = &self.poi_in {
            if self.original.contains(&poi.id) {
                return Err(Error::Structural(format!(
                    "poi_in {} is already part of the original itinerary",
                    poi.id
                )));
            }
        }
        if self.revert()?.ids() != self.original.ids() {
            return Err(Error::Structural(
                "reverting the edit does not reconstruct the original".into(),
            ));
        }
        Ok(())
    }

    /// The POI chosen by the perturbation: the inserted one, else the removed one.
    pub fn target(&self) -> Option<&Poi> {
        self.poi_in.as_ref().or(self.poi_out.as_ref())
    }
}

/// Φ_i: corpus POIs not in the itinerary, sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidatePool {
    pub pois: Vec<Poi>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn get(&self, id: &PoiId) -> Option<&Poi> {
        self.pois
            .binary_search_by(|p| p.id.cmp(id))
            .ok()
            .map(|idx| &self.pois[idx])
    }
}

/// Computes Φ_i = P \ i. An empty pool is a valid result.
pub fn candidate_pool(corpus: &PoiCatalog, itinerary: &Itinerary) -> Result<CandidatePool> {
    if corpus.is_empty() {
        return Err(Error::Domain("corpus has no POIs".into()));
    }
    let used: BTreeSet<&PoiId> = itinerary.pois.iter().map(|p| &p.id).collect();
    if let Some(missing) = used.iter().find(|id| !corpus.contains_key(**id)) {
        return Err(Error::Domain(format!(
            "itinerary {} references poi {missing} missing from the corpus",
            itinerary.seq_id
        )));
    }
    let pois = corpus
        .values()
        .filter(|p| !used.contains(&p.id))
        .cloned()
        .collect();
    Ok(CandidatePool { pois })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn poi(id: &str) -> Poi {
        Poi::new(id, "museum", 0.0, 0.0, 1).unwrap()
    }

    pub(crate) fn itin(ids: &[&str]) -> Itinerary {
        Itinerary::new("s", "u", ids.iter().map(|id| poi(id)).collect())
    }

    fn catalog(ids: &[&str]) -> PoiCatalog {
        ids.iter().map(|id| (PoiId::from(*id), poi(id))).collect()
    }

    fn pool_ids(pool: &CandidatePool) -> Vec<&str> {
        pool.pois.iter().map(|p| p.id.as_str()).collect()
    }

    #[test]
    fn pool_is_set_difference() {
        let pool =
            candidate_pool(&catalog(&["a", "b", "c", "d"]), &itin(&["a", "b", "c"])).unwrap();
        assert_eq!(pool_ids(&pool), ["d"]);
    }

    #[test]
    fn pool_exhausted() {
        let pool = candidate_pool(&catalog(&["a", "b", "c"]), &itin(&["a", "b", "c"])).unwrap();
        assert!(pool.is_empty());
    }

    #[test]
    fn pool_with_revisits_matches_membership_scan() {
        let corpus = catalog(&["a", "b", "c", "d", "e"]);
        let it = itin(&["a", "a", "b"]);
        let pool = candidate_pool(&corpus, &it).unwrap();
        let brute: Vec<&str> = corpus
            .keys()
            .filter(|id| !it.pois.iter().any(|p| &p.id == *id))
            .map(|id| id.as_str())
            .collect();
        assert_eq!(pool_ids(&pool), brute);
        assert_eq!(pool_ids(&pool), ["c", "d", "e"]);
    }

    #[test]
    fn pool_rejects_foreign_pois() {
        assert!(candidate_pool(&catalog(&["a"]), &itin(&["a", "z"])).is_err());
        assert!(candidate_pool(&PoiCatalog::new(), &itin(&["a"])).is_err());
    }

    #[test]
    fn poi_invariants() {
        assert!(Poi::new("x", "park", 91.0, 0.0, 0).is_err());
        assert!(Poi::new("x", "park", 0.0, -180.5, 0).is_err());
        assert!(Poi::new("x", "   ", 0.0, 0.0, 0).is_err());
        assert!(Poi::new("x", "park", -90.0, 180.0, 0).is_ok());
    }

    #[test]
    fn intent_set_rules() {
        assert!(IntentSet::new(&[]).is_err());
        assert!(IntentSet::new(&[Intent::Distance, Intent::Distance]).is_err());
        let set = IntentSet::new(&[Intent::Diversity, Intent::Popularity]).unwrap();
        assert_eq!(set.to_vec(), [Intent::Popularity, Intent::Diversity]);
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"["popularity","diversity"]"#);
        assert!(serde_json::from_str::<IntentSet>("[]").is_err());
    }

    #[test]
    fn edits_round_trip() {
        let it = itin(&["a", "b", "c"]);
        for pos in 0..=3 {
            let p = Perturbation::add(&it, pos, poi("z")).unwrap();
            assert_eq!(p.perturbed.len(), 4);
            assert_eq!(p.revert().unwrap().canonical(), it.canonical());
            p.check().unwrap();
        }
        for pos in 0..3 {
            let d = Perturbation::delete(&it, pos).unwrap();
            assert_eq!(d.revert().unwrap().canonical(), it.canonical());
            d.check().unwrap();
            let r = Perturbation::replace(&it, pos, poi("z")).unwrap();
            assert_eq!(r.revert().unwrap().canonical(), it.canonical());
            r.check().unwrap();
        }
    }

    #[test]
    fn edit_preconditions() {
        let it = itin(&["a", "b", "c"]);
        assert!(Perturbation::add(&it, 4, poi("z")).is_err());
        assert!(Perturbation::add(&it, 0, poi("a")).is_err());
        assert!(Perturbation::delete(&it, 3).is_err());
        assert!(Perturbation::delete(&itin(&["a", "b"]), 0).is_err());
        assert!(Perturbation::replace(&it, 1, poi("c")).is_err());
    }
}
