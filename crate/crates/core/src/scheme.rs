//! The five-class Layer-1 coding scheme and the rules of the coding workflow.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::PortableRng;

/// Version tag written into annotation log headers.
pub const SCHEME_VERSION: &str = "layer1/v1";

/// Maximum number of times a coder may hear one queue item.
pub const PLAY_BUDGET: u8 = 3;

/// Per-set kappa a coder pair must reach during consolidation.
pub const CONSOLIDATION_KAPPA: f64 = 0.80;

/// Consecutive sets that must reach [`CONSOLIDATION_KAPPA`].
pub const CONSOLIDATION_RUN: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("unknown class code {0}; expected 1..=5")]
    UnknownClass(u8),
    #[error("play budget of {PLAY_BUDGET} exhausted for item {0}")]
    BudgetExhausted(String),
    #[error("item {0} was already labeled; no further plays")]
    PlayAfterLabel(String),
    #[error("item {0} must be played at least once before labeling")]
    LabelBeforePlay(String),
    #[error("item {0} already carries a label from this coder")]
    DuplicateLabel(String),
    #[error("unknown queue item {0}")]
    UnknownItem(String),
    #[error("cannot draw {requested} items from a population of {population}")]
    PopulationTooSmall { requested: usize, population: usize },
    #[error("segment id {0} occurs more than once in the queue input")]
    DuplicateSegmentId(String),
    #[error("label maps cover different segments ({only_a} only in A, {only_b} only in B)")]
    KeySetMismatch { only_a: usize, only_b: usize },
}

impl SchemeError {
    /// True for the play-budget error, which callers report separately from
    /// ordering errors.
    pub fn is_quota(&self) -> bool {
        matches!(self, SchemeError::BudgetExhausted(_))
    }

    pub fn is_sequencing(&self) -> bool {
        matches!(
            self,
            SchemeError::PlayAfterLabel(_) | SchemeError::LabelBeforePlay(_) | SchemeError::DuplicateLabel(_)
        )
    }
}

/// Layer-1 class. Serialized as its numeric code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum AnnotationClass {
    /// Infant sound with phonation.
    Voiced = 1,
    /// Infant vocalization without phonation.
    Unvoiced = 2,
    /// Laughing, crying or fussing, and vegetative sounds.
    FixedSignal = 3,
    /// Anything not produced by the infant.
    NonTarget = 4,
    /// Infant sound that cannot be assigned to 1–3 after three listens.
    Unassignable = 5,
}

impl AnnotationClass {
    pub const ALL: [AnnotationClass; 5] = [
        AnnotationClass::Voiced,
        AnnotationClass::Unvoiced,
        AnnotationClass::FixedSignal,
        AnnotationClass::NonTarget,
        AnnotationClass::Unassignable,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, SchemeError> {
        match code {
            1 => Ok(Self::Voiced),
            2 => Ok(Self::Unvoiced),
            3 => Ok(Self::FixedSignal),
            4 => Ok(Self::NonTarget),
            5 => Ok(Self::Unassignable),
            other => Err(SchemeError::UnknownClass(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Voiced => "voiced vocalization",
            Self::Unvoiced => "unvoiced vocalization",
            Self::FixedSignal => "fixed signal",
            Self::NonTarget => "non-target",
            Self::Unassignable => "unassignable",
        }
    }

    /// Classes 1, 2, 3 and 5 originate from the infant.
    pub fn is_infant_sound(self) -> bool {
        self != Self::NonTarget
    }

    /// Classes 1 and 2, the pool for acoustic analysis.
    pub fn is_vocalization(self) -> bool {
        matches!(self, Self::Voiced | Self::Unvoiced)
    }
}

impl TryFrom<u8> for AnnotationClass {
    type Error = SchemeError;
    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Self::from_code(code)
    }
}

impl From<AnnotationClass> for u8 {
    fn from(c: AnnotationClass) -> u8 {
        c.code()
    }
}

impl fmt::Display for AnnotationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.code(), self.name())
    }
}

/// Workflow phase a queue or record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    Familiarization,
    Consolidation { set_index: usize },
    GroundTruth,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Familiarization => f.write_str("familiarization"),
            Phase::Consolidation { set_index } => write!(f, "consolidation set {}", set_index + 1),
            Phase::GroundTruth => f.write_str("ground truth"),
        }
    }
}

/// One coder's label for one queue item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub queue_item_id: String,
    pub segment_id: String,
    pub coder_id: String,
    pub class: AnnotationClass,
    pub play_count: u8,
    pub pass: Phase,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub segment_ids: Vec<String>,
    pub n_duplicates: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueItem {
    pub queue_item_id: String,
    pub segment_id: String,
    pub is_duplicate: bool,
}

/// Builds the randomized coding queue.
///
/// `n_duplicates` segments are drawn without replacement and appended, then
/// the whole list is shuffled. Item ids are positional (`item-000000`, ...)
/// and carry no hint of duplication.
pub fn build_ground_truth_queue(spec: &QueueSpec) -> Result<Vec<QueueItem>, SchemeError> {
    let mut seen = HashSet::with_capacity(spec.segment_ids.len());
    for id in &spec.segment_ids {
        if !seen.insert(id.as_str()) {
            return Err(SchemeError::DuplicateSegmentId(id.clone()));
        }
    }
    let population = spec.segment_ids.len();
    if spec.n_duplicates > population {
        return Err(SchemeError::PopulationTooSmall {
            requested: spec.n_duplicates,
            population,
        });
    }
    let mut rng = PortableRng::new(spec.rng_seed);
    let duplicates = rng.sample_indices(population, spec.n_duplicates);
    let mut entries: Vec<(&str, bool)> = spec
        .segment_ids
        .iter()
        .map(|id| (id.as_str(), false))
        .chain(duplicates.iter().map(|&i| (spec.segment_ids[i].as_str(), true)))
        .collect();
    rng.shuffle(&mut entries);
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(pos, (segment_id, is_duplicate))| QueueItem {
            queue_item_id: format!("item-{pos:06}"),
            segment_id: segment_id.to_string(),
            is_duplicate,
        })
        .collect())
}

/// Draws `n_sets` mutually exclusive random sets of `set_size` segments, as used
/// for familiarization and consolidation.
pub fn draw_sets(
    segment_ids: &[String],
    n_sets: usize,
    set_size: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, SchemeError> {
    let requested = n_sets * set_size;
    if requested > segment_ids.len() {
        return Err(SchemeError::PopulationTooSmall {
            requested,
            population: segment_ids.len(),
        });
    }
    let picks = PortableRng::new(seed).sample_indices(segment_ids.len(), requested);
    Ok(picks
        .chunks(set_size.max(1))
        .take(n_sets)
        .map(|chunk| chunk.iter().map(|&i| segment_ids[i].clone()).collect())
        .collect())
}

/// Play/label state of one (coder, item) pair.
///
/// Plays go 0 → 1 → 2 → 3; a label is accepted once at least one play was
/// consumed and closes the item.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemProgress {
    pub plays: u8,
    pub label: Option<AnnotationClass>,
}

impl ItemProgress {
    pub fn remaining_plays(&self) -> u8 {
        PLAY_BUDGET - self.plays
    }

    pub fn check_play(&self, item: &str) -> Result<(), SchemeError> {
        if self.label.is_some() {
            Err(SchemeError::PlayAfterLabel(item.to_string()))
        } else if self.plays >= PLAY_BUDGET {
            Err(SchemeError::BudgetExhausted(item.to_string()))
        } else {
            Ok(())
        }
    }

    /// Consumes one play and returns the plays left.
    pub fn play(&mut self, item: &str) -> Result<u8, SchemeError> {
        self.check_play(item)?;
        self.plays += 1;
        Ok(self.remaining_plays())
    }

    pub fn check_label(&self, item: &str) -> Result<(), SchemeError> {
        if self.label.is_some() {
            Err(SchemeError::DuplicateLabel(item.to_string()))
        } else if self.plays == 0 {
            Err(SchemeError::LabelBeforePlay(item.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn label(&mut self, item: &str, class: AnnotationClass) -> Result<(), SchemeError> {
        self.check_label(item)?;
        self.label = Some(class);
        Ok(())
    }
}

/// Tracks every coder's progress over one queue and collects the label log.
#[derive(Debug, Clone)]
pub struct AnnotationTracker {
    phase: Phase,
    items: HashMap<String, String>,
    progress: HashMap<(String, String), ItemProgress>,
    records: Vec<AnnotationRecord>,
}

impl AnnotationTracker {
    pub fn new(queue: &[QueueItem], phase: Phase) -> Self {
        Self {
            phase,
            items: queue
                .iter()
                .map(|q| (q.queue_item_id.clone(), q.segment_id.clone()))
                .collect(),
            progress: HashMap::new(),
            records: Vec::new(),
        }
    }

    pub fn progress(&self, item: &str, coder: &str) -> ItemProgress {
        self.progress
            .get(&(coder.to_string(), item.to_string()))
            .copied()
            .unwrap_or_default()
    }

    pub fn record_play(&mut self, item: &str, coder: &str) -> Result<u8, SchemeError> {
        if !self.items.contains_key(item) {
            return Err(SchemeError::UnknownItem(item.to_string()));
        }
        self.progress
            .entry((coder.to_string(), item.to_string()))
            .or_default()
            .play(item)
    }

    pub fn record_label(
        &mut self,
        item: &str,
        coder: &str,
        class: AnnotationClass,
        timestamp: DateTime<Utc>,
    ) -> Result<AnnotationRecord, SchemeError> {
        let segment_id = self
            .items
            .get(item)
            .ok_or_else(|| SchemeError::UnknownItem(item.to_string()))?
            .clone();
        let progress = self
            .progress
            .entry((coder.to_string(), item.to_string()))
            .or_default();
        progress.label(item, class)?;
        let record = AnnotationRecord {
            queue_item_id: item.to_string(),
            segment_id,
            coder_id: coder.to_string(),
            class,
            play_count: progress.plays,
            pass: self.phase,
            timestamp,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub passed: bool,
    /// Index of the first set of the earliest qualifying run.
    pub window_start: Option<usize>,
}

/// Passes once [`CONSOLIDATION_RUN`] consecutive set kappas are all at least
/// [`CONSOLIDATION_KAPPA`].
pub fn consolidation_gate(set_kappas: &[f64]) -> GateOutcome {
    consolidation_gate_with(set_kappas, CONSOLIDATION_KAPPA, CONSOLIDATION_RUN)
}

pub fn consolidation_gate_with(set_kappas: &[f64], threshold: f64, run: usize) -> GateOutcome {
    let mut streak = 0;
    for (i, &k) in set_kappas.iter().enumerate() {
        streak = if k >= threshold { streak + 1 } else { 0 };
        if run > 0 && streak == run {
            return GateOutcome {
                passed: true,
                window_start: Some(i + 1 - run),
            };
        }
    }
    GateOutcome {
        passed: false,
        window_start: None,
    }
}

/// Keeps the segments both coders put into the same class.
pub fn consensus_filter(
    labels_a: &BTreeMap<String, AnnotationClass>,
    labels_b: &BTreeMap<String, AnnotationClass>,
) -> Result<BTreeMap<String, AnnotationClass>, SchemeError> {
    let only_a = labels_a.keys().filter(|k| !labels_b.contains_key(*k)).count();
    let only_b = labels_b.keys().filter(|k| !labels_a.contains_key(*k)).count();
    if only_a > 0 || only_b > 0 {
        return Err(SchemeError::KeySetMismatch { only_a, only_b });
    }
    Ok(labels_a
        .iter()
        .filter(|(k, c)| labels_b.get(*k) == Some(c))
        .map(|(k, &c)| (k.clone(), c))
        .collect())
}

/// One coder's labels split by encounter: the first label of each segment
/// feeds ground truth, a second label of a duplicated segment feeds the
/// intra-rater comparison only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassLabels {
    pub first: BTreeMap<String, AnnotationClass>,
    pub repeat: BTreeMap<String, AnnotationClass>,
}

/// Splits records (in log order) into first and repeat encounters per segment.
pub fn split_passes<'a>(records: impl IntoIterator<Item = &'a AnnotationRecord>) -> PassLabels {
    let mut out = PassLabels::default();
    for r in records {
        if out.first.contains_key(&r.segment_id) {
            out.repeat.entry(r.segment_id.clone()).or_insert(r.class);
        } else {
            out.first.insert(r.segment_id.clone(), r.class);
        }
    }
    out
}

/// Segment count per class (all five classes present, possibly zero).
pub fn class_counts(labels: &BTreeMap<String, AnnotationClass>) -> BTreeMap<AnnotationClass, usize> {
    let mut counts: BTreeMap<AnnotationClass, usize> =
        AnnotationClass::ALL.iter().map(|&c| (c, 0)).collect();
    for c in labels.values() {
        *counts.entry(*c).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn now() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    #[test]
    fn class_codes_round_trip() {
        for c in AnnotationClass::ALL {
            assert_eq!(AnnotationClass::from_code(c.code()).unwrap(), c);
        }
        assert_eq!(AnnotationClass::from_code(0), Err(SchemeError::UnknownClass(0)));
        assert_eq!(AnnotationClass::from_code(6), Err(SchemeError::UnknownClass(6)));
        assert_eq!(serde_json::to_string(&AnnotationClass::Unassignable).unwrap(), "5");
        assert!(serde_json::from_str::<AnnotationClass>("7").is_err());
        assert!(!AnnotationClass::NonTarget.is_infant_sound());
        assert!(AnnotationClass::Unassignable.is_infant_sound());
    }

    #[test]
    fn queue_without_duplicates_is_a_permutation() {
        let spec = QueueSpec { segment_ids: ids(20), n_duplicates: 0, rng_seed: 1 };
        let queue = build_ground_truth_queue(&spec).unwrap();
        let mut got: Vec<String> = queue.iter().map(|q| q.segment_id.clone()).collect();
        got.sort();
        let mut want = ids(20);
        want.sort();
        assert_eq!(got, want);
        assert!(queue.iter().all(|q| !q.is_duplicate));
    }

    #[test]
    fn queue_errors() {
        let spec = QueueSpec { segment_ids: ids(3), n_duplicates: 4, rng_seed: 1 };
        assert_eq!(
            build_ground_truth_queue(&spec),
            Err(SchemeError::PopulationTooSmall { requested: 4, population: 3 })
        );
        let spec = QueueSpec {
            segment_ids: vec!["a".into(), "a".into()],
            n_duplicates: 0,
            rng_seed: 1,
        };
        assert_eq!(
            build_ground_truth_queue(&spec),
            Err(SchemeError::DuplicateSegmentId("a".into()))
        );
    }

    #[test]
    fn sets_are_mutually_exclusive() {
        let sets = draw_sets(&ids(1000), 5, 100, 11).unwrap();
        assert_eq!(sets.len(), 5);
        let all: HashSet<&String> = sets.iter().flatten().collect();
        assert_eq!(all.len(), 500);
        assert!(draw_sets(&ids(10), 3, 4, 1).is_err());
    }

    #[test]
    fn play_budget_and_label_sequencing() {
        let mut p = ItemProgress::default();
        assert_eq!(p.check_label("i"), Err(SchemeError::LabelBeforePlay("i".into())));
        assert_eq!(p.play("i"), Ok(2));
        assert_eq!(p.play("i"), Ok(1));
        assert_eq!(p.play("i"), Ok(0));
        let err = p.play("i").unwrap_err();
        assert!(err.is_quota());
        p.label("i", AnnotationClass::Unassignable).unwrap();
        assert!(p.play("i").unwrap_err().is_sequencing());
        assert_eq!(
            p.label("i", AnnotationClass::Voiced),
            Err(SchemeError::DuplicateLabel("i".into()))
        );
    }

    #[test]
    fn tracker_records_labels() {
        let queue = build_ground_truth_queue(&QueueSpec { segment_ids: ids(3), n_duplicates: 1, rng_seed: 5 }).unwrap();
        let mut t = AnnotationTracker::new(&queue, Phase::GroundTruth);
        let item = &queue[0].queue_item_id;
        assert!(t.record_label(item, "c1", AnnotationClass::Voiced, now()).is_err());
        assert_eq!(t.record_play(item, "c1"), Ok(2));
        let rec = t.record_label(item, "c1", AnnotationClass::Voiced, now()).unwrap();
        assert_eq!(rec.play_count, 1);
        assert_eq!(rec.segment_id, queue[0].segment_id);
        // Another coder has independent state for the same item.
        assert_eq!(t.record_play(item, "c2"), Ok(2));
        assert_eq!(t.record_play("nope", "c1"), Err(SchemeError::UnknownItem("nope".into())));
        assert_eq!(t.records().len(), 1);
    }

    #[test]
    fn gate_examples() {
        assert_eq!(consolidation_gate(&[0.9, 0.9, 0.9]), GateOutcome { passed: true, window_start: Some(0) });
        assert_eq!(
            consolidation_gate(&[0.9, 0.7, 0.9, 0.9, 0.9]),
            GateOutcome { passed: true, window_start: Some(2) }
        );
        assert!(!consolidation_gate(&[0.79, 0.79, 0.79]).passed);
        assert!(consolidation_gate(&[0.8, 0.8, 0.8]).passed);
        assert!(!consolidation_gate(&[]).passed);
    }

    #[test]
    fn consensus_examples() {
        use AnnotationClass::*;
        let a: BTreeMap<String, AnnotationClass> = [("s1".into(), Voiced), ("s2".into(), NonTarget)].into();
        let b: BTreeMap<String, AnnotationClass> = [("s1".into(), Voiced), ("s2".into(), Unassignable)].into();
        let kept = consensus_filter(&a, &b).unwrap();
        assert_eq!(kept, [("s1".to_string(), Voiced)].into());
        assert_eq!(consensus_filter(&a, &a).unwrap(), a);
        let c: BTreeMap<String, AnnotationClass> = [("s1".into(), Voiced)].into();
        assert_eq!(consensus_filter(&a, &c), Err(SchemeError::KeySetMismatch { only_a: 1, only_b: 0 }));
    }

    #[test]
    fn split_passes_uses_first_encounter() {
        let rec = |seg: &str, class| AnnotationRecord {
            queue_item_id: format!("q-{seg}"),
            segment_id: seg.into(),
            coder_id: "c".into(),
            class,
            play_count: 1,
            pass: Phase::GroundTruth,
            timestamp: now(),
        };
        let records = vec![
            rec("a", AnnotationClass::Voiced),
            rec("b", AnnotationClass::NonTarget),
            rec("a", AnnotationClass::Unassignable),
        ];
        let passes = split_passes(&records);
        assert_eq!(passes.first["a"], AnnotationClass::Voiced);
        assert_eq!(passes.repeat["a"], AnnotationClass::Unassignable);
        assert_eq!(passes.first.len(), 2);
        assert_eq!(passes.repeat.len(), 1);
    }
}
