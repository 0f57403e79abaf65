//! Reliability and analysis reports built from annotation records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use vocalcode::analytics::{
    build_observations, class_table, group_compare, AnalyticsError, ClassTable, GroupComparison, Metric,
    Observation, TTestVariant,
};
use vocalcode::pitch::F0Row;
use vocalcode::reliability::{
    agreement_breakdown, cohen_kappa, confusion_from_maps, exclude_class_pairs, intra_rater_kappa,
    AgreementBreakdown, ConfusionMatrix, KappaResult, ReliabilityError,
};
use vocalcode::scheme::{consensus_filter, split_passes, AnnotationRecord, PassLabels};
use vocalcode::{AnnotationClass, Phase, Segment};

/// Ground-truth labels of one coder, split into first and repeat encounters.
pub fn coder_passes<'a>(records: impl IntoIterator<Item = &'a AnnotationRecord>, coder: &str) -> PassLabels {
    split_passes(
        records
            .into_iter()
            .filter(|r| r.coder_id == coder && r.pass == Phase::GroundTruth),
    )
}

/// Coders with at least one ground-truth label, sorted.
pub fn ground_truth_coders<'a>(records: impl IntoIterator<Item = &'a AnnotationRecord>) -> Vec<String> {
    let mut coders: Vec<String> = records
        .into_iter()
        .filter(|r| r.pass == Phase::GroundTruth)
        .map(|r| r.coder_id.clone())
        .collect();
    coders.sort();
    coders.dedup();
    coders
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedKappa {
    pub excluded_class: u8,
    pub n: u64,
    pub kappa: KappaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraRater {
    pub coder: String,
    /// Segments labeled twice.
    pub n: usize,
    pub kappa: Option<KappaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub coder_a: String,
    pub coder_b: String,
    pub labeled_a: usize,
    pub labeled_b: usize,
    /// Segments first-labeled by both coders.
    pub compared: u64,
    pub matrix: ConfusionMatrix,
    pub kappa: KappaResult,
    pub reduced: Option<ReducedKappa>,
    pub breakdown: AgreementBreakdown,
    pub intra_rater: Vec<IntraRater>,
}

pub fn reliability_report(
    (coder_a, a): (&str, &PassLabels),
    (coder_b, b): (&str, &PassLabels),
    exclude: Option<AnnotationClass>,
) -> Result<ReliabilityReport, ReliabilityError> {
    let matrix = confusion_from_maps(&a.first, &b.first);
    if matrix.total() == 0 {
        return Err(ReliabilityError::EmptyIntersection);
    }
    let kappa = cohen_kappa(&matrix)?;
    let reduced = exclude
        .map(|class| {
            let m = exclude_class_pairs(&matrix, class)?;
            Ok::<_, ReliabilityError>(ReducedKappa { excluded_class: class.code(), n: m.total(), kappa: cohen_kappa(&m)? })
        })
        .transpose()?;
    let breakdown = agreement_breakdown(&matrix, AnnotationClass::Unassignable)?;
    let intra_rater = [(coder_a, a), (coder_b, b)]
        .into_iter()
        .filter(|(_, p)| !p.repeat.is_empty())
        .map(|(coder, p)| IntraRater {
            coder: coder.to_string(),
            n: p.repeat.len(),
            kappa: intra_rater_kappa(&p.first, &p.repeat).ok(),
        })
        .collect();
    Ok(ReliabilityReport {
        coder_a: coder_a.to_string(),
        coder_b: coder_b.to_string(),
        labeled_a: a.first.len(),
        labeled_b: b.first.len(),
        compared: matrix.total(),
        kappa,
        reduced,
        breakdown,
        intra_rater,
        matrix,
    })
}

fn kappa_line(k: &KappaResult) -> String {
    format!("κ={:.3}, 95% CI [{:.3}, {:.3}] (se {:.4}, n {})", k.kappa, k.ci_low, k.ci_high, k.se, k.n)
}

impl ReliabilityReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", kappa_line(&self.kappa));
        if let Some(r) = &self.reduced {
            let _ = writeln!(out, "without class {}: {}", r.excluded_class, kappa_line(&r.kappa));
        }
        let _ = writeln!(
            out,
            "coders {} ({} labeled) and {} ({} labeled), {} segments compared",
            self.coder_a, self.labeled_a, self.coder_b, self.labeled_b, self.compared
        );
        let b = &self.breakdown;
        let _ = writeln!(
            out,
            "consensual {} ({:.1}%), disagreements {} ({:.1}%)",
            b.consensual, b.consensual_pct, b.disagreements, b.disagreements_pct
        );
        let _ = writeln!(
            out,
            "class {}: {} by {}, {} by {}, {} by both, at least one coder {} ({:.1}%), in disagreements {}",
            b.uncertainty_class.code(),
            b.coder_a_uncertain,
            self.coder_a,
            b.coder_b_uncertain,
            self.coder_b,
            b.uncertain_overlap,
            b.at_least_one_uncertain,
            b.at_least_one_uncertain_pct,
            b.disagreements_with_uncertain
        );
        for note in &b.notes {
            let _ = writeln!(out, "note: {note}");
        }
        for ir in &self.intra_rater {
            match &ir.kappa {
                Some(k) => {
                    let _ = writeln!(out, "intra-rater {}: {}", ir.coder, kappa_line(k));
                }
                None => {
                    let _ = writeln!(out, "intra-rater {}: undefined over {} repeats", ir.coder, ir.n);
                }
            }
        }
        out.push_str("confusion matrix (rows ");
        out.push_str(&self.coder_a);
        out.push_str(", columns ");
        out.push_str(&self.coder_b);
        out.push_str(")\n");
        out.push_str(&self.matrix.to_csv());
        out
    }
}

/// Consensus over the segments both coders first-labeled. Returns the
/// consensus map and how many labeled segments lacked the other coder's label.
pub fn consensus(a: &PassLabels, b: &PassLabels) -> (BTreeMap<String, AnnotationClass>, usize) {
    let shared = |x: &BTreeMap<String, AnnotationClass>, y: &BTreeMap<String, AnnotationClass>| {
        x.iter()
            .filter(|(k, _)| y.contains_key(*k))
            .map(|(k, &c)| (k.clone(), c))
            .collect::<BTreeMap<_, _>>()
    };
    let (sa, sb) = (shared(&a.first, &b.first), shared(&b.first, &a.first));
    let unmatched = a.first.len() + b.first.len() - 2 * sa.len();
    let agreed = consensus_filter(&sa, &sb).expect("key sets are equal by construction");
    (agreed, unmatched)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub consensual_segments: usize,
    /// Labeled segments without a label from the other coder.
    pub unmatched_segments: usize,
    pub class_table: ClassTable,
    pub comparisons: Vec<GroupComparison>,
}

pub fn observations(segments: &[Segment], consensus: &BTreeMap<String, AnnotationClass>, f0: &[F0Row]) -> Vec<Observation> {
    build_observations(segments, consensus, f0)
}

pub fn analysis_report(
    observations: &[Observation],
    unmatched_segments: usize,
    groups: Option<&BTreeMap<String, String>>,
    metrics: &[Metric],
    variant: TTestVariant,
) -> Result<AnalysisReport, AnalyticsError> {
    let comparisons = match groups {
        Some(g) => metrics
            .iter()
            .map(|&m| group_compare(observations, g, m, variant))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    Ok(AnalysisReport {
        consensual_segments: observations.len(),
        unmatched_segments,
        class_table: class_table(observations),
        comparisons,
    })
}

impl AnalysisReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} consensual segments", self.consensual_segments);
        if self.unmatched_segments > 0 {
            let _ = write!(out, " ({} labeled by one coder only, left out)", self.unmatched_segments);
        }
        out.push_str("\n\n");
        out.push_str(&self.class_table.to_text());
        for c in &self.comparisons {
            out.push('\n');
            out.push_str(&c.to_text());
        }
        out
    }
}

/// Reliability and analysis together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub reliability: ReliabilityReport,
    pub analysis: AnalysisReport,
}

impl FullReport {
    pub fn to_text(&self) -> String {
        format!("{}\n{}", self.reliability.to_text(), self.analysis.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;
    use AnnotationClass::*;

    fn rec(coder: &str, segment: &str, class: AnnotationClass) -> AnnotationRecord {
        AnnotationRecord {
            queue_item_id: format!("q-{segment}"),
            segment_id: segment.into(),
            coder_id: coder.into(),
            class,
            play_count: 1,
            pass: Phase::GroundTruth,
            timestamp: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn consensus_ignores_one_sided_labels() {
        let recs = [
            rec("a", "s1", Voiced),
            rec("a", "s2", Unvoiced),
            rec("a", "s3", Voiced),
            rec("b", "s1", Voiced),
            rec("b", "s2", Voiced),
            rec("b", "s4", NonTarget),
        ];
        let (a, b) = (coder_passes(&recs, "a"), coder_passes(&recs, "b"));
        let (agreed, unmatched) = consensus(&a, &b);
        assert_eq!(agreed.len(), 1);
        assert_eq!(agreed["s1"], Voiced);
        assert_eq!(unmatched, 2);
        assert_eq!(ground_truth_coders(&recs), ["a", "b"]);
    }

    #[test]
    fn repeats_feed_the_intra_rater_kappa() {
        let mut recs = vec![];
        for (i, c) in [Voiced, Unvoiced, NonTarget, Voiced].into_iter().enumerate() {
            recs.push(rec("a", &format!("s{i}"), c));
            recs.push(rec("b", &format!("s{i}"), c));
        }
        recs.push(rec("a", "s0", Voiced));
        recs.push(rec("a", "s1", Unvoiced));
        let (a, b) = (coder_passes(&recs, "a"), coder_passes(&recs, "b"));
        let r = reliability_report(("a", &a), ("b", &b), Some(Unassignable)).unwrap();
        assert_eq!(r.compared, 4);
        assert!((r.kappa.kappa - 1.0).abs() < 1e-12);
        assert_eq!(r.intra_rater.len(), 1);
        assert_eq!(r.intra_rater[0].n, 2);
        assert!(r.to_text().starts_with("κ=1.000"));
    }
}
