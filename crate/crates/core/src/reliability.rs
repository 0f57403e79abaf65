//! Paired-rating cross-tabulation and Cohen's kappa.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scheme::AnnotationClass;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("rating sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("unknown class code {0}")]
    UnknownClass(u8),
    #[error("class {0} is not part of this matrix")]
    ClassNotInMatrix(u8),
    #[error("matrix holds no rated pairs")]
    Empty,
    #[error("kappa is undefined: chance agreement is 1")]
    Degenerate,
    #[error("the two passes share no rated items")]
    EmptyIntersection,
    #[error("matrix must be square with one row per class label")]
    Shape,
}

/// Counts of paired ratings; rows are coder A, columns coder B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<AnnotationClass>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(class_labels: Vec<AnnotationClass>, counts: Vec<Vec<u64>>) -> Result<Self, ReliabilityError> {
        let k = class_labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(ReliabilityError::Shape);
        }
        Ok(Self { class_labels, counts })
    }

    pub fn zeros(class_labels: Vec<AnnotationClass>) -> Self {
        let k = class_labels.len();
        Self {
            class_labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn size(&self) -> usize {
        self.class_labels.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.counts[i][i]).sum()
    }

    pub fn off_diagonal(&self) -> u64 {
        self.total() - self.trace()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.size()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn index_of(&self, class: AnnotationClass) -> Option<usize> {
        self.class_labels.iter().position(|&c| c == class)
    }

    /// Coder roles swapped.
    pub fn transpose(&self) -> Self {
        let k = self.size();
        Self {
            class_labels: self.class_labels.clone(),
            counts: (0..k).map(|i| (0..k).map(|j| self.counts[j][i]).collect()).collect(),
        }
    }

    /// True when no kappa can be computed from this matrix.
    pub fn is_unusable(&self) -> bool {
        self.total() == 0
    }

    /// CSV with a header row of class codes and one labeled row per class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a\\b");
        for c in &self.class_labels {
            out.push_str(&format!(",{}", c.code()));
        }
        out.push('\n');
        for (c, row) in self.class_labels.iter().zip(&self.counts) {
            out.push_str(&c.code().to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Cross-tabulates two aligned rating sequences over all five classes.
pub fn confusion_matrix(ratings_a: &[u8], ratings_b: &[u8]) -> Result<ConfusionMatrix, ReliabilityError> {
    if ratings_a.len() != ratings_b.len() {
        return Err(ReliabilityError::LengthMismatch(ratings_a.len(), ratings_b.len()));
    }
    let mut m = ConfusionMatrix::zeros(AnnotationClass::ALL.to_vec());
    for (&a, &b) in ratings_a.iter().zip(ratings_b) {
        let i = AnnotationClass::from_code(a).map_err(|_| ReliabilityError::UnknownClass(a))?;
        let j = AnnotationClass::from_code(b).map_err(|_| ReliabilityError::UnknownClass(b))?;
        m.counts[i.code() as usize - 1][j.code() as usize - 1] += 1;
    }
    Ok(m)
}

/// Cross-tabulates two label maps over the items both coders rated.
pub fn confusion_from_maps<K: Ord>(
    a: &BTreeMap<K, AnnotationClass>,
    b: &BTreeMap<K, AnnotationClass>,
) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::zeros(AnnotationClass::ALL.to_vec());
    for (k, ca) in a {
        if let Some(cb) = b.get(k) {
            m.counts[ca.code() as usize - 1][cb.code() as usize - 1] += 1;
        }
    }
    m
}

/// Standard-error estimator for kappa.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeEstimator {
    /// `sqrt(po(1-po) / (N(1-pe)^2))`.
    #[default]
    LargeSample,
    /// Fleiss, Cohen and Everitt asymptotic variance.
    FleissCohenEveritt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub po: f64,
    pub pe: f64,
    pub n: u64,
}

impl fmt::Display for KappaResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kappa={:.3}, 95% CI [{:.3}, {:.3}] (se {:.4}, po {:.3}, pe {:.3}, n {})",
            self.kappa, self.ci_low, self.ci_high, self.se, self.po, self.pe, self.n
        )
    }
}

pub fn cohen_kappa(matrix: &ConfusionMatrix) -> Result<KappaResult, ReliabilityError> {
    cohen_kappa_with(matrix, SeEstimator::LargeSample)
}

pub fn cohen_kappa_with(matrix: &ConfusionMatrix, estimator: SeEstimator) -> Result<KappaResult, ReliabilityError> {
    let n = matrix.total();
    if n == 0 {
        return Err(ReliabilityError::Empty);
    }
    let nf = n as f64;
    let rows: Vec<f64> = matrix.row_totals().iter().map(|&r| r as f64 / nf).collect();
    let cols: Vec<f64> = matrix.col_totals().iter().map(|&c| c as f64 / nf).collect();
    let po = matrix.trace() as f64 / nf;
    let pe: f64 = rows.iter().zip(&cols).map(|(r, c)| r * c).sum();
    if pe >= 1.0 - 1e-12 {
        return Err(ReliabilityError::Degenerate);
    }
    let kappa = (po - pe) / (1.0 - pe);
    let var = match estimator {
        SeEstimator::LargeSample => po * (1.0 - po) / (nf * (1.0 - pe).powi(2)),
        SeEstimator::FleissCohenEveritt => {
            let k = matrix.size();
            let p = |i: usize, j: usize| matrix.counts[i][j] as f64 / nf;
            let diag: f64 = (0..k)
                .map(|i| p(i, i) * ((1.0 - pe) - (rows[i] + cols[i]) * (1.0 - po)).powi(2))
                .sum();
            let mut off = 0.0;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        off += p(i, j) * (cols[i] + rows[j]).powi(2);
                    }
                }
            }
            let correction = (po * pe - 2.0 * pe + po).powi(2);
            (diag + (1.0 - po).powi(2) * off - correction) / (nf * (1.0 - pe).powi(4))
        }
    };
    let se = var.max(0.0).sqrt();
    Ok(KappaResult {
        kappa,
        se,
        ci_low: (kappa - Z_95 * se).max(-1.0),
        ci_high: (kappa + Z_95 * se).min(1.0),
        po,
        pe,
        n,
    })
}

/// Drops every pair in which either coder used `excluded`.
pub fn exclude_class_pairs(matrix: &ConfusionMatrix, excluded: AnnotationClass) -> Result<ConfusionMatrix, ReliabilityError> {
    let idx = matrix
        .index_of(excluded)
        .ok_or(ReliabilityError::ClassNotInMatrix(excluded.code()))?;
    let keep: Vec<usize> = (0..matrix.size()).filter(|&i| i != idx).collect();
    Ok(ConfusionMatrix {
        class_labels: keep.iter().map(|&i| matrix.class_labels[i]).collect(),
        counts: keep
            .iter()
            .map(|&i| keep.iter().map(|&j| matrix.counts[i][j]).collect())
            .collect(),
    })
}

/// Agreement counts with the role of an explicit "uncertain" class broken out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementBreakdown {
    pub n: u64,
    pub consensual: u64,
    pub consensual_pct: f64,
    pub disagreements: u64,
    pub disagreements_pct: f64,
    pub uncertainty_class: AnnotationClass,
    /// Items where at least one coder chose the uncertainty class.
    pub at_least_one_uncertain: u64,
    pub at_least_one_uncertain_pct: f64,
    pub coder_a_uncertain: u64,
    pub coder_b_uncertain: u64,
    /// Items both coders put into the uncertainty class.
    pub uncertain_overlap: u64,
    /// Off-diagonal items where exactly one coder chose the uncertainty class.
    pub disagreements_with_uncertain: u64,
    /// Off-diagonal items where neither coder chose the uncertainty class.
    pub disagreements_without_uncertain: u64,
    pub notes: Vec<String>,
}

pub fn agreement_breakdown(
    matrix: &ConfusionMatrix,
    uncertainty_class: AnnotationClass,
) -> Result<AgreementBreakdown, ReliabilityError> {
    let n = matrix.total();
    if n == 0 {
        return Err(ReliabilityError::Empty);
    }
    let u = matrix
        .index_of(uncertainty_class)
        .ok_or(ReliabilityError::ClassNotInMatrix(uncertainty_class.code()))?;
    let pct = |v: u64| 100.0 * v as f64 / n as f64;
    let consensual = matrix.trace();
    let disagreements = n - consensual;
    let coder_a_uncertain = matrix.row_totals()[u];
    let coder_b_uncertain = matrix.col_totals()[u];
    let uncertain_overlap = matrix.counts[u][u];
    let at_least_one_uncertain = coder_a_uncertain + coder_b_uncertain - uncertain_overlap;
    let disagreements_with_uncertain = at_least_one_uncertain - uncertain_overlap;
    let disagreements_without_uncertain = disagreements - disagreements_with_uncertain;

    let mut notes = Vec::new();
    if uncertain_overlap > 0 {
        notes.push(format!(
            "per-coder class-{code} totals ({coder_a_uncertain}, {coder_b_uncertain}) include the \
             {uncertain_overlap} items both coders put into class {code}; disagreements involving \
             class {code} number {disagreements_with_uncertain}, not either total",
            code = uncertainty_class.code()
        ));
    }
    Ok(AgreementBreakdown {
        n,
        consensual,
        consensual_pct: pct(consensual),
        disagreements,
        disagreements_pct: pct(disagreements),
        uncertainty_class,
        at_least_one_uncertain,
        at_least_one_uncertain_pct: pct(at_least_one_uncertain),
        coder_a_uncertain,
        coder_b_uncertain,
        uncertain_overlap,
        disagreements_with_uncertain,
        disagreements_without_uncertain,
        notes,
    })
}

impl AgreementBreakdown {
    pub fn percent_agreement(&self) -> f64 {
        self.consensual_pct
    }
}

/// Test-retest kappa of one coder over the items rated in both passes.
pub fn intra_rater_kappa<K: Ord>(
    pass1: &BTreeMap<K, AnnotationClass>,
    pass2: &BTreeMap<K, AnnotationClass>,
) -> Result<KappaResult, ReliabilityError> {
    let m = confusion_from_maps(pass1, pass2);
    if m.total() == 0 {
        return Err(ReliabilityError::EmptyIntersection);
    }
    cohen_kappa(&m)
}
