//! Descriptive statistics, two-sample t-tests and boxplot summaries over
//! consensually labeled segments.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::pitch::F0Row;
use crate::scheme::AnnotationClass;
use crate::segmenter::Segment;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no values to summarize")]
    Empty,
    #[error("sample of size {n} is too small; need at least {required}")]
    TooSmall { n: usize, required: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("need exactly two groups, found {found}: {labels:?}")]
    GroupCount { found: usize, labels: Vec<String> },
    #[error("group {0:?} has no values after filtering")]
    EmptyGroup(String),
    #[error("group table has no column {0:?}")]
    MissingColumn(String),
    #[error("group table: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub total: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a singleton.
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(AnalyticsError::NonFinite(bad));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    let var = if values.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, var)
}

pub fn describe(values: &[f64]) -> Result<DescriptiveStats, AnalyticsError> {
    let sorted = sorted_finite(values)?;
    let (mean, var) = mean_var(&sorted);
    Ok(DescriptiveStats {
        n: sorted.len(),
        total: sorted.iter().sum(),
        mean,
        sd: var.sqrt(),
        median: quantile_sorted(&sorted, 0.5),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

/// Quantile of sorted data by linear interpolation at index `(n − 1)·q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    /// Equal-variance statistic, df = n_a + n_b − 2.
    #[default]
    Pooled,
    /// Unequal variances with Satterthwaite df.
    Welch,
}

impl fmt::Display for TTestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pooled => "pooled",
            Self::Welch => "welch",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub variant: TTestVariant,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

pub fn two_sample_t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult, AnalyticsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(AnalyticsError::TooSmall { n: s.len(), required: 2 });
        }
        if let Some(&bad) = s.iter().find(|v| !v.is_finite()) {
            return Err(AnalyticsError::NonFinite(bad));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let pooled_df = na + nb - 2.0;
    let (se, df) = match variant {
        TTestVariant::Pooled => {
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / pooled_df;
            ((sp2 * (1.0 / na + 1.0 / nb)).sqrt(), pooled_df)
        }
        TTestVariant::Welch => {
            let (ua, ub) = (va / na, vb / nb);
            let se2 = ua + ub;
            let df = if se2 > 0.0 {
                se2 * se2 / (ua * ua / (na - 1.0) + ub * ub / (nb - 1.0))
            } else {
                pooled_df
            };
            (se2.sqrt(), df)
        }
    };
    let diff = ma - mb;
    let (t, p) = if se == 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = diff / se;
        let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TTestResult { variant, t, df, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Ascending.
    pub outliers: Vec<f64>,
}

/// Quartiles plus 1.5·IQR whiskers.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, AnalyticsError> {
    let sorted = sorted_finite(values)?;
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |x: &&f64| **x >= lo_fence && **x <= hi_fence;
    // q1 and q3 lie between data points, so at least one datum is inside.
    let whisker_low = *sorted.iter().find(inside).expect("quartile range is populated");
    let whisker_high = *sorted.iter().rev().find(inside).expect("quartile range is populated");
    Ok(BoxplotStats {
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        iqr,
        whisker_low,
        whisker_high,
        outliers: sorted.iter().copied().filter(|x| !inside(&x)).collect(),
    })
}

/// One consensually labeled segment with the measures analysis needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub segment_id: String,
    /// Recording the segment was cut from.
    pub source: String,
    pub class: AnnotationClass,
    pub duration_s: f64,
    pub f0_hz: Option<f64>,
}

/// Joins the manifest with consensus labels and (optionally) f0 rows.
/// Segments without a consensus label are left out.
pub fn build_observations(
    segments: &[Segment],
    consensus: &BTreeMap<String, AnnotationClass>,
    f0: &[F0Row],
) -> Vec<Observation> {
    let f0: BTreeMap<&str, Option<f64>> = f0.iter().map(|r| (r.segment_id.as_str(), r.summary_f0_hz)).collect();
    segments
        .iter()
        .filter_map(|s| {
            let class = *consensus.get(&s.id)?;
            Some(Observation {
                segment_id: s.id.clone(),
                source: s.source.clone(),
                class,
                duration_s: s.duration_ms() / 1000.0,
                f0_hz: f0.get(s.id.as_str()).copied().flatten(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: AnnotationClass,
    pub name: String,
    pub count: usize,
    /// Summed duration in seconds.
    pub total_s: f64,
    /// Absent for classes with no segments.
    pub duration: Option<DescriptiveStats>,
}

/// Per-class count and duration summary over all five classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTable {
    pub rows: Vec<ClassRow>,
}

pub fn class_table(observations: &[Observation]) -> ClassTable {
    let rows = AnnotationClass::ALL
        .iter()
        .map(|&class| {
            let durations: Vec<f64> = observations
                .iter()
                .filter(|o| o.class == class)
                .map(|o| o.duration_s)
                .collect();
            let duration = describe(&durations).ok();
            ClassRow {
                class,
                name: class.name().to_string(),
                count: durations.len(),
                total_s: duration.as_ref().map_or(0.0, |d| d.total),
                duration,
            }
        })
        .collect();
    ClassTable { rows }
}

/// `mean (+/- sd) [median]` with two decimals.
pub fn mean_sd_median(stats: &DescriptiveStats) -> String {
    format!("{:.2} (+/- {:.2}) [{:.2}]", stats.mean, stats.sd, stats.median)
}

impl ClassTable {
    pub fn to_text(&self) -> String {
        let header = ["Class", "Count", "Total (s)", "Mean (+/- SD) [Median] (s)"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    format!("({}) {}", r.class.code(), r.name),
                    r.count.to_string(),
                    format!("{:.2}", r.total_s),
                    r.duration.as_ref().map_or_else(|| "-".to_string(), mean_sd_median),
                ]
            })
            .collect();
        render_table(&header, &body, &[false, true, true, false])
    }
}

fn render_table<const N: usize>(header: &[&str; N], body: &[[String; N]], right: &[bool; N]) -> String {
    let mut widths = header.map(str::len);
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths.iter().zip(right))
            .map(|(c, (&w, &r))| if r { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in body {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Segment duration in seconds.
    Duration,
    /// Segment f0 in Hz; segments without an estimate are dropped.
    F0,
}

impl Metric {
    fn unit(self) -> &'static str {
        match self {
            Self::Duration => "s",
            Self::F0 => "Hz",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Duration => "duration",
            Self::F0 => "f0",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "duration" => Ok(Self::Duration),
            "f0" => Ok(Self::F0),
            other => Err(format!("unknown metric {other:?}; expected duration or f0")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub stats: DescriptiveStats,
    pub boxplot: BoxplotStats,
}

/// Segments left out of a comparison, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub not_vocalization: usize,
    pub no_group: usize,
    pub no_f0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub metric: Metric,
    pub groups: Vec<GroupSummary>,
    pub test: TTestResult,
    pub excluded: Exclusions,
}

/// Compares a metric between the two groups of recordings named in `groups`
/// (recording id → group label), over class 1 and 2 segments only.
pub fn group_compare(
    observations: &[Observation],
    groups: &BTreeMap<String, String>,
    metric: Metric,
    variant: TTestVariant,
) -> Result<GroupComparison, AnalyticsError> {
    let mut excluded = Exclusions::default();
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for o in observations {
        if !o.class.is_vocalization() {
            excluded.not_vocalization += 1;
            continue;
        }
        let Some(label) = groups.get(&o.source) else {
            excluded.no_group += 1;
            continue;
        };
        let bucket = values.entry(label.as_str()).or_default();
        match metric {
            Metric::Duration => bucket.push(o.duration_s),
            Metric::F0 => match o.f0_hz {
                Some(f) => bucket.push(f),
                None => excluded.no_f0 += 1,
            },
        }
    }
    if values.len() != 2 {
        return Err(AnalyticsError::GroupCount {
            found: values.len(),
            labels: values.keys().map(|s| s.to_string()).collect(),
        });
    }
    if let Some((label, _)) = values.iter().find(|(_, v)| v.is_empty()) {
        return Err(AnalyticsError::EmptyGroup(label.to_string()));
    }
    let groups = values
        .iter()
        .map(|(label, v)| {
            Ok(GroupSummary {
                label: label.to_string(),
                stats: describe(v)?,
                boxplot: boxplot_stats(v)?,
            })
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    let mut iter = values.values();
    let (a, b) = (iter.next().unwrap(), iter.next().unwrap());
    let test = two_sample_t_test(a, b, variant)?;
    Ok(GroupComparison { metric, groups, test, excluded })
}

impl GroupComparison {
    pub fn to_text(&self) -> String {
        let unit = self.metric.unit();
        let header = ["Group", "n", "Mean (+/- SD) [Median]", "Min", "Max", "Outliers"];
        let body: Vec<[String; 6]> = self
            .groups
            .iter()
            .map(|g| {
                [
                    g.label.clone(),
                    g.stats.n.to_string(),
                    mean_sd_median(&g.stats),
                    format!("{:.2}", g.stats.min),
                    format!("{:.2}", g.stats.max),
                    g.boxplot.outliers.len().to_string(),
                ]
            })
            .collect();
        let mut out = format!("{} ({unit})\n", self.metric);
        out.push_str(&render_table(&header, &body, &[false, true, false, true, true, true]));
        let _ = writeln!(
            out,
            "two-sample t-test ({}): t = {:.4}, df = {:.2}, p = {:.4}",
            self.test.variant, self.test.t, self.test.df, self.test.p
        );
        let e = &self.excluded;
        let _ = writeln!(
            out,
            "excluded: {} other classes, {} without group, {} without f0",
            e.not_vocalization, e.no_group, e.no_f0
        );
        out
    }
}

/// Reads a group table keyed by recording id (column `recording_id`) and
/// returns the `field` column as recording → label. Blank labels are skipped.
pub fn read_group_csv<R: Read>(input: R, field: &str) -> Result<BTreeMap<String, String>, AnalyticsError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| AnalyticsError::MissingColumn(name.to_string()))
    };
    let (id_col, field_col) = (column("recording_id")?, column(field)?);
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(id_col).unwrap_or("").trim();
        let label = record.get(field_col).unwrap_or("").trim();
        if !id.is_empty() && !label.is_empty() {
            out.insert(id.to_string(), label.to_string());
        }
    }
    Ok(out)
}
