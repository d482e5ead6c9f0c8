//! Pearson correlation, simple linear regression and grouped summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PerProteinScores;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Centered sums (sxx, syy, sxy) and means.
fn moments(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewProteins(x.len()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    Ok((mx, my, sxx, syy, sxy))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (_, _, sxx, syy, sxy) = moments(x, y)?;
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// Absent when `y` is constant.
    pub pearson_r: Option<f64>,
    pub n: usize,
}

/// Least-squares line through `(x, y)`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    let (mx, my, sxx, syy, sxy) = moments(x, y)?;
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    let pearson_r = (syy != 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0));
    Ok(RegressionFit {
        slope,
        intercept: my - slope * mx,
        pearson_r,
        n: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.values) {
            out.push_str(l);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise Pearson coefficients between ID-aligned score lists.
pub fn correlation_matrix(lists: &[(String, PerProteinScores)]) -> Result<CorrelationMatrix> {
    if let Some((first_label, first)) = lists.first() {
        for (label, s) in &lists[1..] {
            if s.len() != first.len() || s.ids().zip(first.ids()).any(|(a, b)| a != b) {
                return Err(Error::IdSetMismatch(format!("{label} vs {first_label}")));
            }
        }
    }
    let vectors: Vec<Vec<f64>> = lists.iter().map(|(_, s)| s.values()).collect();
    let k = lists.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                pearson(&vectors[i], &vectors[i]).map(|_| 1.0)?
            } else {
                pearson(&vectors[i], &vectors[j])?
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: lists.iter().map(|(l, _)| l.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainGroup {
    Single,
    Multiple,
}

impl ChainGroup {
    pub fn from_chain_count(n: usize) -> Self {
        if n > 1 {
            ChainGroup::Multiple
        } else {
            ChainGroup::Single
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary<G> {
    pub group: G,
    pub n: usize,
    pub stats: Option<Summary>,
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Five-number summary plus mean. Quartiles are Tukey hinges: medians of the
/// lower and upper halves, each half including the median when `n` is odd.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let half = n.div_ceil(2);
    // Mean taken relative to the minimum so constant inputs are reproduced exactly.
    let shift = xs[0];
    let offset = xs.iter().map(|x| x - shift).sum::<f64>() / n as f64;
    Some(Summary {
        mean: shift + offset,
        median: median_sorted(&xs),
        q1: median_sorted(&xs[..half]),
        q3: median_sorted(&xs[n - half..]),
        min: xs[0],
        max: xs[n - 1],
    })
}

/// Summaries of the scores in each of `groups`, in the order given. Groups
/// with no members report `n = 0` and no statistics.
pub fn group_summary<G, F>(scores: &PerProteinScores, groups: &[G], group_of: F) -> Result<Vec<GroupSummary<G>>>
where
    G: Ord + Clone,
    F: Fn(&str) -> Option<G>,
{
    let mut buckets: BTreeMap<G, Vec<f64>> = BTreeMap::new();
    for (id, s) in &scores.entries {
        let g = group_of(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        buckets.entry(g).or_default().push(*s);
    }
    Ok(groups
        .iter()
        .map(|g| {
            let values = buckets.get(g).map(Vec::as_slice).unwrap_or(&[]);
            GroupSummary {
                group: g.clone(),
                n: values.len(),
                stats: summarize(values),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_hand_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap(), -1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), 0.5);
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(2, 1))));
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ols_hand_cases() {
        let f = ols_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert_eq!((f.slope, f.intercept, f.pearson_r), (2.0, 1.0, Some(1.0)));
        let f = ols_fit(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((f.slope, f.pearson_r), (0.0, None));
        assert!(matches!(ols_fit(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ZeroVariance)));
    }

    fn scores(pairs: &[(&str, f64)]) -> PerProteinScores {
        PerProteinScores::from_entries(pairs.iter().map(|(i, s)| (i.to_string(), *s)).collect()).unwrap()
    }

    #[test]
    fn correlation_matrix_cases() {
        let a = scores(&[("A", 1.0), ("B", 2.0), ("C", 4.0)]);
        let b = scores(&[("A", -1.0), ("B", -2.0), ("C", -4.0)]);
        let m = correlation_matrix(&[("a".into(), a.clone()), ("b".into(), b)]).unwrap();
        assert_eq!(m.values, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert_eq!(m.to_csv(), "label,a,b\na,1,-1\nb,-1,1\n");

        let c = scores(&[("A", 1.0), ("B", 2.0), ("D", 4.0)]);
        assert!(matches!(
            correlation_matrix(&[("a".into(), a), ("c".into(), c)]),
            Err(Error::IdSetMismatch(_))
        ));
    }

    #[test]
    fn tukey_quartiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.median, s.q1, s.q3), (2.5, 1.5, 3.5));
        assert_eq!((s.min, s.max, s.mean), (1.0, 4.0, 2.5));
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.median, s.q1, s.q3), (3.0, 2.0, 4.0));
        let s = summarize(&[0.7; 6]).unwrap();
        assert!([s.mean, s.median, s.q1, s.q3, s.min, s.max].iter().all(|&v| v == 0.7));
    }

    #[test]
    fn empty_group_is_reported() {
        let sc = scores(&[("A", 0.1), ("B", 0.3)]);
        let out = group_summary(&sc, &[ChainGroup::Single, ChainGroup::Multiple], |_| {
            Some(ChainGroup::Single)
        })
        .unwrap();
        assert_eq!(out[0].n, 2);
        assert_eq!(out[1].n, 0);
        assert!(out[1].stats.is_none());
        assert!(group_summary(&sc, &[ChainGroup::Single], |_| None::<ChainGroup>).is_err());
    }
}
