//! Statistical primitives: Cohen's kappa, Pearson correlation, the Friedman
//! test with Nemenyi post-hoc critical differences, and the paired Wilcoxon
//! signed-rank test used by the cost-region analysis.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Chance-corrected agreement between two label vectors.
///
/// `kappa = (p_o - p_e) / (1 - p_e)` with observed agreement `p_o` and chance
/// agreement `p_e` from the marginal label distributions. When both vectors
/// are constant and identical (`p_e = 1`, `p_o = 1`) the agreement is perfect
/// and 1 is returned.
pub fn cohen_kappa(p: &[u32], q: &[u32]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyInput("kappa label vectors".into()));
    }
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "kappa length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let n = p.len() as f64;
    let observed = p.iter().zip(q).filter(|(a, b)| a == b).count() as f64 / n;
    let mut marg_p: HashMap<u32, f64> = HashMap::new();
    let mut marg_q: HashMap<u32, f64> = HashMap::new();
    for (&a, &b) in p.iter().zip(q) {
        *marg_p.entry(a).or_default() += 1.0;
        *marg_q.entry(b).or_default() += 1.0;
    }
    let expected: f64 = marg_p
        .iter()
        .map(|(label, cp)| cp / n * marg_q.get(label).copied().unwrap_or(0.0) / n)
        .sum();
    if (1.0 - expected).abs() < 1e-15 {
        return Ok(if (observed - 1.0).abs() < 1e-15 {
            1.0
        } else {
            0.0
        });
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Product-moment correlation of two equally long, nonconstant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "pearson length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs at least 2 observations".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "input series is constant".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Matched problems (rows) by criteria (columns) matrix of costs or ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl RankMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "rank matrix needs {} entries, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "rank matrix entries must be finite".into(),
            ));
        }
        Ok(RankMatrix {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.n_cols..(r + 1) * self.n_cols]
    }

    /// Per-column mean of the within-row average ranks (rank 1 = smallest).
    pub fn mean_ranks(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for (j, rank) in average_ranks(self.row(r)).into_iter().enumerate() {
                sums[j] += rank;
            }
        }
        sums.iter().map(|s| s / self.n_rows as f64).collect()
    }
}

/// Ranks a slice ascending, assigning tied values the mean of their positions
/// (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman chi-square test over a problems-by-criteria cost matrix.
///
/// Rows are ranked with average-rank tie handling; the statistic is
/// `12N/(k(k+1)) * sum_j (R_j - (k+1)/2)^2` with its chi-square p-value at
/// `k - 1` degrees of freedom.
pub fn friedman(costs: &RankMatrix) -> Result<(f64, f64)> {
    let (n, k) = (costs.n_rows(), costs.n_cols());
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(
            "friedman needs at least 2 problems and 2 criteria".into(),
        ));
    }
    let mean_ranks = costs.mean_ranks();
    let center = (k as f64 + 1.0) / 2.0;
    let spread: f64 = mean_ranks.iter().map(|r| (r - center) * (r - center)).sum();
    let stat = (12.0 * n as f64 / (k as f64 * (k as f64 + 1.0)) * spread).max(0.0);
    let dist = ChiSquared::new((k - 1) as f64)
        .map_err(|e| Error::InvalidArgument(format!("chi-square: {e}")))?;
    let p = (1.0 - dist.cdf(stat)).clamp(0.0, 1.0);
    Ok((stat, p))
}

/// Studentized-range-based q values at alpha = 0.05 for k = 2..=20, as used
/// in critical-difference diagrams.
const NEMENYI_Q_05: [f64; 19] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948319, 3.030879, 3.101730, 3.163684,
    3.218654, 3.268004, 3.312739, 3.353618, 3.391230, 3.426041, 3.458425, 3.488685, 3.517073,
    3.543799,
];

/// Nemenyi critical difference `CD = q_alpha(k) * sqrt(k(k+1)/(6N))`.
///
/// Only `alpha = 0.05` is supported; the q table is embedded for k in 2..=20.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if alpha != 0.05 {
        return Err(Error::InvalidArgument(format!(
            "only alpha = 0.05 is supported, got {alpha}"
        )));
    }
    if !(2..=20).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "nemenyi q table covers k in 2..=20, got {k}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one problem".into()));
    }
    let q = NEMENYI_Q_05[k - 2];
    Ok(q * (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Mean ranks, critical difference, and grouping bars for a CD diagram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdDiagram {
    /// Column indices sorted by mean rank (best first).
    pub order: Vec<usize>,
    /// Mean ranks aligned with `order`.
    pub mean_ranks: Vec<f64>,
    pub cd: f64,
    /// Maximal groups of not-significantly-different columns, as inclusive
    /// index ranges into `order`.
    pub groups: Vec<(usize, usize)>,
    pub friedman_stat: f64,
    pub friedman_p: f64,
}

/// Computes CD-diagram data: columns sorted by mean rank plus the maximal
/// groups whose pairwise mean-rank differences stay below the critical
/// difference. When the Friedman test does not reject at `alpha`, all columns
/// fall into a single group.
pub fn cd_diagram_data(costs: &RankMatrix, alpha: f64) -> Result<CdDiagram> {
    let (stat, p) = friedman(costs)?;
    let cd = nemenyi_cd(costs.n_cols(), costs.n_rows(), alpha)?;
    let means = costs.mean_ranks();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&j| means[j]).collect();

    let groups = if p >= alpha {
        vec![(0, order.len() - 1)]
    } else {
        let mut groups = Vec::new();
        let mut prev_end: Option<usize> = None;
        for start in 0..sorted.len() {
            let mut end = start;
            while end + 1 < sorted.len() && sorted[end + 1] - sorted[start] < cd {
                end += 1;
            }
            if prev_end.is_none_or(|pe| end > pe) {
                groups.push((start, end));
                prev_end = Some(end);
            }
        }
        groups
    };

    Ok(CdDiagram {
        order,
        mean_ranks: sorted,
        cd,
        groups,
        friedman_stat: stat,
        friedman_p: p,
    })
}

/// Two-sided paired Wilcoxon signed-rank test (normal approximation with tie
/// and continuity corrections). Returns `(W, p)` where `W = min(W+, W-)`.
/// Zero differences are dropped; if none remain the samples are
/// indistinguishable and `p = 1`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "wilcoxon length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok((0.0, 1.0));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let mean = total / 2.0;
    // tie correction: subtract sum(t^3 - t)/48 over tied groups of |d|
    let mut sorted_abs = abs.clone();
    sorted_abs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted_abs.len() {
        let mut j = i;
        while j + 1 < sorted_abs.len() && sorted_abs[j + 1] == sorted_abs[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n as f64 * (n as f64 + 1.0) * (2.0 * n as f64 + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok((w, 1.0));
    }
    let z = (w - mean + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * normal.cdf(z)).clamp(0.0, 1.0);
    Ok((w, p))
}
