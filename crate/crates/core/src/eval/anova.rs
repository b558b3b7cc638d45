//! One-way ANOVA and Tukey HSD pairwise comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::special::{f_cdf, studentized_range_cdf};

/// One-way ANOVA outcome.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ms_within: f64,
}

fn validate_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::Metric("anova needs at least 2 groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Metric("every group needs at least 2 samples".into()));
    }
    Ok(())
}

/// Classic one-way F test. With zero within-group variance: p = 1 when all
/// group means coincide, otherwise F is reported as infinite with p = 0.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    validate_groups(groups)?;
    let k = groups.len();
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let grand: f64 = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, &m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, &m)| g.iter().map(|&x| (x - m) * (x - m)).sum::<f64>())
        .sum();
    let df_between = (k - 1) as f64;
    let df_within = (n_total - k) as f64;
    let ms_between = ss_between / df_between;
    let ms_within = ss_within / df_within;
    let (f_statistic, p_value) = if ms_within == 0.0 {
        if ms_between <= f64::EPSILON * grand.abs().max(1.0) {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ms_between / ms_within;
        (f, 1.0 - f_cdf(f, df_between, df_within))
    };
    Ok(AnovaResult {
        f_statistic,
        p_value,
        df_between,
        df_within,
        ms_within,
    })
}

/// One pairwise Tukey comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group_a: usize,
    pub group_b: usize,
    /// mean(a) - mean(b), signed.
    pub mean_diff: f64,
    pub q_statistic: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// All-pairs Tukey HSD table at the given significance level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TukeyTable {
    pub alpha: f64,
    pub pairs: Vec<TukeyPair>,
}

impl TukeyTable {
    pub fn pair(&self, a: usize, b: usize) -> Option<&TukeyPair> {
        self.pairs
            .iter()
            .find(|p| (p.group_a == a && p.group_b == b) || (p.group_a == b && p.group_b == a))
    }
}

/// Tukey-Kramer HSD with p-values from the studentized range distribution.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<TukeyTable> {
    validate_groups(groups)?;
    let anova = anova_oneway(groups)?;
    let k = groups.len();
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let mean_diff = means[a] - means[b];
            let se = (anova.ms_within / 2.0
                * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64))
                .sqrt();
            let (q, p) = if se == 0.0 {
                if mean_diff.abs() <= f64::EPSILON * means[a].abs().max(1.0) {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let q = mean_diff.abs() / se;
                (q, 1.0 - studentized_range_cdf(q, k, anova.df_within))
            };
            pairs.push(TukeyPair {
                group_a: a,
                group_b: b,
                mean_diff,
                q_statistic: q,
                p_adjusted: p,
                significant: p < alpha,
            });
        }
    }
    Ok(TukeyTable { alpha, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups_give_f_zero_p_one() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let r = anova_oneway(&g).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn degenerate_separation_gives_p_zero() {
        let g = vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let r = anova_oneway(&g).unwrap();
        assert!(r.f_statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn textbook_three_group_decomposition() {
        // Hand-computed sums of squares:
        // groups: [4,5,6], [7,8,9], [10,11,12]; grand mean 8.
        // ss_between = 3*(5-8)^2 + 3*(8-8)^2 + 3*(11-8)^2 = 54
        // ss_within  = 3 * 2 = 6; df = (2, 6); F = 27/1 = 27.
        let g = vec![
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
            vec![10.0, 11.0, 12.0],
        ];
        let r = anova_oneway(&g).unwrap();
        assert!((r.f_statistic - 27.0).abs() < 1e-12);
        assert!(r.p_value > 0.0 && r.p_value < 0.01);
    }

    #[test]
    fn anova_errors() {
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0], vec![2.0, 3.0]]).is_err());
    }

    #[test]
    fn tukey_identical_groups_all_p_one() {
        let g = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let t = tukey_hsd(&g, 0.05).unwrap();
        assert_eq!(t.pairs.len(), 3);
        for p in &t.pairs {
            assert!((p.p_adjusted - 1.0).abs() < 1e-9, "p={}", p.p_adjusted);
            assert!(!p.significant);
        }
    }

    #[test]
    fn tukey_outlier_group_significant_against_both() {
        // Two close groups and one far-away group.
        let g = vec![
            vec![0.1, -0.1, 0.05, -0.05, 0.0],
            vec![0.15, -0.02, 0.08, 0.02, -0.08],
            vec![5.0, 5.1, 4.9, 5.05, 4.95],
        ];
        let t = tukey_hsd(&g, 0.05).unwrap();
        assert!(t.pair(0, 2).unwrap().significant);
        assert!(t.pair(1, 2).unwrap().significant);
        assert!(!t.pair(0, 1).unwrap().significant);
    }

    #[test]
    fn tukey_p_monotone_in_mean_difference() {
        // Same variances and sizes; growing separation must not increase p.
        let base = [0.4, -0.3, 0.1, -0.2, 0.0];
        let mut last_p = 1.0;
        for shift in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let g = vec![
                base.to_vec(),
                base.iter().map(|x| x + shift).collect::<Vec<_>>(),
            ];
            let t = tukey_hsd(&g, 0.05).unwrap();
            let p = t.pairs[0].p_adjusted;
            assert!(p <= last_p + 1e-12, "shift {shift}: {p} > {last_p}");
            last_p = p;
        }
    }

    #[test]
    fn constant_shift_invariance() {
        let g = vec![
            vec![1.0, 2.0, 1.5, 2.5],
            vec![2.0, 3.0, 2.5, 3.5],
            vec![4.0, 5.0, 4.5, 5.5],
        ];
        let shifted: Vec<Vec<f64>> = g
            .iter()
            .map(|grp| grp.iter().map(|x| x + 1234.5).collect())
            .collect();
        let a = anova_oneway(&g).unwrap();
        let b = anova_oneway(&shifted).unwrap();
        assert!((a.f_statistic - b.f_statistic).abs() < 1e-9);
        assert!((a.p_value - b.p_value).abs() < 1e-9);
        let ta = tukey_hsd(&g, 0.05).unwrap();
        let tb = tukey_hsd(&shifted, 0.05).unwrap();
        for (x, y) in ta.pairs.iter().zip(&tb.pairs) {
            assert!((x.q_statistic - y.q_statistic).abs() < 1e-9);
            assert!((x.p_adjusted - y.p_adjusted).abs() < 1e-9);
        }
    }
}
