//! Family-level significance testing: one-sided paired t-tests and
//! Benjamini-Hochberg multiple-testing adjustment.
//!
//! The Student-t upper tail is self-contained: it goes through the
//! regularized incomplete beta function `I_x(a, b)` with
//! `x = df / (df + t^2)`, `a = df/2`, `b = 1/2`, evaluated by Lentz's
//! continued fraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("degrees of freedom must be >= 1")]
    InvalidDf,
    #[error("paired test needs at least 2 differences, got {n}")]
    TooFewPairs { n: usize },
    #[error("non-finite difference in paired sample")]
    NonFinite,
    #[error("p-value {value} outside [0, 1]")]
    PValueOutOfRange { value: f64 },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma(x: f64) -> f64 {
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Lentz's continued fraction for the incomplete beta function.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-12;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;

        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`, switching to the
/// symmetric tail when `x > (a + 1) / (a + b + 2)` for fast convergence.
fn inc_beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper-tail probability `P(T > t)` of Student's t with `df` degrees of
/// freedom.
pub fn t_sf(t: f64, df: u32) -> Result<f64, StatsError> {
    if df < 1 {
        return Err(StatsError::InvalidDf);
    }
    let dff = df as f64;
    let x = dff / (dff + t * t);
    let ib = inc_beta_reg(dff / 2.0, 0.5, x);
    Ok(if t >= 0.0 { 0.5 * ib } else { 1.0 - 0.5 * ib })
}

/// One-sided paired t-test result (alternative: mean difference > 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub df: u32,
    pub p: f64,
    pub n: usize,
    pub mean: f64,
}

/// One-sided paired t-test on a sample of differences; `t = mean / (sd / sqrt(n))`
/// with the sample standard deviation (`n - 1` denominator), `df = n - 1`.
///
/// Degenerate zero-variance samples short-circuit: p is 0, 0.5 or 1 by the
/// sign of the mean.
pub fn paired_t_one_sided(diffs: &[f64]) -> Result<PairedTTest, StatsError> {
    let n = diffs.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs { n });
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = (n - 1) as u32;
    if sd == 0.0 {
        let (t, p) = if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        };
        return Ok(PairedTTest { t, df, p, n, mean });
    }
    let t = mean / (sd / nf.sqrt());
    let p = t_sf(t, df)?;
    Ok(PairedTTest { t, df, p, n, mean })
}

/// Benjamini-Hochberg step-up adjustment. Sorts ascending, takes
/// `min_{j >= i} (p_(j) * m / j)` clamped to 1, and maps the adjusted
/// values back to the input order.
pub fn bh_adjust(pvals: &[f64]) -> Result<Vec<f64>, StatsError> {
    for &p in pvals {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::PValueOutOfRange { value: p });
        }
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].partial_cmp(&pvals[j]).unwrap().then(i.cmp(&j)));
    let mut adjusted = vec![0.0f64; m];
    let mut running_min = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        let scaled = (pvals[i] * m as f64 / (rank + 1) as f64).min(1.0);
        running_min = running_min.min(scaled);
        adjusted[i] = running_min;
    }
    Ok(adjusted)
}

/// What counts as one paired difference in the family test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairUnit {
    /// Every (model, dataset) pair contributes one difference.
    PerModelDataset,
    /// Models within a family are averaged per dataset first.
    PerDatasetMean,
}

impl std::fmt::Display for PairUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairUnit::PerModelDataset => write!(f, "per-model-dataset"),
            PairUnit::PerDatasetMean => write!(f, "per-dataset-mean"),
        }
    }
}

/// One (model, dataset) observation feeding a family's paired sample.
/// `difference` is kappa on the successfully-predicted subset minus kappa
/// on the rest; `None` when either subset had no records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetObservation {
    pub family: String,
    pub model: String,
    pub dataset: String,
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: String,
    pub n_models: usize,
    pub n_pairs: usize,
    pub mean_diff: Option<f64>,
    pub t_stat: Option<f64>,
    pub df: Option<u32>,
    pub p_raw: Option<f64>,
    pub p_adjusted: Option<f64>,
}

impl FamilyRow {
    pub fn testable(&self) -> bool {
        self.p_raw.is_some()
    }
}

/// Per-family test table, sorted by raw p-value (not-testable rows last).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyTable {
    pub unit: PairUnit,
    pub rows: Vec<FamilyRow>,
}

impl FamilyTable {
    pub fn testable_count(&self) -> usize {
        self.rows.iter().filter(|r| r.testable()).count()
    }

    pub fn row(&self, family: &str) -> Option<&FamilyRow> {
        self.rows.iter().find(|r| r.family == family)
    }
}

/// One paired test per family over its usable differences, then a
/// Benjamini-Hochberg adjustment across the testable families (families
/// with fewer than 2 usable pairs are reported but excluded from `m`).
pub fn family_analysis(
    observations: &[SubsetObservation],
    unit: PairUnit,
) -> Result<FamilyTable, StatsError> {
    let mut by_family: BTreeMap<&str, Vec<&SubsetObservation>> = BTreeMap::new();
    for obs in observations {
        by_family.entry(&obs.family).or_default().push(obs);
    }

    let mut rows = Vec::new();
    for (family, obs) in &by_family {
        let mut models: Vec<&str> = obs.iter().map(|o| o.model.as_str()).collect();
        models.sort_unstable();
        models.dedup();

        let diffs: Vec<f64> = match unit {
            PairUnit::PerModelDataset => {
                obs.iter().filter_map(|o| o.difference).collect()
            }
            PairUnit::PerDatasetMean => {
                let mut by_dataset: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
                for o in obs {
                    if let Some(d) = o.difference {
                        by_dataset.entry(&o.dataset).or_default().push(d);
                    }
                }
                by_dataset
                    .values()
                    .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                    .collect()
            }
        };

        let mut row = FamilyRow {
            family: family.to_string(),
            n_models: models.len(),
            n_pairs: diffs.len(),
            mean_diff: None,
            t_stat: None,
            df: None,
            p_raw: None,
            p_adjusted: None,
        };
        if diffs.len() >= 2 {
            let test = paired_t_one_sided(&diffs)?;
            row.mean_diff = Some(test.mean);
            row.t_stat = Some(test.t);
            row.df = Some(test.df);
            row.p_raw = Some(test.p);
        } else if diffs.len() == 1 {
            row.mean_diff = Some(diffs[0]);
        }
        rows.push(row);
    }

    let testable: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].testable()).collect();
    let raw: Vec<f64> = testable.iter().map(|&i| rows[i].p_raw.unwrap()).collect();
    let adjusted = bh_adjust(&raw)?;
    for (&i, &adj) in testable.iter().zip(adjusted.iter()) {
        rows[i].p_adjusted = Some(adj);
    }

    rows.sort_by(|a, b| match (a.p_raw, b.p_raw) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap().then(a.family.cmp(&b.family)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.family.cmp(&b.family),
    });

    Ok(FamilyTable { unit, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn df1_closed_form(t: f64) -> f64 {
        0.5 - t.atan() / std::f64::consts::PI
    }

    fn df2_closed_form(t: f64) -> f64 {
        0.5 * (1.0 - t / (2.0 + t * t).sqrt())
    }

    #[test]
    fn t_sf_at_zero_is_half() {
        for df in [1, 2, 5, 30, 200] {
            assert!((t_sf(0.0, df).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn t_sf_df1_is_cauchy() {
        assert!((t_sf(1.0, 1).unwrap() - 0.25).abs() < 1e-12);
        for i in -40..=40 {
            let t = i as f64 / 4.0;
            assert!((t_sf(t, 1).unwrap() - df1_closed_form(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn t_sf_df2_closed_form() {
        let p = t_sf(3.4641, 2).unwrap();
        assert!((p - df2_closed_form(3.4641)).abs() < 1e-10);
        assert!((p - 0.03709).abs() < 5e-6);
    }

    #[test]
    fn t_sf_symmetry() {
        for df in [1u32, 2, 7, 50, 200] {
            for i in -30..=30 {
                let t = i as f64 / 3.0;
                let s = t_sf(t, df).unwrap() + t_sf(-t, df).unwrap();
                assert!((s - 1.0).abs() < 1e-10, "df={df} t={t} sum={s}");
            }
        }
    }

    #[test]
    fn t_sf_rejects_df_zero() {
        assert!(matches!(t_sf(1.0, 0), Err(StatsError::InvalidDf)));
    }

    #[test]
    fn paired_t_hand_example() {
        let r = paired_t_one_sided(&[0.2, 0.1, 0.3]).unwrap();
        assert!((r.t - 3.4641016).abs() < 1e-6);
        assert_eq!(r.df, 2);
        assert!((r.p - df2_closed_form(r.t)).abs() < 1e-10);
        assert!((r.p - 0.0371).abs() < 5e-5);
    }

    #[test]
    fn paired_t_all_zero() {
        let r = paired_t_one_sided(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 0.5);
    }

    #[test]
    fn paired_t_sign_symmetry() {
        let pos = paired_t_one_sided(&[0.2, 0.1, 0.3]).unwrap();
        let neg = paired_t_one_sided(&[-0.2, -0.1, -0.3]).unwrap();
        assert!((pos.p + neg.p - 1.0).abs() < 1e-12);
        assert!((neg.p - 0.9629).abs() < 5e-5);
    }

    #[test]
    fn paired_t_zero_variance_cases() {
        assert_eq!(paired_t_one_sided(&[0.3, 0.3]).unwrap().p, 0.0);
        assert_eq!(paired_t_one_sided(&[-0.3, -0.3]).unwrap().p, 1.0);
    }

    #[test]
    fn paired_t_too_few() {
        assert!(matches!(
            paired_t_one_sided(&[0.1]),
            Err(StatsError::TooFewPairs { n: 1 })
        ));
    }

    #[test]
    fn paired_t_translation_consistency() {
        let d = [0.05, -0.02, 0.11, 0.04, 0.07];
        let c = 0.3;
        let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
        let base = paired_t_one_sided(&d).unwrap();
        let moved = paired_t_one_sided(&shifted).unwrap();
        let n = d.len() as f64;
        let sd = base.mean / base.t * n.sqrt();
        assert!((moved.t - (base.t + c / (sd / n.sqrt()))).abs() < 1e-9);
    }

    #[test]
    fn bh_single_p_unchanged() {
        assert_eq!(bh_adjust(&[0.123]).unwrap(), vec![0.123]);
    }

    #[test]
    fn bh_all_equal_stay_equal() {
        let adj = bh_adjust(&[0.2, 0.2, 0.2, 0.2]).unwrap();
        for a in adj {
            assert!((a - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn bh_simple_cascade() {
        // scaled: 0.03, 0.03, 0.03 -> min-cascade keeps them equal
        let adj = bh_adjust(&[0.01, 0.02, 0.03]).unwrap();
        for a in &adj {
            assert!((a - 0.03).abs() < 1e-15);
        }
    }

    #[test]
    fn bh_monotone_in_sorted_order_and_clamped() {
        let pvals = [0.9, 0.001, 0.5, 0.04, 0.97, 0.04];
        let adj = bh_adjust(&pvals).unwrap();
        let mut idx: Vec<usize> = (0..pvals.len()).collect();
        idx.sort_by(|&i, &j| pvals[i].partial_cmp(&pvals[j]).unwrap());
        for w in idx.windows(2) {
            assert!(adj[w[0]] <= adj[w[1]] + 1e-15);
        }
        for a in adj {
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn bh_permutation_equivariant() {
        let pvals = vec![0.07, 0.001, 0.55, 0.02, 0.02, 1.0];
        let adj = bh_adjust(&pvals).unwrap();
        let perm = [5usize, 3, 0, 1, 4, 2];
        let permuted: Vec<f64> = perm.iter().map(|&i| pvals[i]).collect();
        let adj_p = bh_adjust(&permuted).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            assert!((adj_p[pos] - adj[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn bh_rejects_out_of_range() {
        assert!(bh_adjust(&[0.5, 1.2]).is_err());
        assert!(bh_adjust(&[-0.1]).is_err());
    }

    fn obs(family: &str, model: &str, dataset: &str, d: Option<f64>) -> SubsetObservation {
        SubsetObservation {
            family: family.into(),
            model: model.into(),
            dataset: dataset.into(),
            difference: d,
        }
    }

    #[test]
    fn family_analysis_single_family_adjusted_equals_raw() {
        let rows = vec![
            obs("fam", "m1", "d1", Some(0.2)),
            obs("fam", "m1", "d2", Some(0.1)),
            obs("fam", "m2", "d1", Some(0.3)),
        ];
        let table = family_analysis(&rows, PairUnit::PerModelDataset).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.n_models, 2);
        assert_eq!(row.n_pairs, 3);
        assert_eq!(row.p_raw, row.p_adjusted);
    }

    #[test]
    fn family_analysis_excludes_untestable_from_m() {
        let rows = vec![
            obs("a", "m1", "d1", Some(0.2)),
            obs("a", "m2", "d1", Some(0.1)),
            obs("b", "m3", "d1", Some(0.4)),
            obs("b", "m3", "d2", None),
        ];
        let table = family_analysis(&rows, PairUnit::PerModelDataset).unwrap();
        assert_eq!(table.testable_count(), 1);
        let a = table.row("a").unwrap();
        let b = table.row("b").unwrap();
        // m = 1, so family a's adjustment is the identity
        assert_eq!(a.p_raw, a.p_adjusted);
        assert!(b.p_raw.is_none());
        assert_eq!(b.n_pairs, 1);
        assert_eq!(b.mean_diff, Some(0.4));
    }

    #[test]
    fn family_analysis_per_dataset_mean_unit() {
        let rows = vec![
            obs("fam", "m1", "d1", Some(0.2)),
            obs("fam", "m2", "d1", Some(0.4)),
            obs("fam", "m1", "d2", Some(0.0)),
            obs("fam", "m2", "d2", Some(0.2)),
        ];
        let table = family_analysis(&rows, PairUnit::PerDatasetMean).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.n_pairs, 2);
        assert!((row.mean_diff.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn family_analysis_sorted_by_raw_p() {
        let rows = vec![
            obs("late", "m1", "d1", Some(0.0)),
            obs("late", "m1", "d2", Some(0.001)),
            obs("late", "m1", "d3", Some(-0.001)),
            obs("early", "m2", "d1", Some(0.5)),
            obs("early", "m2", "d2", Some(0.5)),
            obs("none", "m3", "d1", Some(0.2)),
        ];
        let table = family_analysis(&rows, PairUnit::PerModelDataset).unwrap();
        assert_eq!(table.rows[0].family, "early");
        assert_eq!(table.rows[1].family, "late");
        assert_eq!(table.rows[2].family, "none");
        assert!(!table.rows[2].testable());
    }
}
