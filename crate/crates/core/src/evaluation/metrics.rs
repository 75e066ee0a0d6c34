//! Run-level metrics. Ratio metrics are exact rationals; nDCG is f64
//! because of the logarithmic discount.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::agents::Verdict;

/// What the metrics need to know about one ranked hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub drug_a: String,
    pub drug_b: String,
    pub verdict: Verdict,
    pub novelty_exact: Option<bool>,
    pub novelty_in_context: Option<bool>,
    pub supporting_pmids: Vec<String>,
}

impl HypothesisOutcome {
    /// 1 when literature exists for the exact pair.
    pub fn relevance(&self) -> u8 {
        u8::from(self.novelty_exact == Some(false))
    }

    fn pair_key(&self) -> (String, String) {
        let (a, b) = (self.drug_a.to_lowercase(), self.drug_b.to_lowercase());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// One scenario's hypotheses in rank order.
pub type RankedRun = [HypothesisOutcome];

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn non_empty(run: &RankedRun) -> Result<usize, EvalError> {
    if run.is_empty() {
        Err(EvalError::EmptyRun)
    } else {
        Ok(run.len())
    }
}

/// Shares of hypotheses that are exact-novel and context-novel. Unknown
/// novelty counts as not novel.
pub fn novelty_rates(run: &RankedRun) -> Result<(BigRational, BigRational), EvalError> {
    let n = non_empty(run)?;
    let exact = run.iter().filter(|h| h.novelty_exact == Some(true)).count();
    let context = run.iter().filter(|h| h.novelty_in_context == Some(true)).count();
    Ok((ratio(exact, n), ratio(context, n)))
}

/// Share of hypotheses with at least one supporting pmid.
pub fn evidence_coverage(run: &RankedRun) -> Result<BigRational, EvalError> {
    let n = non_empty(run)?;
    Ok(ratio(run.iter().filter(|h| !h.supporting_pmids.is_empty()).count(), n))
}

/// Whether a Proceed verdict appears among the first `k` (or all, if fewer).
pub fn proceed_in_top(run: &RankedRun, k: usize) -> bool {
    run.iter().take(k).any(|h| h.verdict == Verdict::Proceed)
}

/// Share of runs with a Proceed verdict in their top `k`.
pub fn proceed_at_k(runs: &[&RankedRun], k: usize) -> Result<BigRational, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidArgument("k must be at least 1".into()));
    }
    if runs.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    Ok(ratio(runs.iter().filter(|r| proceed_in_top(r, k)).count(), runs.len()))
}

/// Unique unordered pairs over total hypotheses.
pub fn diversity(run: &RankedRun) -> Result<BigRational, EvalError> {
    let n = non_empty(run)?;
    let unique: BTreeSet<_> = run.iter().map(HypothesisOutcome::pair_key).collect();
    Ok(ratio(unique.len(), n))
}

/// 1/rank of the first relevant item, 0 when there is none.
pub fn reciprocal_rank(labels: &[u8]) -> BigRational {
    labels
        .iter()
        .position(|l| *l > 0)
        .map_or_else(BigRational::zero, |i| ratio(1, i + 1))
}

/// Mean reciprocal rank over rankings; each ranking must be non-empty.
pub fn mrr(rankings: &[Vec<u8>]) -> Result<BigRational, EvalError> {
    if rankings.is_empty() || rankings.iter().any(Vec::is_empty) {
        return Err(EvalError::EmptyRun);
    }
    let sum = rankings
        .iter()
        .map(|r| reciprocal_rank(r))
        .fold(BigRational::zero(), |a, b| a + b);
    Ok(sum / BigInt::from(rankings.len()))
}

pub fn dcg_at_k(labels: &[u8], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, l)| f64::from(*l) / ((i + 2) as f64).log2())
        .sum()
}

/// DCG@k over the ideal DCG@k; 0 when no label is relevant.
pub fn ndcg_at_k(labels: &[u8], k: usize) -> f64 {
    let mut ideal = labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg_at_k(labels, k) / idcg
    }
}

pub fn labels(run: &RankedRun) -> Vec<u8> {
    run.iter().map(HypothesisOutcome::relevance).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(ndcg_at_k(&[1, 0, 0], 3), 1.0);
        assert!((ndcg_at_k(&[0, 1, 0], 3) - 0.6309).abs() < 1e-4);
        assert_eq!(reciprocal_rank(&[0, 1, 0, 0]), ratio(1, 2));
        assert_eq!(ndcg_at_k(&[0, 0, 0], 3), 0.0);
        assert_eq!(mrr(&[vec![0, 0]]).unwrap(), BigRational::zero());
    }
}
