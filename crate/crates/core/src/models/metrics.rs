use super::ModelError;

/// Held-out evaluation of a CTR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub auc: f64,
    pub rmse: f64,
    pub n: usize,
}

/// Area under the ROC curve via the rank-sum statistic. Tied scores get
/// averaged ranks, which is the same as half credit per tied pair.
pub fn auc(scored: &[(f64, bool)]) -> Result<f64, ModelError> {
    let pos = scored.iter().filter(|s| s.1).count() as u64;
    let neg = scored.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));

    // Twice the positive rank sum, kept integral so ties are exact.
    let mut rank2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scored[order[j]].0.total_cmp(&scored[order[i]].0).is_eq() {
            j += 1;
        }
        let positives = order[i..j].iter().filter(|&&k| scored[k].1).count() as u64;
        rank2 += positives * (i as u64 + 1 + j as u64);
        i = j;
    }
    let numer = rank2 - pos * (pos + 1);
    Ok(numer as f64 / (2 * pos * neg) as f64)
}

pub fn rmse(scored: &[(f64, bool)]) -> Result<f64, ModelError> {
    if scored.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let sse: f64 = scored
        .iter()
        .map(|&(p, y)| {
            let d = p - if y { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    Ok((sse / scored.len() as f64).sqrt())
}

pub fn evaluate_scores(scored: &[(f64, bool)]) -> Result<EvalReport, ModelError> {
    Ok(EvalReport { auc: auc(scored)?, rmse: rmse(scored)?, n: scored.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(scored: &[(f64, bool)]) -> f64 {
        let (mut credit, mut pairs) = (0.0, 0.0);
        for p in scored.iter().filter(|s| s.1) {
            for n in scored.iter().filter(|s| !s.1) {
                pairs += 1.0;
                if p.0 > n.0 {
                    credit += 1.0;
                } else if p.0 == n.0 {
                    credit += 0.5;
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn small_cases() {
        let s = [(0.9, true), (0.8, false), (0.3, true), (0.2, false)];
        assert_eq!(auc(&s).unwrap(), 0.75);
        assert_eq!(auc(&[(0.1, false), (0.2, false), (0.7, true)]).unwrap(), 1.0);
        assert_eq!(auc(&[(0.4, false), (0.4, true), (0.4, true)]).unwrap(), 0.5);
        assert_eq!(auc(&[(0.4, true)]), Err(ModelError::SingleClassInput));
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[(1.0, true), (0.0, false)]).unwrap(), 0.0);
        assert_eq!(rmse(&[(0.5, true), (0.5, false)]).unwrap(), 0.5);
        assert!((rmse(&[(0.2, false)]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(rmse(&[]), Err(ModelError::EmptyInput));
    }

    proptest! {
        #[test]
        fn matches_brute_force(items in prop::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let scored: Vec<(f64, bool)> = items.iter().map(|&(s, y)| (s as f64 / 19.0, y)).collect();
            prop_assume!(scored.iter().any(|s| s.1) && scored.iter().any(|s| !s.1));
            prop_assert!((auc(&scored).unwrap() - brute_force(&scored)).abs() <= 1e-12);
        }

        #[test]
        fn invariant_under_monotone_transform(items in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..100)) {
            prop_assume!(items.iter().any(|s| s.1) && items.iter().any(|s| !s.1));
            let squashed: Vec<(f64, bool)> = items.iter().map(|&(s, y)| (s.exp() * 3.0 + 1.0, y)).collect();
            prop_assert_eq!(auc(&items).unwrap(), auc(&squashed).unwrap());
        }
    }
}
