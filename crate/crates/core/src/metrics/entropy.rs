use std::collections::BTreeMap;

use super::MetricsError;

/// A probability distribution over messages.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageDistribution<M: Ord> {
    probs: BTreeMap<M, f64>,
}

impl<M: Ord + Clone> MessageDistribution<M> {
    /// Probabilities must be non-negative and sum to 1 within 1e-9. Repeated
    /// messages accumulate.
    pub fn new(pairs: impl IntoIterator<Item = (M, f64)>) -> Result<Self, MetricsError> {
        let mut probs = BTreeMap::new();
        for (m, p) in pairs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(MetricsError::Distribution(format!("probability {p}")));
            }
            *probs.entry(m).or_insert(0.0) += p;
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MetricsError::Distribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    /// Uniform over the distinct messages given.
    pub fn uniform(messages: impl IntoIterator<Item = M>) -> Result<Self, MetricsError> {
        let ms: Vec<M> = messages.into_iter().collect();
        let p = 1.0 / ms.len() as f64;
        Self::new(ms.into_iter().map(|m| (m, p)))
    }

    /// Empirical distribution of observed messages.
    pub fn empirical(observed: impl IntoIterator<Item = M>) -> Result<Self, MetricsError> {
        let mut counts: BTreeMap<M, usize> = BTreeMap::new();
        for m in observed {
            *counts.entry(m).or_insert(0) += 1;
        }
        let n: usize = counts.values().sum();
        Self::new(counts.into_iter().map(|(m, c)| (m, c as f64 / n as f64)))
    }

    pub fn probabilities(&self) -> &BTreeMap<M, f64> {
        &self.probs
    }

    /// Push-forward onto symbols through `f`.
    pub fn map<S: Ord + Clone>(&self, f: impl Fn(&M) -> S) -> MessageDistribution<S> {
        let mut probs = BTreeMap::new();
        for (m, p) in &self.probs {
            *probs.entry(f(m)).or_insert(0.0) += p;
        }
        MessageDistribution { probs }
    }
}

fn entropy_of<'a>(ps: impl IntoIterator<Item = &'a f64>) -> f64 {
    ps.into_iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// H(M) in bits.
pub fn message_entropy<M: Ord + Clone>(d: &MessageDistribution<M>) -> f64 {
    entropy_of(d.probs.values())
}

/// H(S) in bits, where S = f(M).
pub fn semantic_entropy<M: Ord + Clone, S: Ord + Clone>(
    d: &MessageDistribution<M>,
    f: impl Fn(&M) -> S,
) -> f64 {
    message_entropy(&d.map(f))
}

/// (H(S|M), H(M|S)) computed from the joint distribution of (m, f(m)).
pub fn conditional_entropies<M: Ord + Clone, S: Ord + Clone>(
    d: &MessageDistribution<M>,
    f: impl Fn(&M) -> S,
) -> (f64, f64) {
    let joint: Vec<(&M, S, f64)> = d.probs.iter().map(|(m, &p)| (m, f(m), p)).collect();
    let mut p_s: BTreeMap<&S, f64> = BTreeMap::new();
    let mut p_m: BTreeMap<&M, f64> = BTreeMap::new();
    for (m, s, p) in &joint {
        *p_s.entry(s).or_insert(0.0) += p;
        *p_m.entry(m).or_insert(0.0) += p;
    }
    let mut h_s_given_m = 0.0;
    let mut h_m_given_s = 0.0;
    for (m, s, p) in &joint {
        if *p > 0.0 {
            h_s_given_m -= p * (p / p_m[m]).log2();
            h_m_given_s -= p * (p / p_s[s]).log2();
        }
    }
    (h_s_given_m.max(0.0), h_m_given_s.max(0.0))
}

/// |H(S) - (H(M) + H(S|M) - H(M|S))|, zero up to rounding.
pub fn entropy_identity_residual<M: Ord + Clone, S: Ord + Clone>(
    d: &MessageDistribution<M>,
    f: impl Fn(&M) -> S,
) -> f64 {
    let h_s = semantic_entropy(d, &f);
    let h_m = message_entropy(d);
    let (h_s_m, h_m_s) = conditional_entropies(d, &f);
    (h_s - (h_m + h_s_m - h_m_s)).abs()
}
