//! Daily joint solar/wind scenarios and forward scenario reduction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renewables::RenewableProfile;
use crate::scalar::Scalar;

/// Tolerance on the total probability of a scenario set.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Number of scenarios kept by default after reduction.
pub const DEFAULT_KEEP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<F> {
    pub pi: F,
    pub solar: RenewableProfile<F>,
    pub wind: RenewableProfile<F>,
}

impl<F: Scalar> Scenario<F> {
    pub fn new(pi: F, solar: RenewableProfile<F>, wind: RenewableProfile<F>) -> Result<Self> {
        let s = Scenario { pi, solar, wind };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.solar.len() != self.wind.len() {
            return Err(Error::invalid(format!(
                "solar and wind profiles differ in length ({} vs {})",
                self.solar.len(),
                self.wind.len()
            )));
        }
        if !(self.pi >= F::zero()) || !self.pi.is_finite() {
            return Err(Error::invalid(format!("scenario probability {} is negative", self.pi)));
        }
        RenewableProfile::new(self.solar.values().to_vec())?;
        RenewableProfile::new(self.wind.values().to_vec())?;
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.solar.len()
    }

    /// Available renewable power `eta_s * alpha_s + eta_w * alpha_w` per hour.
    pub fn renewable_cap(&self, solar_capacity: F, wind_capacity: F) -> Vec<F> {
        self.solar
            .values()
            .iter()
            .zip(self.wind.values())
            .map(|(&s, &w)| s * solar_capacity + w * wind_capacity)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet<F> {
    scenarios: Vec<Scenario<F>>,
}

impl<F: Scalar> ScenarioSet<F> {
    pub fn new(scenarios: Vec<Scenario<F>>) -> Result<Self> {
        let set = ScenarioSet { scenarios };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.scenarios.first() else {
            return Err(Error::invalid("scenario set is empty"));
        };
        let t = first.horizon();
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate()?;
            if s.horizon() != t {
                return Err(Error::invalid(format!(
                    "scenario {i} has horizon {} but scenario 0 has {t}",
                    s.horizon()
                )));
            }
        }
        let total = self.total_probability();
        if (total - F::one()).abs().as_f64() > PROBABILITY_TOL {
            return Err(Error::invalid(format!("scenario probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn scenarios(&self) -> &[Scenario<F>] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.scenarios[0].horizon()
    }

    pub fn total_probability(&self) -> F {
        self.scenarios.iter().map(|s| s.pi).sum()
    }

    /// Builds a new set with every profile transformed by `f`.
    pub fn map_profiles(
        &self,
        mut f: impl FnMut(usize, &Scenario<F>) -> (RenewableProfile<F>, RenewableProfile<F>),
    ) -> Self {
        ScenarioSet {
            scenarios: self
                .scenarios
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let (solar, wind) = f(i, s);
                    Scenario { pi: s.pi, solar, wind }
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(s)?;
        set.validate()?;
        Ok(set)
    }
}

/// One scenario per day with uniform probability.
pub fn build_scenarios<F: Scalar>(
    solar_days: &[RenewableProfile<F>],
    wind_days: &[RenewableProfile<F>],
) -> Result<ScenarioSet<F>> {
    if solar_days.len() != wind_days.len() {
        return Err(Error::invalid(format!(
            "misaligned day counts: {} solar vs {} wind",
            solar_days.len(),
            wind_days.len()
        )));
    }
    if solar_days.is_empty() {
        return Err(Error::invalid("no days to build scenarios from"));
    }
    let pi = F::one() / F::from_usize_lossy(solar_days.len());
    let scenarios = solar_days
        .iter()
        .zip(wind_days)
        .map(|(s, w)| Scenario::new(pi, s.clone(), w.clone()))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::new(scenarios)
}

/// Weighted Euclidean metric on concatenated solar and wind day vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetric<F> {
    pub solar_weight: F,
    pub wind_weight: F,
}

impl<F: Scalar> Default for ScenarioMetric<F> {
    fn default() -> Self {
        ScenarioMetric {
            solar_weight: F::one(),
            wind_weight: F::one(),
        }
    }
}

impl<F: Scalar> ScenarioMetric<F> {
    pub fn distance(&self, a: &Scenario<F>, b: &Scenario<F>) -> F {
        let sq = |x: &RenewableProfile<F>, y: &RenewableProfile<F>| -> F {
            x.values()
                .iter()
                .zip(y.values())
                .map(|(&p, &q)| (p - q) * (p - q))
                .sum()
        };
        (self.solar_weight * sq(&a.solar, &b.solar) + self.wind_weight * sq(&a.wind, &b.wind)).sqrt()
    }

    pub fn distance_matrix(&self, set: &ScenarioSet<F>) -> Vec<Vec<F>> {
        let sc = set.scenarios();
        (0..sc.len())
            .into_par_iter()
            .map(|i| (0..sc.len()).map(|j| self.distance(&sc[i], &sc[j])).collect())
            .collect()
    }
}

/// Unweighted Euclidean distance between two scenarios.
pub fn distance<F: Scalar>(a: &Scenario<F>, b: &Scenario<F>) -> F {
    ScenarioMetric::default().distance(a, b)
}

/// Probability-weighted transport cost of collapsing every scenario onto its
/// nearest member of `kept`.
pub fn kantorovich_distance<F: Scalar>(probabilities: &[F], dist: &[Vec<F>], kept: &[usize]) -> F {
    (0..probabilities.len())
        .filter(|i| !kept.contains(i))
        .map(|i| {
            let d = kept.iter().map(|&j| dist[i][j]).fold(F::infinity(), F::min);
            probabilities[i] * d
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct Reduction<F> {
    pub set: ScenarioSet<F>,
    /// Indices of preserved scenarios in the original set, in selection order.
    pub kept: Vec<usize>,
    pub distance: F,
}

pub fn reduce<F: Scalar>(set: &ScenarioSet<F>, keep: usize) -> Result<Reduction<F>> {
    reduce_with(set, keep, &ScenarioMetric::default())
}

/// Forward selection: grow the preserved subset one scenario at a time,
/// each time adding the scenario that lowers the Kantorovich distance most.
/// Ties go to the lowest index. Removed probability mass moves to the
/// nearest preserved scenario.
pub fn reduce_with<F: Scalar>(
    set: &ScenarioSet<F>,
    keep: usize,
    metric: &ScenarioMetric<F>,
) -> Result<Reduction<F>> {
    let n = set.len();
    if keep == 0 || keep > n {
        return Err(Error::invalid(format!("keep must be in 1..={n}, got {keep}")));
    }
    let dist = metric.distance_matrix(set);
    let pi: Vec<F> = set.scenarios().iter().map(|s| s.pi).collect();

    // nearest[i]: distance from i to the current preserved set
    let mut nearest = vec![F::infinity(); n];
    let mut selected = vec![false; n];
    let mut kept = Vec::with_capacity(keep);
    for _ in 0..keep {
        let mut best: Option<(usize, F)> = None;
        for u in (0..n).filter(|&u| !selected[u]) {
            let cost: F = (0..n)
                .filter(|&w| !selected[w] && w != u)
                .map(|w| pi[w] * nearest[w].min(dist[w][u]))
                .sum();
            if best.map_or(true, |(_, c)| cost < c) {
                best = Some((u, cost));
            }
        }
        let (u, _) = best.expect("at least one unselected scenario");
        selected[u] = true;
        kept.push(u);
        for w in 0..n {
            nearest[w] = nearest[w].min(dist[w][u]);
        }
    }

    let mut new_pi: Vec<F> = kept.iter().map(|&k| pi[k]).collect();
    for w in (0..n).filter(|&w| !selected[w]) {
        let mut target = 0;
        for (slot, &k) in kept.iter().enumerate() {
            let d = dist[w][k];
            let cur = dist[w][kept[target]];
            if d < cur || (d == cur && k < kept[target]) {
                target = slot;
            }
        }
        new_pi[target] = new_pi[target] + pi[w];
    }
    let distance = kantorovich_distance(&pi, &dist, &kept);
    let scenarios = kept
        .iter()
        .zip(&new_pi)
        .map(|(&k, &p)| {
            let s = &set.scenarios()[k];
            Scenario {
                pi: p,
                solar: s.solar.clone(),
                wind: s.wind.clone(),
            }
        })
        .collect();
    Ok(Reduction {
        set: ScenarioSet::new(scenarios)?,
        kept,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(v: Vec<f64>) -> RenewableProfile<f64> {
        RenewableProfile::new(v).unwrap()
    }

    fn uniform(days: usize, len: usize) -> (Vec<RenewableProfile<f64>>, Vec<RenewableProfile<f64>>) {
        let s = (0..days)
            .map(|d| profile(vec![(d as f64 + 1.0) / (days as f64 + 1.0); len]))
            .collect();
        let w = (0..days).map(|_| profile(vec![0.5; len])).collect();
        (s, w)
    }

    #[test]
    fn uniform_probabilities() {
        let (s, w) = uniform(365, 24);
        let set = build_scenarios(&s, &w).unwrap();
        assert_eq!(set.len(), 365);
        assert!(set.scenarios().iter().all(|x| (x.pi - 1.0 / 365.0).abs() < 1e-15));

        let (s, w) = uniform(1, 24);
        assert_eq!(build_scenarios(&s, &w).unwrap().scenarios()[0].pi, 1.0);

        let (s, w) = uniform(4, 24);
        assert!(build_scenarios(&s, &w).unwrap().scenarios().iter().all(|x| x.pi == 0.25));
    }

    #[test]
    fn misaligned_days_rejected() {
        let (s, w) = uniform(4, 24);
        assert!(build_scenarios(&s, &w[..3]).is_err());
    }

    #[test]
    fn duplicates_collapse() {
        let a = profile(vec![0.3; 24]);
        let set = build_scenarios(&[a.clone(), a.clone()], &[a.clone(), a]).unwrap();
        let r = reduce(&set, 1).unwrap();
        assert_eq!(r.set.len(), 1);
        assert_eq!(r.set.scenarios()[0].pi, 1.0);
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn keep_all_is_identity() {
        let (s, w) = uniform(5, 24);
        let set = build_scenarios(&s, &w).unwrap();
        let r = reduce(&set, 5).unwrap();
        assert_eq!(r.distance, 0.0);
        let mut kept = r.kept.clone();
        kept.sort();
        assert_eq!(kept, vec![0, 1, 2, 3, 4]);
        for (k, sc) in r.kept.iter().zip(r.set.scenarios()) {
            assert_eq!(sc, &set.scenarios()[*k]);
        }
    }

    #[test]
    fn keep_out_of_range() {
        let (s, w) = uniform(3, 24);
        let set = build_scenarios(&s, &w).unwrap();
        assert!(reduce(&set, 0).is_err());
        assert!(reduce(&set, 4).is_err());
    }

    #[test]
    fn distance_reference_values() {
        let a = Scenario::new(1.0, profile(vec![0.2; 24]), profile(vec![0.4; 24])).unwrap();
        assert_eq!(distance(&a, &a), 0.0);
        let mut s = vec![0.2; 24];
        s[7] = 1.0;
        let mut w = vec![0.4; 24];
        w[7] = 0.6;
        let b = Scenario::new(1.0, profile(s), profile(vec![0.4; 24])).unwrap();
        let c = Scenario::new(1.0, profile(vec![0.2; 24]), profile(w)).unwrap();
        assert!((distance(&a, &b) - 0.8).abs() < 1e-15);
        let mut s1 = vec![0.0; 24];
        s1[0] = 1.0;
        let unit = Scenario::new(1.0, profile(s1), profile(vec![0.0; 24])).unwrap();
        let zero = Scenario::new(1.0, profile(vec![0.0; 24]), profile(vec![0.0; 24])).unwrap();
        assert_eq!(distance(&unit, &zero), 1.0);
        assert!((distance(&b, &c) - (0.64f64 + 0.04).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_schema_shape() {
        let (s, w) = uniform(2, 24);
        let set = build_scenarios(&s, &w).unwrap();
        let v: serde_json::Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
        let first = &v["scenarios"][0];
        assert_eq!(first["pi"], 0.5);
        assert_eq!(first["solar"].as_array().unwrap().len(), 24);
        assert_eq!(first["wind"].as_array().unwrap().len(), 24);
        let back = ScenarioSet::<f64>::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn probability_sum_checked_on_load() {
        let bad = r#"{"scenarios":[{"pi":0.4,"solar":[0.1],"wind":[0.2]}]}"#;
        assert!(ScenarioSet::<f64>::from_json(bad).is_err());
    }
}
