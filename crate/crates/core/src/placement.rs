//! Store selection for new data.
//!
//! Each candidate store gets a cost in seconds:
//!
//! ```text
//! cost = payload / bandwidth + w_load * server_load + w_clients * active_clients + latency_ewma
//! ```
//!
//! The cheapest store that satisfies the entity's confidentiality wins; ties
//! go to the lexicographically smallest location. `latency_ewma` is learned
//! from observed operation latencies.

use std::collections::BTreeMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Confidentiality, EntityDescriptor, LocationId, Privacy, SchemaRegistry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("invalid metrics: {0}")]
    InvalidMetrics(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("no eligible store for entity {0}")]
    NoEligibleStore(String),
    #[error("no metrics for store {0}")]
    MissingMetrics(LocationId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreMetrics {
    /// Bytes per second, strictly positive.
    pub bandwidth: f64,
    /// Fraction in `[0, 1]`.
    pub server_load: f64,
    pub active_clients: u64,
    /// Seconds.
    #[serde(default)]
    pub latency_ewma: f64,
}

impl Default for StoreMetrics {
    fn default() -> Self {
        StoreMetrics {
            bandwidth: 1e8,
            server_load: 0.0,
            active_clients: 0,
            latency_ewma: 0.0,
        }
    }
}

impl StoreMetrics {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::InvalidMetrics(m));
        if !self.bandwidth.is_finite() || self.bandwidth <= 0.0 {
            return bad(format!("bandwidth must be finite and > 0, got {}", self.bandwidth));
        }
        if !self.server_load.is_finite() || !(0.0..=1.0).contains(&self.server_load) {
            return bad(format!("server_load must lie in [0, 1], got {}", self.server_load));
        }
        if !self.latency_ewma.is_finite() || self.latency_ewma < 0.0 {
            return bad(format!("latency_ewma must be finite and >= 0, got {}", self.latency_ewma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyWeights {
    /// Seconds per unit of load.
    pub w_load: f64,
    /// Seconds per active client.
    pub w_clients: f64,
    pub ewma_alpha: f64,
}

impl Default for PolicyWeights {
    fn default() -> Self {
        PolicyWeights {
            w_load: 0.05,
            w_clients: 0.001,
            ewma_alpha: 0.2,
        }
    }
}

impl PolicyWeights {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.w_load.is_finite() && self.w_load >= 0.0) || !(self.w_clients.is_finite() && self.w_clients >= 0.0) {
            return Err(PolicyError::InvalidWeights("weights must be finite and >= 0".into()));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(PolicyError::InvalidWeights(format!(
                "ewma_alpha must lie in (0, 1], got {}",
                self.ewma_alpha
            )));
        }
        Ok(())
    }
}

/// The four cost terms of one store, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    pub transfer: f64,
    pub load: f64,
    pub clients: f64,
    pub latency: f64,
}

impl ScoreBreakdown {
    pub fn total(&self) -> f64 {
        self.transfer + self.load + self.clients + self.latency
    }
}

pub fn breakdown(metrics: &StoreMetrics, weights: &PolicyWeights, payload: u64) -> Result<ScoreBreakdown, PolicyError> {
    metrics.validate()?;
    weights.validate()?;
    Ok(ScoreBreakdown {
        transfer: payload as f64 / metrics.bandwidth,
        load: weights.w_load * metrics.server_load,
        clients: weights.w_clients * metrics.active_clients as f64,
        latency: metrics.latency_ewma,
    })
}

/// Cost in seconds of placing `payload` bytes on a store.
pub fn score(metrics: &StoreMetrics, weights: &PolicyWeights, payload: u64) -> Result<f64, PolicyError> {
    breakdown(metrics, weights, payload).map(|b| b.total())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementDecision {
    pub chosen: LocationId,
    pub payload: u64,
    /// Eligible stores, sorted.
    pub eligible: Vec<LocationId>,
    /// Cost of every eligible store.
    pub scores: BTreeMap<LocationId, f64>,
    pub breakdowns: BTreeMap<LocationId, ScoreBreakdown>,
}

/// Whether `entity` may be stored at a store of the given privacy.
pub fn is_eligible(entity: &EntityDescriptor, privacy: Privacy) -> bool {
    entity.confidentiality == Confidentiality::PublicOk || privacy == Privacy::Private
}

pub fn choose_location(
    registry: &SchemaRegistry,
    entity: &EntityDescriptor,
    payload: u64,
    metrics: &BTreeMap<LocationId, StoreMetrics>,
    weights: &PolicyWeights,
) -> Result<PlacementDecision, PolicyError> {
    let mut eligible: Vec<LocationId> = registry
        .stores()
        .iter()
        .filter(|s| is_eligible(entity, s.privacy))
        .map(|s| s.location.clone())
        .collect();
    eligible.sort();
    let mut scores = BTreeMap::new();
    let mut breakdowns = BTreeMap::new();
    let mut best: Option<(&LocationId, f64)> = None;
    for location in &eligible {
        let m = metrics
            .get(location)
            .ok_or_else(|| PolicyError::MissingMetrics(location.clone()))?;
        let terms = breakdown(m, weights, payload)?;
        let cost = terms.total();
        scores.insert(location.clone(), cost);
        breakdowns.insert(location.clone(), terms);
        // eligible is sorted, so strict < keeps the smallest id on ties
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((location, cost));
        }
    }
    let chosen = best
        .map(|(l, _)| l.clone())
        .ok_or_else(|| PolicyError::NoEligibleStore(entity.name.clone()))?;
    Ok(PlacementDecision {
        chosen,
        payload,
        eligible,
        scores,
        breakdowns,
    })
}

/// Folds one observed latency into the store's moving average.
pub fn record_observation(
    metrics: &StoreMetrics,
    observed_latency: f64,
    weights: &PolicyWeights,
) -> Result<StoreMetrics, PolicyError> {
    if !observed_latency.is_finite() || observed_latency < 0.0 {
        return Err(PolicyError::InvalidObservation(format!(
            "latency must be finite and >= 0, got {observed_latency}"
        )));
    }
    weights.validate()?;
    let alpha = weights.ewma_alpha;
    Ok(StoreMetrics {
        latency_ewma: (1.0 - alpha) * metrics.latency_ewma + alpha * observed_latency,
        ..*metrics
    })
}

/// Push-style update of the operator-supplied metrics. `None` leaves a
/// field untouched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsUpdate {
    pub bandwidth: Option<f64>,
    pub server_load: Option<f64>,
    pub active_clients: Option<u64>,
}

pub fn update_metrics(metrics: &StoreMetrics, update: &MetricsUpdate) -> Result<StoreMetrics, PolicyError> {
    let next = StoreMetrics {
        bandwidth: update.bandwidth.unwrap_or(metrics.bandwidth),
        server_load: update.server_load.unwrap_or(metrics.server_load),
        active_clients: update.active_clients.unwrap_or(metrics.active_clients),
        latency_ewma: metrics.latency_ewma,
    };
    next.validate()?;
    Ok(next)
}

/// Live metrics for every store, shared between writers recording
/// observations and readers taking decision snapshots.
#[derive(Debug, Default)]
pub struct MetricsBoard {
    inner: RwLock<BTreeMap<LocationId, StoreMetrics>>,
}

impl MetricsBoard {
    pub fn new(initial: BTreeMap<LocationId, StoreMetrics>) -> Result<Self, PolicyError> {
        for m in initial.values() {
            m.validate()?;
        }
        Ok(MetricsBoard {
            inner: RwLock::new(initial),
        })
    }

    pub fn snapshot(&self) -> BTreeMap<LocationId, StoreMetrics> {
        self.inner.read().expect("metrics lock poisoned").clone()
    }

    pub fn get(&self, location: &LocationId) -> Option<StoreMetrics> {
        self.inner.read().expect("metrics lock poisoned").get(location).copied()
    }

    pub fn observe(
        &self,
        location: &LocationId,
        observed_latency: f64,
        weights: &PolicyWeights,
    ) -> Result<StoreMetrics, PolicyError> {
        let mut map = self.inner.write().expect("metrics lock poisoned");
        let current = map
            .get(location)
            .ok_or_else(|| PolicyError::MissingMetrics(location.clone()))?;
        let next = record_observation(current, observed_latency, weights)?;
        map.insert(location.clone(), next);
        Ok(next)
    }

    pub fn update(&self, location: &LocationId, update: &MetricsUpdate) -> Result<StoreMetrics, PolicyError> {
        let mut map = self.inner.write().expect("metrics lock poisoned");
        let current = map
            .get(location)
            .ok_or_else(|| PolicyError::MissingMetrics(location.clone()))?;
        let next = update_metrics(current, update)?;
        map.insert(location.clone(), next);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FieldDescriptor, StoreDescriptor};
    use crate::value::ValueKind;

    fn metrics(bandwidth: f64, load: f64, clients: u64, ewma: f64) -> StoreMetrics {
        StoreMetrics {
            bandwidth,
            server_load: load,
            active_clients: clients,
            latency_ewma: ewma,
        }
    }

    #[test]
    fn all_terms_vanish() {
        let c = score(&metrics(1e6, 0.0, 0, 0.0), &PolicyWeights::default(), 0).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn worked_example() {
        let w = PolicyWeights {
            w_load: 0.05,
            w_clients: 0.001,
            ewma_alpha: 0.2,
        };
        let c = score(&metrics(1e6, 0.5, 10, 0.1), &w, 1_000_000).unwrap();
        assert!((c - 1.135).abs() < 1e-12, "{c}");
    }

    #[test]
    fn more_bandwidth_is_cheaper() {
        let w = PolicyWeights::default();
        let a = score(&metrics(1e6, 0.3, 2, 0.0), &w, 500).unwrap();
        let b = score(&metrics(2e6, 0.3, 2, 0.0), &w, 500).unwrap();
        assert!(b < a);
    }

    #[test]
    fn invalid_metrics_rejected() {
        let w = PolicyWeights::default();
        assert!(matches!(score(&metrics(0.0, 0.0, 0, 0.0), &w, 1), Err(PolicyError::InvalidMetrics(_))));
        assert!(matches!(score(&metrics(f64::NAN, 0.0, 0, 0.0), &w, 1), Err(PolicyError::InvalidMetrics(_))));
        assert!(matches!(score(&metrics(1.0, 1.5, 0, 0.0), &w, 1), Err(PolicyError::InvalidMetrics(_))));
    }

    fn registry(stores: &[(&str, Privacy)]) -> SchemaRegistry {
        let mut reg = SchemaRegistry::new();
        for (loc, p) in stores {
            reg.register_store(StoreDescriptor::embedded(*loc, *p)).unwrap();
        }
        reg
    }

    fn entity(private: bool) -> EntityDescriptor {
        let e = EntityDescriptor::new("E", vec![FieldDescriptor::new("id", ValueKind::Integer).primary_key()]);
        if private {
            e.private_only()
        } else {
            e
        }
    }

    #[test]
    fn singleton_wins_regardless() {
        let reg = registry(&[("only", Privacy::Public)]);
        let m = BTreeMap::from([("only".into(), metrics(1.0, 1.0, 1000, 9.0))]);
        let d = choose_location(&reg, &entity(false), 1 << 20, &m, &PolicyWeights::default()).unwrap();
        assert_eq!(d.chosen, "only".into());
    }

    #[test]
    fn private_only_ignores_cheaper_public() {
        let reg = registry(&[("public1", Privacy::Public), ("private1", Privacy::Private)]);
        let m = BTreeMap::from([
            ("public1".into(), metrics(1e9, 0.0, 0, 0.0)),
            ("private1".into(), metrics(1e3, 1.0, 50, 1.0)),
        ]);
        let d = choose_location(&reg, &entity(true), 100, &m, &PolicyWeights::default()).unwrap();
        assert_eq!(d.chosen, "private1".into());
        assert_eq!(d.eligible, vec![LocationId::from("private1")]);
        let d = choose_location(&reg, &entity(false), 100, &m, &PolicyWeights::default()).unwrap();
        assert_eq!(d.chosen, "public1".into());
    }

    #[test]
    fn no_eligible_store() {
        let reg = registry(&[("public1", Privacy::Public)]);
        let m = BTreeMap::from([("public1".into(), StoreMetrics::default())]);
        assert_eq!(
            choose_location(&reg, &entity(true), 0, &m, &PolicyWeights::default()),
            Err(PolicyError::NoEligibleStore("E".into()))
        );
    }

    #[test]
    fn ties_go_to_smallest_location() {
        let reg = registry(&[("zeta", Privacy::Public), ("alpha", Privacy::Public)]);
        let m = BTreeMap::from([
            ("zeta".into(), StoreMetrics::default()),
            ("alpha".into(), StoreMetrics::default()),
        ]);
        let d = choose_location(&reg, &entity(false), 10, &m, &PolicyWeights::default()).unwrap();
        assert_eq!(d.chosen, "alpha".into());
    }

    #[test]
    fn ewma_step() {
        let w = PolicyWeights::default();
        let m = record_observation(&StoreMetrics::default(), 1.0, &w).unwrap();
        assert!((m.latency_ewma - 0.2).abs() < 1e-15);
        assert!(record_observation(&m, -1.0, &w).is_err());
        assert!(record_observation(&m, f64::INFINITY, &w).is_err());
    }

    #[test]
    fn update_touches_only_given_fields() {
        let base = metrics(1e6, 0.1, 10, 0.3);
        let next = update_metrics(
            &base,
            &MetricsUpdate {
                server_load: Some(0.9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(next, metrics(1e6, 0.9, 10, 0.3));
        assert!(update_metrics(
            &base,
            &MetricsUpdate {
                bandwidth: Some(0.0),
                ..Default::default()
            }
        )
        .is_err());
        let w = PolicyWeights::default();
        let fewer = update_metrics(
            &base,
            &MetricsUpdate {
                active_clients: Some(0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(score(&fewer, &w, 64).unwrap() < score(&base, &w, 64).unwrap());
    }
}
