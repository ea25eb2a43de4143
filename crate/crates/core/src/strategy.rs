//! Variable selection: argmax over a property with a declaration-order
//! tie-break, the input-only restriction and prohibition depths.

use thiserror::Error;

use crate::metrics::{weight, PropertyKind, StaticWeights, Weight};
use crate::model::{Model, VarId};
use crate::propagate::DomainStore;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("stale selector trail mark {mark} (trail length {len})")]
    StaleMark { mark: usize, len: usize },
}

/// The variables a selector may ever branch on. Under the restriction
/// these are the inputs (plus any variable no assignment defines, which
/// propagation could never fix); otherwise every variable.
pub fn universe(m: &Model, restrict: bool) -> Vec<VarId> {
    if restrict {
        m.free_vars()
    } else {
        m.var_ids().collect()
    }
}

/// `min(u, |universe|)`.
pub fn clamp_horizon(u: usize, m: &Model, restrict: bool) -> usize {
    u.min(universe(m, restrict).len())
}

#[derive(Debug, Clone)]
pub struct SelectorState {
    property: PropertyKind,
    statics: StaticWeights,
    restrict: bool,
    horizon: usize,
    universe: Vec<VarId>,
    last: Vec<i64>,
    trail: Vec<(usize, i64)>,
    fallbacks: u64,
}

impl SelectorState {
    pub fn new(m: &Model, property: PropertyKind, restrict: bool, u: usize) -> SelectorState {
        SelectorState {
            property,
            statics: StaticWeights::compute(m),
            restrict,
            horizon: clamp_horizon(u, m, restrict),
            universe: universe(m, restrict),
            last: vec![0; m.num_vars()],
            trail: Vec::new(),
            fallbacks: 0,
        }
    }

    pub fn property(&self) -> PropertyKind {
        self.property
    }

    pub fn restrict(&self) -> bool {
        self.restrict
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn statics(&self) -> &StaticWeights {
        &self.statics
    }

    pub fn last(&self, x: VarId) -> i64 {
        self.last[x.0]
    }

    /// Times the prohibition filter had to be ignored.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    /// Reverts every prohibition depth set since `mark`, latest first.
    pub fn restore_to(&mut self, mark: usize) -> Result<(), StrategyError> {
        if mark > self.trail.len() {
            return Err(StrategyError::StaleMark {
                mark,
                len: self.trail.len(),
            });
        }
        while self.trail.len() > mark {
            let (x, old) = self.trail.pop().expect("non-empty");
            self.last[x] = old;
        }
        Ok(())
    }

    /// The unbound variables of the universe allowed at `depth`.
    pub fn candidates(&self, store: &DomainStore, depth: usize) -> Vec<VarId> {
        let d = depth as i64;
        self.universe
            .iter()
            .copied()
            .filter(|&x| !store.is_bound(x) && self.last[x.0] <= d)
            .collect()
    }

    /// Picks the branching variable at a node of depth `depth`, or `None`
    /// when every variable of the universe is bound.
    pub fn select(&mut self, store: &DomainStore, m: &Model, depth: usize) -> Option<VarId> {
        let d = depth as i64;
        let unbound: Vec<VarId> = self
            .universe
            .iter()
            .copied()
            .filter(|&x| !store.is_bound(x))
            .collect();
        if unbound.is_empty() {
            return None;
        }
        let allowed: Vec<VarId> = unbound.iter().copied().filter(|&x| self.last[x.0] <= d).collect();
        let pool = if allowed.is_empty() {
            self.fallbacks += 1;
            unbound
        } else {
            allowed
        };
        let mut best: Option<(VarId, Weight)> = None;
        for x in pool {
            let w = weight(self.property, x, m, &self.statics, store.domains());
            match &best {
                Some((_, bw)) if w <= *bw => {}
                _ => best = Some((x, w)),
            }
        }
        let (x, _) = best.expect("non-empty pool");
        self.trail.push((x.0, self.last[x.0]));
        self.last[x.0] = d + self.horizon as i64;
        Some(x)
    }
}
