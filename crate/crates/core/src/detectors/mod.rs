//! Detector POVMs in the Fock basis and as normal-ordered symbols.

pub mod fock;
pub mod model;
pub mod quadrature;
pub mod symbol;
pub mod timing;

pub use fock::{fock_response, response_entry, FockResponse};
pub use model::{adjustment_efficiency, apd_capacity, DetectorModel, Envelope, Timing};
pub use quadrature::NodeRule;
pub use symbol::{normal_symbol, symbol, symbol_terms, SymbolTable};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Quadrature settings for pulse-counting integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Gauss–Legendre points per simplex dimension.
    pub order: usize,
    /// Chebyshev points used to compress a node rule in Ξ.
    pub compress: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            order: 24,
            compress: 24,
        }
    }
}

type RuleKey = (u64, u64, u64, u64, u8, usize, usize, usize);

fn rule_key(t: &Timing, n: usize, order: usize, compress: usize) -> RuleKey {
    let (shape, c, w) = match t.envelope {
        Envelope::Rectangular => (0u8, 0.0, 0.0),
        Envelope::TruncatedGaussian { center, width } => (1u8, center, width),
    };
    (
        t.dead_time.to_bits(),
        t.relax_time.to_bits(),
        c.to_bits(),
        w.to_bits(),
        shape,
        n,
        order,
        compress,
    )
}

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<NodeRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<NodeRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: RuleKey, build: impl FnOnce() -> NodeRule) -> Arc<NodeRule> {
    if let Some(rule) = rule_cache().lock().unwrap().get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(build());
    rule_cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert(rule)
        .clone()
}

/// Memoized node rule (weight·𝓘_n, Ξ_n) for n pulses.
pub fn pulse_rule(t: &Timing, n: usize, order: usize) -> Arc<NodeRule> {
    cached(rule_key(t, n, order, 0), || {
        quadrature::simplex_rule(t, n, order)
    })
}

/// Memoized Chebyshev compression of [`pulse_rule`].
pub fn compressed_rule(t: &Timing, n: usize, quad: QuadSpec) -> Arc<NodeRule> {
    cached(rule_key(t, n, quad.order, quad.compress.max(1)), || {
        pulse_rule(t, n, quad.order).compress(quad.compress)
    })
}
