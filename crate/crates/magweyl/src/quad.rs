//! Cached Gauss rules.

use gauss_quad::{GaussHermite, GaussLegendre};
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights on [0, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn cache() -> &'static Mutex<HashMap<(u8, usize), Arc<Rule>>> {
    static C: OnceLock<Mutex<HashMap<(u8, usize), Arc<Rule>>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

thread_local! {
    static LOCAL_LEGENDRE: std::cell::RefCell<HashMap<usize, Arc<Rule>>> = std::cell::RefCell::new(HashMap::new());
}

/// Gauss–Legendre rule of the given order mapped to [0, 1].
pub fn legendre01(order: usize) -> Arc<Rule> {
    let order = order.max(1);
    LOCAL_LEGENDRE.with(|l| {
        if let Some(r) = l.borrow().get(&order) {
            return r.clone();
        }
        let r = shared_legendre01(order);
        l.borrow_mut().insert(order, r.clone());
        r
    })
}

fn shared_legendre01(order: usize) -> Arc<Rule> {
    let mut c = cache().lock().unwrap();
    c.entry((0, order))
        .or_insert_with(|| {
            let gl = GaussLegendre::new(NonZeroUsize::new(order).unwrap());
            let (nodes, weights) = gl
                .as_node_weight_pairs()
                .iter()
                .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                .unzip();
            Arc::new(Rule { nodes, weights })
        })
        .clone()
}

/// Gauss–Hermite rule for the weight e^{-t²}, with the weights already
/// multiplied by e^{t²} so that `Σ w_i g(t_i) ≈ ∫ g(t) dt` for Gaussian-decaying g.
pub fn hermite_scaled(order: usize) -> Arc<Rule> {
    let order = order.max(1);
    let mut c = cache().lock().unwrap();
    c.entry((1, order))
        .or_insert_with(|| {
            let gh = GaussHermite::new(NonZeroUsize::new(order).unwrap());
            let (nodes, weights) = gh
                .as_node_weight_pairs()
                .iter()
                .map(|&(x, w)| (x, w * (x * x).exp()))
                .unzip();
            Arc::new(Rule { nodes, weights })
        })
        .clone()
}

/// Nodes and weights for ∫ g(t) dt when g carries a Gaussian envelope of the
/// given center and standard deviation.
pub fn hermite_on(center: f64, sigma: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let r = hermite_scaled(order);
    let s = std::f64::consts::SQRT_2 * sigma;
    (r.nodes.iter().map(|t| center + s * t).collect(), r.weights.iter().map(|w| w * s).collect())
}

/// Gauss–Legendre nodes and weights on [a, b].
pub fn legendre_on(a: f64, b: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let r = legendre01(order);
    (r.nodes.iter().map(|t| a + (b - a) * t).collect(), r.weights.iter().map(|w| w * (b - a)).collect())
}

/// Smallest Gauss–Legendre order that is exact for polynomials of degree `deg`.
pub fn exact_order(deg: usize) -> usize {
    (deg + 2) / 2
}
