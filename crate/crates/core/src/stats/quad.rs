//! Numerical integration: adaptive Gauss-Kronrod for one-off integrals and
//! cached Gauss-Legendre rules for the fixed-grid inner loops.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Integration request over a finite interval.
///
/// Subdivision stops when each panel's Gauss-Kronrod error estimate is below
/// `abs_tol + rel_tol * |integral|`; on smooth integrands the result is good
/// to better than 1e-9.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub lower: f64,
    pub upper: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
}

impl Quadrature {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::InvalidParameter(format!(
                "quadrature interval [{lower}, {upper}] is not a finite ordered range"
            )));
        }
        Ok(Self {
            lower,
            upper,
            rel_tol: 1e-11,
            abs_tol: 1e-16,
            max_subdivisions: 4000,
        })
    }

    pub fn with_tolerance(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

// 7-point Gauss / 15-point Kronrod pair (positive abscissae), given to
// their published width.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod panel: returns (K15 estimate, |K15 - G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half.abs())
}

/// Adaptive integration of `f` over the interval in `q`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, q: &Quadrature) -> Result<f64> {
    if q.lower >= q.upper {
        return Err(Error::InvalidParameter(format!(
            "quadrature interval [{}, {}] is empty",
            q.lower, q.upper
        )));
    }
    // worklist of (a, b, estimate, error)
    let (est, err) = gk15(&f, q.lower, q.upper);
    let mut panels = vec![(q.lower, q.upper, est, err)];
    let mut splits = 0u32;
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let tol = q.abs_tol + q.rel_tol * total.abs();
        // split the worst panel until every panel meets its share of the tolerance
        let (idx, &(a, b, _, worst)) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("panel list is never empty");
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            return Ok(total);
        }
        if splits >= q.max_subdivisions || worst == 0.0 {
            return Err(Error::QuadratureNonConvergence {
                best_estimate: total,
                error_bound: total_err,
            });
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // interval exhausted at double precision
            return Err(Error::QuadratureNonConvergence {
                best_estimate: total,
                error_bound: total_err,
            });
        }
        let left = gk15(&f, a, mid);
        let right = gk15(&f, mid, b);
        panels[idx] = (a, mid, left.0, left.1);
        panels.push((mid, b, right.0, right.1));
        splits += 1;
    }
}

/// Cached node/weight table shared by every caller of one rule order.
type RuleCache = Mutex<HashMap<usize, (Arc<[f64]>, Arc<[f64]>)>>;

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(order: usize) -> (Arc<[f64]>, Arc<[f64]>) {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&order) {
        return hit.clone();
    }
    let (nodes, weights) = compute_gauss_legendre(order);
    let entry = (Arc::from(nodes), Arc::from(weights));
    cache
        .lock()
        .unwrap()
        .entry(order)
        .or_insert_with(|| entry.clone());
    entry
}

/// Newton iteration on the Legendre polynomial roots.
fn compute_gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2, "need at least two nodes");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and its derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Map cached [-1, 1] nodes onto [a, b], filling `ys` and `ws`.
pub fn gauss_legendre_on(a: f64, b: f64, order: usize, ys: &mut Vec<f64>, ws: &mut Vec<f64>) {
    let (nodes, weights) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    ys.clear();
    ws.clear();
    ys.extend(nodes.iter().map(|t| mid + half * t));
    ws.extend(weights.iter().map(|w| half * w));
}
