//! Polynomial primitives: Lagrange basis on a node set, Chebyshev polynomials of the
//! first kind and Legendre polynomials with their first two derivatives.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Highest Legendre degree evaluated by [`legendre_eval`].
pub const MAX_LEGENDRE_DEGREE: usize = 60;

/// Relative tolerance (times interval width) under which two nodes are considered equal.
const DEGENERATE_TOL: f64 = 1e-14;

/// Absolute distance under which Lagrange evaluation snaps to a node.
const NODE_SNAP_TOL: f64 = 1e-14;

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidInterval(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    /// The reference interval `[-1, 1]`.
    pub fn unit() -> Self {
        Interval { lo: -1.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Maps `t ∈ [-1, 1]` onto this interval. The endpoints map exactly.
    pub fn from_reference(&self, t: f64) -> f64 {
        if t == -1.0 {
            return self.lo;
        }
        if t == 1.0 {
            return self.hi;
        }
        self.midpoint() + 0.5 * self.width() * t
    }

    /// Inverse of [`Interval::from_reference`].
    pub fn to_reference(&self, x: f64) -> f64 {
        if x == self.lo {
            return -1.0;
        }
        if x == self.hi {
            return 1.0;
        }
        (x - self.midpoint()) / (0.5 * self.width())
    }

    pub fn is_unit(&self) -> bool {
        self.lo == -1.0 && self.hi == 1.0
    }
}

/// `(a+b)/2 + (b-a)/2 · t`.
pub fn affine_map(interval: &Interval, t: f64) -> f64 {
    interval.from_reference(t)
}

/// Inverse of [`affine_map`].
pub fn affine_unmap(interval: &Interval, x: f64) -> f64 {
    interval.to_reference(x)
}

/// Strictly increasing interpolation nodes inside a closed interval, with the
/// Lagrange denominators `∏_{j≠i}(x_i - x_j)` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<f64>,
    interval: Interval,
    denominators: Vec<f64>,
}

impl NodeSet {
    pub fn new(nodes: Vec<f64>, interval: Interval) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidNodes(format!(
                "at least 2 nodes are required, got {}",
                nodes.len()
            )));
        }
        if let Some(bad) = nodes.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidNodes(format!("non-finite node {bad}")));
        }
        let tol = DEGENERATE_TOL * interval.width();
        for w in nodes.windows(2) {
            if (w[1] - w[0]).abs() < tol {
                return Err(Error::DegenerateNodes(w[0], w[1]));
            }
            if w[1] <= w[0] {
                return Err(Error::InvalidNodes(format!(
                    "nodes must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(out) = nodes.iter().find(|&&x| !interval.contains(x)) {
            return Err(Error::InvalidNodes(format!(
                "node {out} lies outside [{}, {}]",
                interval.lo(),
                interval.hi()
            )));
        }
        let denominators = (0..nodes.len())
            .map(|i| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &xj)| nodes[i] - xj)
                    .product()
            })
            .collect();
        Ok(NodeSet {
            nodes,
            interval,
            denominators,
        })
    }

    /// Node set whose interval is `[first node, last node]`.
    pub fn spanning(nodes: Vec<f64>) -> Result<Self> {
        let (lo, hi) = match (nodes.first(), nodes.last()) {
            (Some(&lo), Some(&hi)) if nodes.len() >= 2 => (lo, hi),
            _ => {
                return Err(Error::InvalidNodes(format!(
                    "at least 2 nodes are required, got {}",
                    nodes.len()
                )))
            }
        };
        let interval = Interval::new(lo, hi)
            .map_err(|_| Error::InvalidNodes("nodes must be strictly increasing".to_string()))?;
        NodeSet::new(nodes, interval)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lagrange denominators `∏_{j≠i}(x_i - x_j)`.
    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }

    fn snapped_node(&self, x: f64) -> Option<usize> {
        self.nodes
            .iter()
            .position(|&xi| (x - xi).abs() <= NODE_SNAP_TOL)
    }

    /// Elementary Lagrange polynomials `l_0(x), …, l_{g-1}(x)`.
    pub fn lagrange_basis(&self, x: f64) -> Vec<f64> {
        let g = self.nodes.len();
        if let Some(i) = self.snapped_node(x) {
            let mut e = vec![0.0; g];
            e[i] = 1.0;
            return e;
        }
        (0..g)
            .map(|i| {
                let num: f64 = self
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &xj)| x - xj)
                    .product();
                num / self.denominators[i]
            })
            .collect()
    }

    /// Lagrange basis values together with their first derivatives.
    pub fn lagrange_basis_with_derivative(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let g = self.nodes.len();
        let values = self.lagrange_basis(x);
        let derivs = (0..g)
            .map(|i| {
                let mut sum = 0.0;
                for m in (0..g).filter(|&m| m != i) {
                    let prod: f64 = (0..g)
                        .filter(|&k| k != i && k != m)
                        .map(|k| x - self.nodes[k])
                        .product();
                    sum += prod;
                }
                sum / self.denominators[i]
            })
            .collect();
        (values, derivs)
    }

    /// Affinely remaps the nodes onto another interval.
    pub fn rescaled(&self, target: Interval) -> Result<NodeSet> {
        let nodes = self
            .nodes
            .iter()
            .map(|&x| target.from_reference(self.interval.to_reference(x)))
            .collect();
        NodeSet::new(nodes, target)
    }
}

/// Chebyshev polynomial of the first kind, by the three-term recurrence.
pub fn chebyshev_t(degree: usize, x: f64) -> f64 {
    match degree {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut curr) = (1.0, x);
            for _ in 1..degree {
                let next = 2.0 * x * curr - prev;
                prev = curr;
                curr = next;
            }
            curr
        }
    }
}

/// `cos(kπ/m)` with exact values at multiples of π/3 and π/2 and exact odd symmetry
/// about π/2.
pub fn cos_pi_ratio(k: usize, m: usize) -> f64 {
    assert!(m > 0 && k <= m, "cos_pi_ratio expects 0 <= k <= m, m > 0");
    if 2 * k > m {
        return -cos_pi_ratio(m - k, m);
    }
    if k == 0 {
        1.0
    } else if 2 * k == m {
        0.0
    } else if 3 * k == m {
        0.5
    } else {
        // sin of the complementary angle is accurate near the zero crossing
        ((m - 2 * k) as f64 * PI / (2 * m) as f64).sin()
    }
}

/// Value and first two derivatives of a Legendre polynomial at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreEval {
    pub value: f64,
    pub first_deriv: f64,
    pub second_deriv: f64,
}

/// Evaluates `P_degree(x)`, `P'` and `P''` by Bonnet's recurrence and its
/// differentiated forms.
pub fn legendre_eval(degree: usize, x: f64) -> Result<LegendreEval> {
    if degree > MAX_LEGENDRE_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_LEGENDRE_DEGREE,
        });
    }
    Ok(legendre_unchecked(degree, x))
}

fn legendre_unchecked(degree: usize, x: f64) -> LegendreEval {
    // (P_{k-1}, P'_{k-1}, P''_{k-1}) and (P_k, P'_k, P''_k)
    let mut prev = (1.0, 0.0, 0.0);
    let mut curr = (x, 1.0, 0.0);
    if degree == 0 {
        return LegendreEval {
            value: 1.0,
            first_deriv: 0.0,
            second_deriv: 0.0,
        };
    }
    for k in 1..degree {
        let kf = k as f64;
        let a = 2.0 * kf + 1.0;
        let next = (
            (a * x * curr.0 - kf * prev.0) / (kf + 1.0),
            (a * (curr.0 + x * curr.1) - kf * prev.1) / (kf + 1.0),
            (a * (2.0 * curr.1 + x * curr.2) - kf * prev.2) / (kf + 1.0),
        );
        prev = curr;
        curr = next;
    }
    LegendreEval {
        value: curr.0,
        first_deriv: curr.1,
        second_deriv: curr.2,
    }
}

/// The `degree - 1` roots of `P'_degree` in `(-1, 1)`, sorted increasing.
///
/// Brackets come from sign changes of `P'` on a uniform grid of `64·degree` cells;
/// each bracket is bisected down to width 1e-6 and then polished by Newton's
/// method on `P'` (with `P''` as slope) until the step falls below 1e-12.
pub fn legendre_deriv_roots(degree: usize) -> Result<Vec<f64>> {
    if degree > MAX_LEGENDRE_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_LEGENDRE_DEGREE,
        });
    }
    if degree <= 1 {
        return Ok(Vec::new());
    }
    let deriv = |x: f64| legendre_unchecked(degree, x).first_deriv;
    let cells = 64 * degree;
    let grid = |k: usize| -1.0 + 2.0 * k as f64 / cells as f64;

    let mut roots = Vec::with_capacity(degree - 1);
    let mut left = grid(1);
    let mut f_left = deriv(left);
    if f_left == 0.0 {
        roots.push(left);
    }
    for k in 2..cells {
        let right = grid(k);
        let f_right = deriv(right);
        if f_right == 0.0 {
            roots.push(right);
        } else if f_left != 0.0 && f_left.signum() != f_right.signum() {
            roots.push(refine_root(degree, left, right, f_left));
        }
        left = right;
        f_left = f_right;
    }
    debug_assert_eq!(roots.len(), degree - 1);
    // P'_degree has parity opposite to degree; symmetrize the pairs
    let n = roots.len();
    for i in 0..n / 2 {
        let m = 0.5 * (roots[n - 1 - i] - roots[i]);
        roots[i] = -m;
        roots[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        roots[n / 2] = 0.0;
    }
    Ok(roots)
}

fn refine_root(degree: usize, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    let deriv = |x: f64| legendre_unchecked(degree, x);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let f_mid = deriv(mid).first_deriv;
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let e = deriv(x);
        if e.second_deriv == 0.0 {
            break;
        }
        let step = e.first_deriv / e.second_deriv;
        x -= step;
        if step.abs() < 1e-12 {
            // one extra step lands on the floating-point root
            let e = deriv(x);
            if e.second_deriv != 0.0 {
                x -= e.first_deriv / e.second_deriv;
            }
            break;
        }
    }
    x
}
