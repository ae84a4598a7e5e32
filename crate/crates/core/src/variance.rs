//! Variance of the Lagrange estimator `Σ_j Ȳ_j l_j(x)` under a design, its
//! maximum over an interval, the Guest closed form and the Hoel-Levine/Guest
//! crossover radius.

use crate::design::{chebyshev_nodes, Design};
use crate::error::{Error, Result};
use crate::poly::{legendre_eval, Interval, NodeSet};

/// Grid used to bracket stationary points of the variance polynomial.
const MAX_SEARCH_GRID: usize = 512;

/// Which per-node allocation the variance divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Allocation {
    /// Rounded integer frequencies `n_j`.
    #[default]
    Frequencies,
    /// Continuous weights `w_j`.
    Weights,
}

fn masses(d: &Design, alloc: Allocation) -> Result<Vec<f64>> {
    match alloc {
        Allocation::Frequencies => {
            if let Some(j) = d.frequencies().iter().position(|&f| f == 0) {
                return Err(Error::InfiniteVariance(j));
            }
            Ok(d.frequencies().iter().map(|&f| f as f64).collect())
        }
        Allocation::Weights => {
            if let Some(j) = d.weights().iter().position(|&w| w <= 0.0) {
                return Err(Error::InfiniteVariance(j));
            }
            Ok(d.weights().to_vec())
        }
    }
}

fn weighted_square_sum(nodes: &NodeSet, masses: &[f64], x: f64) -> f64 {
    nodes
        .lagrange_basis(x)
        .iter()
        .zip(masses)
        .map(|(l, m)| l * l / m)
        .sum()
}

fn weighted_square_sum_slope(nodes: &NodeSet, masses: &[f64], x: f64) -> f64 {
    let (l, dl) = nodes.lagrange_basis_with_derivative(x);
    l.iter()
        .zip(&dl)
        .zip(masses)
        .map(|((l, dl), m)| 2.0 * l * dl / m)
        .sum()
}

/// `σ² Σ_j l_j(x)² / m_j`, the variance of the Lagrange estimator at `x`.
pub fn variance_at(d: &Design, sigma2: f64, x: f64, alloc: Allocation) -> Result<f64> {
    let m = masses(d, alloc)?;
    Ok(sigma2 * weighted_square_sum(d.nodes(), &m, x))
}

/// Maximum of `x ↦ Σ_j l_j(x)² / m_j` over `[lo, hi]`.
///
/// The function is a polynomial of degree `2(g-1)`, so its maximum sits at an
/// endpoint or at a root of its derivative. Roots are bracketed on a 512-point
/// grid and bisected to 1e-12.
pub fn max_weighted_square_sum(nodes: &NodeSet, masses: &[f64], interval: Interval) -> (f64, f64) {
    let (lo, hi) = (interval.lo(), interval.hi());
    let f = |x: f64| weighted_square_sum(nodes, masses, x);
    let slope = |x: f64| weighted_square_sum_slope(nodes, masses, x);

    let mut candidates = vec![lo, hi];
    let step = (hi - lo) / (MAX_SEARCH_GRID - 1) as f64;
    let grid = |k: usize| {
        if k == MAX_SEARCH_GRID - 1 {
            hi
        } else {
            lo + k as f64 * step
        }
    };
    let tol = 1e-12 * interval.width().max(1.0);

    let mut a = lo;
    let mut sa = slope(a);
    for k in 1..MAX_SEARCH_GRID {
        let b = grid(k);
        let sb = slope(b);
        if sb == 0.0 {
            candidates.push(b);
        } else if sa != 0.0 && sa.signum() != sb.signum() {
            let (mut left, mut right, mut s_left) = (a, b, sa);
            while right - left > tol {
                let mid = 0.5 * (left + right);
                let s_mid = slope(mid);
                if s_mid == 0.0 {
                    left = mid;
                    right = mid;
                    break;
                }
                if s_mid.signum() == s_left.signum() {
                    left = mid;
                    s_left = s_mid;
                } else {
                    right = mid;
                }
            }
            candidates.push(0.5 * (left + right));
        }
        a = b;
        sa = sb;
    }

    candidates
        .into_iter()
        .map(|x| (x, f(x)))
        .fold(
            (lo, f64::NEG_INFINITY),
            |best, c| if c.1 > best.1 { c } else { best },
        )
}

/// `(argmax, max)` of the variance over `interval`.
pub fn max_variance_on_interval(
    d: &Design,
    sigma2: f64,
    interval: Interval,
    alloc: Allocation,
) -> Result<(f64, f64)> {
    let m = masses(d, alloc)?;
    let (x, v) = max_weighted_square_sum(d.nodes(), &m, interval);
    Ok((x, sigma2 * v))
}

/// `σ² (Σ_i |l_i(x)|)² / n`: the variance at `x` under the continuous weights
/// that minimize it for the given nodes.
pub fn hl_envelope_variance(nodes: &NodeSet, sigma2: f64, n: usize, x: f64) -> f64 {
    let s: f64 = nodes.lagrange_basis(x).iter().map(|l| l.abs()).sum();
    sigma2 * s * s / n as f64
}

/// Guest design variance with equal continuous weights on `[-1, 1]`:
/// `(1 + (x²-1) P'_{g-1}(x)² / (g(g-1))) · gσ²/n`.
pub fn guest_variance_closed_form(g: usize, n: usize, sigma2: f64, x: f64) -> Result<f64> {
    if g < 2 {
        return Err(Error::InvalidRequest(format!(
            "g must be at least 2, got {g}"
        )));
    }
    let p = legendre_eval(g - 1, x)?;
    let gf = g as f64;
    let shape = 1.0 + (x * x - 1.0) * p.first_deriv * p.first_deriv / (gf * (gf - 1.0));
    Ok(shape * gf * sigma2 / n as f64)
}

/// `(2d)! / (2^d (d!)²)`, the leading coefficient of `P_d`.
pub fn legendre_leading_coefficient(d: usize) -> f64 {
    (1..=d).map(|k| (d + k) as f64 / (2 * k) as f64).product()
}

/// Leading-order Guest variance for `|x| > 1`:
/// `(g-1) c_{g-1}² x^{2(g-1)} σ²/n` with `c_d` the leading coefficient of `P_d`.
pub fn extrapolation_asymptote(g: usize, n: usize, sigma2: f64, x: f64) -> Result<f64> {
    if g < 2 {
        return Err(Error::InvalidRequest(format!(
            "g must be at least 2, got {g}"
        )));
    }
    if !(x.abs() > 1.0) {
        return Err(Error::Domain(format!(
            "extrapolation asymptote needs |x| > 1, got {x}"
        )));
    }
    let d = g - 1;
    let c = legendre_leading_coefficient(d);
    Ok(d as f64 * c * c * x.powi(2 * d as i32) * sigma2 / n as f64)
}

/// Interior maximum over extrapolation variance for the Hoel-Levine design at `c`:
/// `max_{[-1,1]} Σ l_j(x)²/|l_j(c)|  /  Σ_j |l_j(c)|`, on Chebyshev nodes.
pub fn crossover_ratio(g: usize, c: f64) -> Result<f64> {
    let nodes = chebyshev_nodes(g)?;
    ratio_on(&nodes, c)
}

fn ratio_on(nodes: &NodeSet, c: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(Error::Domain(format!(
            "crossover ratio needs c > 1, got {c}"
        )));
    }
    let abs_l: Vec<f64> = nodes.lagrange_basis(c).iter().map(|l| l.abs()).collect();
    let sum: f64 = abs_l.iter().sum();
    let (_, max) = max_weighted_square_sum(nodes, &abs_l, Interval::unit());
    Ok(max / sum)
}

/// The radius `c₁ > 1` where the crossover ratio equals one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverResult {
    pub g: usize,
    pub c1: f64,
    pub ratio_at_c1: f64,
    pub iterations: usize,
}

/// Solves `R(c₁) = 1`. The ratio is strictly decreasing on `(1, ∞)`, so the root is
/// bracketed by doubling the offset from `1 + 1e-6` and then bisected.
pub fn crossover_c1(g: usize) -> Result<CrossoverResult> {
    let nodes = chebyshev_nodes(g)?;
    let r = |c: f64| ratio_on(&nodes, c);

    let mut offset = 1e-6;
    let mut iterations = 0;
    while r(1.0 + offset)? >= 1.0 {
        offset *= 2.0;
        iterations += 1;
    }
    let (mut lo, mut hi) = (1.0 + 0.5 * offset, 1.0 + offset);
    let (mut c, mut ratio) = (hi, r(hi)?);
    while hi - lo > 1e-15 * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let rm = r(mid)?;
        if (rm - 1.0).abs() < (ratio - 1.0).abs() {
            c = mid;
            ratio = rm;
        }
        if rm == 1.0 {
            break;
        }
        if rm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CrossoverResult {
        g,
        c1: c,
        ratio_at_c1: ratio,
        iterations,
    })
}

/// Sampled variance curve with its refined maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    pub sigma2: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub max_point: f64,
    pub max_value: f64,
}

impl VarianceProfile {
    /// Evaluates the variance on `points` equally spaced abscissas of `interval`.
    pub fn compute(
        d: &Design,
        sigma2: f64,
        interval: Interval,
        points: usize,
        alloc: Allocation,
    ) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidRequest(format!(
                "a profile needs at least 2 points, got {points}"
            )));
        }
        let m = masses(d, alloc)?;
        let step = interval.width() / (points - 1) as f64;
        let grid: Vec<f64> = (0..points)
            .map(|k| {
                if k == points - 1 {
                    interval.hi()
                } else {
                    interval.lo() + k as f64 * step
                }
            })
            .collect();
        let values = grid
            .iter()
            .map(|&x| sigma2 * weighted_square_sum(d.nodes(), &m, x))
            .collect();
        let (max_point, max) = max_weighted_square_sum(d.nodes(), &m, interval);
        Ok(VarianceProfile {
            sigma2,
            grid,
            values,
            max_point,
            max_value: sigma2 * max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{guest_design, hoel_levine_design, DesignRequest};

    fn hl_example() -> Design {
        hoel_levine_design(&DesignRequest::unit(4, 52, Some(2.0)).unwrap()).unwrap()
    }

    #[test]
    fn worked_example_variances() {
        let d = hl_example();
        let v = variance_at(&d, 1.0, 2.0, Allocation::Frequencies).unwrap();
        assert!((v - 13.0).abs() < 1e-12);

        let third = 1.0 / 3.0;
        let nodes = NodeSet::new(vec![-1.0, -third, third, 1.0], Interval::unit()).unwrap();
        let u = Design::from_frequencies(nodes, vec![13; 4]).unwrap();
        let v = variance_at(&u, 1.0, 2.0, Allocation::Frequencies).unwrap();
        assert!((v - 66196.0 / 3328.0).abs() < 1e-10);
    }

    #[test]
    fn variance_at_node_is_sigma2_over_mass() {
        let d = hl_example();
        for (j, &x) in d.nodes().nodes().iter().enumerate() {
            let v = variance_at(&d, 2.0, x, Allocation::Frequencies).unwrap();
            assert_eq!(v, 2.0 / d.frequencies()[j] as f64);
        }
    }

    #[test]
    fn envelope_examples() {
        let nodes = chebyshev_nodes(4).unwrap();
        assert!((hl_envelope_variance(&nodes, 1.0, 52, 2.0) - 13.0).abs() < 1e-12);
        assert_eq!(hl_envelope_variance(&nodes, 1.0, 52, 1.0), 1.0 / 52.0);
        let two = chebyshev_nodes(2).unwrap();
        assert!((hl_envelope_variance(&two, 1.0, 1, 3.0) - 9.0).abs() < 1e-12);
        let d = hl_example();
        let w = variance_at(&d, 1.0, 2.0, Allocation::Weights).unwrap();
        assert!((w - 13.0).abs() < 1e-12);
    }

    #[test]
    fn guest_closed_form_examples() {
        for &x in &[-1.7, -0.3, 0.0, 0.8, 2.0] {
            let v = guest_variance_closed_form(2, 5, 1.0, x).unwrap();
            assert!((v - (1.0 + x * x) / 5.0).abs() < 1e-14);
        }
        assert_eq!(guest_variance_closed_form(3, 3, 1.0, 0.0).unwrap(), 1.0);
        let d = guest_design(&DesignRequest::unit(5, 50, None).unwrap()).unwrap();
        for &x in d.nodes().nodes() {
            let v = guest_variance_closed_form(5, 50, 1.0, x).unwrap();
            assert!((v - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptote_examples() {
        assert_eq!(extrapolation_asymptote(2, 4, 1.0, 3.0).unwrap(), 9.0 / 4.0);
        assert_eq!(extrapolation_asymptote(5, 4, 0.0, 3.0).unwrap(), 0.0);
        let a = extrapolation_asymptote(4, 10, 1.0, 50.0).unwrap();
        let c = guest_variance_closed_form(4, 10, 1.0, 50.0).unwrap();
        assert!((a / c - 1.0).abs() < 0.01);
        assert!(matches!(
            extrapolation_asymptote(4, 10, 1.0, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            extrapolation_asymptote(4, 10, 1.0, -1.0),
            Err(Error::Domain(_))
        ));
        assert_eq!(legendre_leading_coefficient(2), 1.5);
        assert_eq!(legendre_leading_coefficient(3), 2.5);
    }

    #[test]
    fn interval_max_examples() {
        let two = chebyshev_nodes(2).unwrap();
        let d = Design::from_frequencies(two, vec![1, 1]).unwrap();
        let (x, v) =
            max_variance_on_interval(&d, 1.0, Interval::unit(), Allocation::Frequencies).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(x.abs(), 1.0);
        assert_eq!(
            variance_at(&d, 1.0, 0.0, Allocation::Frequencies).unwrap(),
            0.5
        );

        let hl = hl_example();
        let (x, _) = max_variance_on_interval(
            &hl,
            1.0,
            Interval::new(1.0, 2.0).unwrap(),
            Allocation::Frequencies,
        )
        .unwrap();
        assert_eq!(x, 2.0);

        let g = guest_design(&DesignRequest::unit(4, 40, None).unwrap()).unwrap();
        let (_, v) =
            max_variance_on_interval(&g, 1.0, Interval::unit(), Allocation::Frequencies).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_frequency_is_infinite_variance() {
        let nodes = chebyshev_nodes(3).unwrap();
        let d = Design::from_parts(
            nodes,
            vec![0.5, 1.0, 1.5],
            vec![0, 1, 2],
            3,
            crate::design::DesignKind::Custom,
        )
        .unwrap();
        assert!(matches!(
            variance_at(&d, 1.0, 0.0, Allocation::Frequencies),
            Err(Error::InfiniteVariance(0))
        ));
        assert!(variance_at(&d, 1.0, 0.0, Allocation::Weights).is_ok());
    }

    #[test]
    fn crossover_ratio_two_nodes() {
        for &c in &[1.5, 2.0, 3.0, 10.0] {
            let r = crossover_ratio(2, c).unwrap();
            assert!((r - 2.0 / (c * (c - 1.0))).abs() < 1e-12);
        }
        assert!(crossover_ratio(2, 3.0).unwrap() < crossover_ratio(2, 2.0).unwrap());
        assert!(crossover_ratio(2, 100.0).unwrap() < 0.01);
        assert!(matches!(crossover_ratio(2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn crossover_c1_values() {
        let r = crossover_c1(2).unwrap();
        assert!((r.c1 - 2.0).abs() < 1e-10);
        for g in 2..=8 {
            let r = crossover_c1(g).unwrap();
            assert!(r.c1 > 1.0);
            assert!((r.ratio_at_c1 - 1.0).abs() <= 1e-10, "g={g}: {:?}", r);
        }
    }

    #[test]
    fn profile_grid_and_max() {
        let two = chebyshev_nodes(2).unwrap();
        let d = Design::from_frequencies(two, vec![1, 1]).unwrap();
        let p = VarianceProfile::compute(&d, 1.0, Interval::unit(), 3, Allocation::Frequencies)
            .unwrap();
        assert_eq!(p.grid, vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.values, vec![1.0, 0.5, 1.0]);
        assert_eq!(p.max_value, 1.0);
        assert!(
            VarianceProfile::compute(&d, 1.0, Interval::unit(), 1, Allocation::Frequencies)
                .is_err()
        );
    }
}
