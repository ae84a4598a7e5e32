//! Tensor-product Lagrange estimation on a stress rectangle: node-level GLS from
//! ordered observations and the α/β allocation rule for an unstressed target.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use rayon::prelude::*;

use crate::design::{
    chebyshev_nodes, hoel_levine_weights, positive_frequencies, round_frequencies, Design,
    DesignKind,
};
use crate::error::{Error, Result};
use crate::poly::{Interval, NodeSet};

/// The accelerated-test region `[a1,b1] × [a2,b2]`; its south-west corner is the
/// stress threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressRectangle {
    pub x_interval: Interval,
    pub y_interval: Interval,
}

impl StressRectangle {
    pub fn new(x_interval: Interval, y_interval: Interval) -> Self {
        StressRectangle {
            x_interval,
            y_interval,
        }
    }

    pub fn threshold(&self) -> (f64, f64) {
        (self.x_interval.lo(), self.y_interval.lo())
    }

    /// Componentwise `u ≤ threshold`; the corner itself is accepted.
    pub fn is_unstressed(&self, u: (f64, f64)) -> bool {
        let (a1, a2) = self.threshold();
        u.0 <= a1 && u.1 <= a2
    }

    fn check_unstressed(&self, u: (f64, f64)) -> Result<()> {
        if self.is_unstressed(u) {
            Ok(())
        } else {
            let (a1, a2) = self.threshold();
            Err(Error::NotExtrapolation {
                target: if u.0 > a1 { u.0 } else { u.1 },
                lo: if u.0 > a1 { a1 } else { a2 },
                hi: if u.0 > a1 {
                    self.x_interval.hi()
                } else {
                    self.y_interval.hi()
                },
            })
        }
    }
}

/// `l_{i1}(x) · l_{i2}(y)` for every index pair, rows indexed by `i1`.
pub fn tensor_lagrange_eval(
    x_nodes: &NodeSet,
    y_nodes: &NodeSet,
    point: (f64, f64),
) -> Vec<Vec<f64>> {
    let lx = x_nodes.lagrange_basis(point.0);
    let ly = y_nodes.lagrange_basis(point.1);
    lx.iter()
        .map(|a| ly.iter().map(|b| a * b).collect())
        .collect()
}

/// Tensor Lagrange reconstruction `Σ f(x_{i1}, y_{i2}) l_{i1}(x) l_{i2}(y)`.
pub fn tensor_interpolate(
    x_nodes: &NodeSet,
    y_nodes: &NodeSet,
    values: &[Vec<f64>],
    point: (f64, f64),
) -> f64 {
    tensor_lagrange_eval(x_nodes, y_nodes, point)
        .iter()
        .zip(values)
        .flat_map(|(lr, vr)| lr.iter().zip(vr).map(|(l, v)| l * v))
        .sum()
}

/// Continuous allocation from the α/β variance law, before rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousAllocation {
    /// `g1 × g2` grid of non-negative reals summing to `M1`.
    pub values: Vec<Vec<f64>>,
    /// True when some KKT entries went negative and were clamped to zero.
    pub clamped: bool,
}

/// Minimizes `Σ l_i(u)² / (α n_i + β)` subject to `Σ n_i = M1`, `n_i ≥ 0`.
///
/// On an active set `A` the stationarity condition gives
/// `α n_i + β = |l_i| (α M1 + β|A|) / Σ_A |l|`; entries that come out negative are
/// fixed at zero and the active set is solved again.
pub fn kkt_allocation(abs_l: &[f64], m1: f64, alpha: f64, beta: f64) -> (Vec<f64>, bool) {
    let mut active: Vec<bool> = vec![true; abs_l.len()];
    let mut clamped = false;
    loop {
        let count = active.iter().filter(|&&a| a).count() as f64;
        let s: f64 = abs_l
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(l, _)| l)
            .sum();
        let total = alpha * m1 + beta * count;
        let alloc: Vec<f64> = abs_l
            .iter()
            .zip(&active)
            .map(|(l, &a)| {
                if a {
                    (l * total / s - beta) / alpha
                } else {
                    0.0
                }
            })
            .collect();
        let negative: Vec<usize> = (0..alloc.len())
            .filter(|&i| active[i] && alloc[i] < 0.0)
            .collect();
        if negative.is_empty() {
            return (alloc, clamped);
        }
        clamped = true;
        for i in negative {
            active[i] = false;
        }
    }
}

fn check_alloc_params(g1: usize, g2: usize, m1: usize, alpha: f64, beta: f64) -> Result<()> {
    if g1 < 2 || g2 < 2 {
        return Err(Error::InvalidRequest(format!(
            "each axis needs at least 2 nodes, got {g1} × {g2}"
        )));
    }
    if !(alpha > 0.0) || !(beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidRequest(format!(
            "variance law needs alpha > 0 and beta >= 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if m1 < g1 * g2 {
        return Err(Error::InvalidRequest(format!(
            "budget M1 = {m1} is smaller than the {} grid nodes",
            g1 * g2
        )));
    }
    Ok(())
}

fn axis_nodes(g1: usize, g2: usize, rect: &StressRectangle) -> Result<(NodeSet, NodeSet)> {
    Ok((
        chebyshev_nodes(g1)?.rescaled(rect.x_interval)?,
        chebyshev_nodes(g2)?.rescaled(rect.y_interval)?,
    ))
}

fn grid_allocation(
    x_nodes: &NodeSet,
    y_nodes: &NodeSet,
    u: (f64, f64),
    m1: usize,
    alpha: f64,
    beta: f64,
) -> (ContinuousAllocation, Vec<Vec<usize>>) {
    let (g1, g2) = (x_nodes.len(), y_nodes.len());
    let abs_l: Vec<f64> = tensor_lagrange_eval(x_nodes, y_nodes, u)
        .into_iter()
        .flatten()
        .map(f64::abs)
        .collect();
    let (flat, clamped) = kkt_allocation(&abs_l, m1 as f64, alpha, beta);
    let rounded = if beta == 0.0 {
        // every node needs an observation when the variance law has no floor
        positive_frequencies(&flat, m1).unwrap_or_else(|_| round_frequencies(&flat, m1))
    } else {
        round_frequencies(&flat, m1)
    };
    let to_grid = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(g2).map(|r| r.to_vec()).collect() };
    let replications = rounded.chunks(g2).map(|r| r.to_vec()).collect();
    debug_assert_eq!(flat.len(), g1 * g2);
    (
        ContinuousAllocation {
            values: to_grid(&flat),
            clamped,
        },
        replications,
    )
}

/// Integer replication grid from the α/β allocation rule at Chebyshev product nodes.
pub fn generalized_frequencies(
    u: (f64, f64),
    rect: &StressRectangle,
    g1: usize,
    g2: usize,
    m1: usize,
    alpha: f64,
    beta: f64,
) -> Result<Vec<Vec<usize>>> {
    check_alloc_params(g1, g2, m1, alpha, beta)?;
    rect.check_unstressed(u)?;
    let (xn, yn) = axis_nodes(g1, g2, rect)?;
    Ok(grid_allocation(&xn, &yn, u, m1, alpha, beta).1)
}

/// Product of two per-axis Chebyshev designs on a stress rectangle with a
/// replication count per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateDesign {
    pub x_design: Design,
    pub y_design: Design,
    pub replications: Vec<Vec<usize>>,
    pub m1: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Unstressed point the allocation was computed for, when known.
    pub target: Option<(f64, f64)>,
    /// Continuous KKT allocation, when known.
    pub allocation: Option<ContinuousAllocation>,
}

impl BivariateDesign {
    pub fn x_nodes(&self) -> &NodeSet {
        self.x_design.nodes()
    }

    pub fn y_nodes(&self) -> &NodeSet {
        self.y_design.nodes()
    }

    pub fn rectangle(&self) -> StressRectangle {
        StressRectangle::new(self.x_design.interval(), self.y_design.interval())
    }

    /// Checks grid shape and budget; used when designs are read back from disk.
    pub fn validate(&self) -> Result<()> {
        let (g1, g2) = (self.x_design.g(), self.y_design.g());
        if self.replications.len() != g1 || self.replications.iter().any(|r| r.len() != g2) {
            return Err(Error::InvalidRequest(format!(
                "replication grid must be {g1} × {g2}"
            )));
        }
        let total: usize = self.replications.iter().flatten().sum();
        if total != self.m1 {
            return Err(Error::InvalidRequest(format!(
                "replications sum to {total}, expected M1 = {}",
                self.m1
            )));
        }
        Ok(())
    }
}

fn axis_design(nodes: NodeSet, m1: usize, target: f64) -> Result<Design> {
    let g = nodes.len();
    let (weights, kind) = if nodes.interval().contains(target) {
        (vec![m1 as f64 / g as f64; g], DesignKind::Custom)
    } else {
        (
            hoel_levine_weights(&nodes, target, m1 as f64),
            DesignKind::HoelLevine { target },
        )
    };
    let freqs = positive_frequencies(&weights, m1)?;
    Design::from_parts(nodes, weights, freqs, m1, kind)
}

/// Chebyshev product design with α/β replications for the unstressed point `u`.
pub fn bivariate_design(
    u: (f64, f64),
    rect: &StressRectangle,
    g1: usize,
    g2: usize,
    m1: usize,
    alpha: f64,
    beta: f64,
) -> Result<BivariateDesign> {
    check_alloc_params(g1, g2, m1, alpha, beta)?;
    rect.check_unstressed(u)?;
    let (xn, yn) = axis_nodes(g1, g2, rect)?;
    let (alloc, replications) = grid_allocation(&xn, &yn, u, m1, alpha, beta);
    Ok(BivariateDesign {
        x_design: axis_design(xn, m1, u.0)?,
        y_design: axis_design(yn, m1, u.1)?,
        replications,
        m1,
        alpha,
        beta,
        target: Some(u),
        allocation: Some(alloc),
    })
}

/// `σ²η² (Σ|l_i(u)|)² / (α M1 + β g1 g2)`.
#[allow(clippy::too_many_arguments)]
pub fn bivariate_variance_closed_form(
    x_nodes: &NodeSet,
    y_nodes: &NodeSet,
    m1: f64,
    alpha: f64,
    beta: f64,
    sigma2eta2: f64,
    u: (f64, f64),
) -> f64 {
    let sx: f64 = x_nodes.lagrange_basis(u.0).iter().map(|l| l.abs()).sum();
    let sy: f64 = y_nodes.lagrange_basis(u.1).iter().map(|l| l.abs()).sum();
    let cells = (x_nodes.len() * y_nodes.len()) as f64;
    sigma2eta2 * (sx * sy).powi(2) / (alpha * m1 + beta * cells)
}

/// `Σ_i l_i(u)² σ²η² / (α n_i + β)` for an arbitrary allocation grid.
///
/// Terms with `l_i(u) = 0` contribute nothing even where `α n_i + β = 0`.
pub fn bivariate_direct_variance(
    x_nodes: &NodeSet,
    y_nodes: &NodeSet,
    allocation: &[Vec<f64>],
    alpha: f64,
    beta: f64,
    sigma2eta2: f64,
    u: (f64, f64),
) -> f64 {
    tensor_lagrange_eval(x_nodes, y_nodes, u)
        .iter()
        .zip(allocation)
        .flat_map(|(lr, ar)| lr.iter().zip(ar))
        .map(|(l, n)| {
            if *l == 0.0 {
                0.0
            } else {
                l * l * sigma2eta2 / (alpha * n + beta)
            }
        })
        .sum()
}

/// How [`bivariate_variance`] obtained its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMethod {
    ClosedForm,
    /// Direct sum over the continuous allocation (clamping occurred or `u` is not
    /// the design target).
    DirectSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateVariance {
    pub value: f64,
    pub method: VarianceMethod,
    pub clamped: bool,
}

/// Variance of the tensor Lagrange estimator at `u` under the continuous allocation.
pub fn bivariate_variance(
    d: &BivariateDesign,
    sigma2eta2: f64,
    u: (f64, f64),
) -> Result<BivariateVariance> {
    d.rectangle().check_unstressed(u)?;
    let alloc = match &d.allocation {
        Some(a) => a.clone(),
        None => ContinuousAllocation {
            values: d
                .replications
                .iter()
                .map(|r| r.iter().map(|&v| v as f64).collect())
                .collect(),
            clamped: false,
        },
    };
    if !alloc.clamped && d.target == Some(u) {
        return Ok(BivariateVariance {
            value: bivariate_variance_closed_form(
                d.x_nodes(),
                d.y_nodes(),
                d.m1 as f64,
                d.alpha,
                d.beta,
                sigma2eta2,
                u,
            ),
            method: VarianceMethod::ClosedForm,
            clamped: false,
        });
    }
    Ok(BivariateVariance {
        value: bivariate_direct_variance(
            d.x_nodes(),
            d.y_nodes(),
            &alloc.values,
            d.alpha,
            d.beta,
            sigma2eta2,
            u,
        ),
        method: VarianceMethod::DirectSum,
        clamped: alloc.clamped,
    })
}

/// Node-level generalized least squares for ordered responses `Y = Xβ + e`,
/// `cov(e) ∝ Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsProblem {
    x: DMatrix<f64>,
    omega: DMatrix<f64>,
    y: DVector<f64>,
}

impl GlsProblem {
    /// Location-scale model: columns `1` and `expected_z` (expected standardized
    /// order statistics, or a constant `E(Z)` repeated).
    pub fn location_scale(omega: DMatrix<f64>, y: Vec<f64>, expected_z: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if expected_z.len() != n {
            return Err(Error::InvalidRequest(format!(
                "{n} responses but {} expected order statistics",
                expected_z.len()
            )));
        }
        let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { expected_z[r] });
        GlsProblem::new(x, omega, y)
    }

    /// Mean-only model (single column of ones).
    pub fn mean_only(omega: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let x = DMatrix::from_element(y.len(), 1, 1.0);
        GlsProblem::new(x, omega, y)
    }

    pub fn new(x: DMatrix<f64>, omega: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InsufficientData("no responses".into()));
        }
        if x.nrows() != n || omega.nrows() != n || omega.ncols() != n {
            return Err(Error::InvalidRequest(format!(
                "dimension mismatch: {n} responses, X is {}×{}, Ω is {}×{}",
                x.nrows(),
                x.ncols(),
                omega.nrows(),
                omega.ncols()
            )));
        }
        if x.ncols() == 0 || x.ncols() > n {
            return Err(Error::InvalidRequest(format!(
                "X has {} columns",
                x.ncols()
            )));
        }
        let scale = omega.amax().max(f64::MIN_POSITIVE);
        for r in 0..n {
            for c in 0..r {
                if (omega[(r, c)] - omega[(c, r)]).abs() > 1e-12 * scale {
                    return Err(Error::Covariance);
                }
            }
        }
        if y.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidRequest(
                "responses must be sorted ascending".into(),
            ));
        }
        Ok(GlsProblem {
            x,
            omega,
            y: DVector::from_vec(y),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_mean_only(&self) -> bool {
        self.x.ncols() == 1
    }

    fn omega_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.omega.clone()).ok_or(Error::Covariance)
    }

    /// `1'Ω⁻¹1`, the sum of all entries of `Ω⁻¹`.
    pub fn gamma(&self) -> Result<f64> {
        let ones = DVector::from_element(self.len(), 1.0);
        let w = self.omega_cholesky()?.solve(&ones);
        Ok(ones.dot(&w))
    }
}

/// GLS coefficients and the unscaled covariance `(X'Ω⁻¹X)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsFit {
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl GlsFit {
    /// Intercept coefficient.
    pub fn location(&self) -> f64 {
        self.coefficients[0]
    }

    /// Coefficient on the second column, absent for the mean-only model.
    pub fn scale(&self) -> Option<f64> {
        self.coefficients.get(1).copied()
    }
}

/// `(X'Ω⁻¹X)⁻¹ X'Ω⁻¹Y` through the Cholesky factor of `Ω`.
pub fn gls_estimate(p: &GlsProblem) -> Result<GlsFit> {
    let chol = p.omega_cholesky()?;
    let omega_inv_x = chol.solve(&p.x);
    let omega_inv_y = chol.solve(&p.y);
    let normal = p.x.transpose() * &omega_inv_x;
    let rhs = p.x.transpose() * omega_inv_y;
    // relative determinant test catches exactly and numerically collinear columns
    let diag_prod: f64 = normal.diagonal().iter().product();
    if !(diag_prod > 0.0) || normal.determinant() <= 1e-12 * diag_prod {
        return Err(Error::CollinearDesign);
    }
    let nchol = Cholesky::new(normal).ok_or(Error::CollinearDesign)?;
    let coefficients = nchol.solve(&rhs).iter().copied().collect();
    Ok(GlsFit {
        coefficients,
        covariance: nchol.inverse(),
    })
}

/// Which expression of the per-node variance factor to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Simplification {
    /// First diagonal entry of `σ²η²(X'Ω⁻¹X)⁻¹`.
    General,
    /// `σ²η²/Γ`, `Γ = 1'Ω⁻¹1`; mean-only model.
    SymmetricG1,
    /// `σ²η²/n(i)`; requires `1'Ω = 1'`.
    RowSumG2,
}

/// Variance factor of the node-level location estimate.
pub fn g_scalar(sigma2eta2: f64, p: &GlsProblem, simplification: Simplification) -> Result<f64> {
    match simplification {
        Simplification::General => {
            let fit = gls_estimate(p)?;
            Ok(sigma2eta2 * fit.covariance[(0, 0)])
        }
        Simplification::SymmetricG1 => {
            if !p.is_mean_only() {
                return Err(Error::SimplificationInapplicable(
                    "the symmetric form needs the mean-only model (E(Z) = 0)".into(),
                ));
            }
            Ok(sigma2eta2 / p.gamma()?)
        }
        Simplification::RowSumG2 => {
            let n = p.len();
            for c in 0..n {
                let col_sum: f64 = p.omega.column(c).sum();
                if (col_sum - 1.0).abs() > 1e-10 {
                    return Err(Error::SimplificationInapplicable(format!(
                        "1'Ω differs from 1' in column {c} (sum {col_sum})"
                    )));
                }
            }
            p.omega_cholesky()?;
            Ok(sigma2eta2 / n as f64)
        }
    }
}

/// Monte Carlo moments of standard Gumbel (minimum) order statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStatMoments {
    pub means: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Default replicate count for [`gumbel_order_statistics`].
pub const ORDER_STAT_REPLICATES: usize = 1_000_000;

/// Largest sample size accepted by [`gumbel_order_statistics`].
pub const MAX_ORDER_STAT_SIZE: usize = 30;

/// Estimates means and covariance of the order statistics of `size` standard
/// Gumbel (minimum) variables, `Z = ln(-ln(1-U))`.
///
/// Replicates are split into blocks of 4096, each drawn from its own ChaCha
/// stream, so results do not depend on the thread count.
pub fn gumbel_order_statistics(
    size: usize,
    replicates: usize,
    seed: u64,
) -> Result<OrderStatMoments> {
    if size == 0 || size > MAX_ORDER_STAT_SIZE {
        return Err(Error::InvalidRequest(format!(
            "order statistics size must be in 1..={MAX_ORDER_STAT_SIZE}, got {size}"
        )));
    }
    if replicates < 2 {
        return Err(Error::InvalidRequest(
            "at least 2 replicates are required".into(),
        ));
    }
    const BLOCK: usize = 4096;
    let blocks = replicates.div_ceil(BLOCK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(replicates - b * BLOCK);
            let mut sums = vec![0.0; size];
            let mut cross = vec![0.0; size * size];
            let mut z = vec![0.0; size];
            for _ in 0..count {
                for v in z.iter_mut() {
                    let u: f64 = rng.sample(Open01);
                    *v = (-(-u).ln_1p()).ln();
                }
                z.sort_by(f64::total_cmp);
                for i in 0..size {
                    sums[i] += z[i];
                    for j in 0..=i {
                        cross[i * size + j] += z[i] * z[j];
                    }
                }
            }
            (sums, cross)
        })
        .collect();
    let mut sums = vec![0.0; size];
    let mut cross = vec![0.0; size * size];
    for (s, c) in &partials {
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
        for (a, b) in cross.iter_mut().zip(c) {
            *a += b;
        }
    }
    let r = replicates as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / r).collect();
    let covariance = DMatrix::from_fn(size, size, |i, j| {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (cross[i * size + j] - r * means[i] * means[j]) / (r - 1.0)
    });
    Ok(OrderStatMoments { means, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rect() -> StressRectangle {
        StressRectangle::new(
            Interval::new(0.0, 1.0).unwrap(),
            Interval::new(0.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn tensor_basis_examples() {
        let xn = chebyshev_nodes(3).unwrap();
        let yn = chebyshev_nodes(4).unwrap();
        let grid = tensor_lagrange_eval(&xn, &yn, (xn.nodes()[1], yn.nodes()[2]));
        for (i, row) in grid.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if (i, j) == (1, 2) { 1.0 } else { 0.0 });
            }
        }
        let s: f64 = tensor_lagrange_eval(&xn, &yn, (2.3, -0.7))
            .iter()
            .flatten()
            .sum();
        assert!((s - 1.0).abs() < 1e-12);

        let two = chebyshev_nodes(2).unwrap();
        let vals: Vec<Vec<f64>> = two
            .nodes()
            .iter()
            .map(|&x| two.nodes().iter().map(|&y| x * y).collect())
            .collect();
        assert!((tensor_interpolate(&two, &two, &vals, (3.0, -2.0)) + 6.0).abs() < 1e-12);
    }

    #[test]
    fn gls_examples() {
        let p = GlsProblem::location_scale(DMatrix::identity(2, 2), vec![0.0, 2.0], vec![1.0, 1.0])
            .unwrap();
        assert_eq!(gls_estimate(&p), Err(Error::CollinearDesign));

        let p = GlsProblem::mean_only(DMatrix::identity(2, 2), vec![0.0, 2.0]).unwrap();
        assert!((gls_estimate(&p).unwrap().location() - 1.0).abs() < 1e-15);

        let omega = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let p = GlsProblem::mean_only(omega, vec![0.0, 3.0]).unwrap();
        let fit = gls_estimate(&p).unwrap();
        assert!((fit.location() - 1.5).abs() < 1e-14);
        assert_eq!(fit.scale(), None);
    }

    #[test]
    fn gls_recovers_exact_location_scale() {
        let alpha = vec![-1.2, -0.4, 0.1, 0.9];
        let omega = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.3 });
        let y: Vec<f64> = alpha.iter().map(|a| 2.0 + 0.5 * a).collect();
        let fit = gls_estimate(&GlsProblem::location_scale(omega, y, alpha).unwrap()).unwrap();
        assert!((fit.location() - 2.0).abs() < 1e-12);
        assert!((fit.scale().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gls_input_errors() {
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = GlsProblem::mean_only(not_pd, vec![0.0, 1.0]).unwrap();
        assert_eq!(gls_estimate(&p), Err(Error::Covariance));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert_eq!(
            GlsProblem::mean_only(asym, vec![0.0, 1.0]),
            Err(Error::Covariance)
        );
        assert!(GlsProblem::mean_only(DMatrix::identity(2, 2), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn g_scalar_examples() {
        let p =
            GlsProblem::mean_only(DMatrix::identity(5, 5), vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let g1 = g_scalar(2.0, &p, Simplification::SymmetricG1).unwrap();
        let g2 = g_scalar(2.0, &p, Simplification::RowSumG2).unwrap();
        let gen = g_scalar(2.0, &p, Simplification::General).unwrap();
        assert!((g1 - 0.4).abs() < 1e-15);
        assert!((g2 - 0.4).abs() < 1e-15);
        assert!((gen - 0.4).abs() < 1e-15);

        let omega = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let p = GlsProblem::mean_only(omega, vec![0.0, 3.0]).unwrap();
        assert!((p.gamma().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((g_scalar(1.0, &p, Simplification::SymmetricG1).unwrap() - 1.5).abs() < 1e-14);
        assert!(matches!(
            g_scalar(1.0, &p, Simplification::RowSumG2),
            Err(Error::SimplificationInapplicable(_))
        ));

        let ls = GlsProblem::location_scale(
            DMatrix::identity(3, 3),
            vec![0.0, 1.0, 2.0],
            vec![-1.0, 0.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            g_scalar(1.0, &ls, Simplification::SymmetricG1),
            Err(Error::SimplificationInapplicable(_))
        ));
        // centered second column: intercept variance is 1/n
        assert!((g_scalar(1.0, &ls, Simplification::General).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_allocation_is_flattened_hoel_levine() {
        let rect = unit_rect();
        let u = (-1.0, -1.0);
        let grid = generalized_frequencies(u, &rect, 2, 2, 52, 1.0, 0.0).unwrap();
        let (xn, yn) = axis_nodes(2, 2, &rect).unwrap();
        let abs: Vec<f64> = tensor_lagrange_eval(&xn, &yn, u)
            .into_iter()
            .flatten()
            .map(f64::abs)
            .collect();
        let s: f64 = abs.iter().sum();
        let w: Vec<f64> = abs.iter().map(|a| 52.0 * a / s).collect();
        let expected = positive_frequencies(&w, 52).unwrap();
        assert_eq!(grid.concat(), expected);
        // per-axis factorization: |l(-1)| on [0,1] is (2, 1) so weights 52·(4,2,2,1)/9
        let w_axis: Vec<f64> = [4.0, 2.0, 2.0, 1.0]
            .iter()
            .map(|v| 52.0 * v / 9.0)
            .collect();
        for (a, b) in w.iter().zip(&w_axis) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn allocation_sums_to_budget_and_clamps() {
        let rect = StressRectangle::new(
            Interval::new(1.0, 3.0).unwrap(),
            Interval::new(0.0, 2.0).unwrap(),
        );
        let d = bivariate_design((0.5, -0.2), &rect, 3, 3, 40, 1.0, 15.0).unwrap();
        assert_eq!(d.replications.iter().flatten().sum::<usize>(), 40);
        let alloc = d.allocation.as_ref().unwrap();
        assert!(alloc.clamped);
        assert!(alloc.values.iter().flatten().all(|&v| v >= 0.0));
        assert!((alloc.values.iter().flatten().sum::<f64>() - 40.0).abs() < 1e-9);
        let v = bivariate_variance(&d, 1.0, (0.5, -0.2)).unwrap();
        assert_eq!(v.method, VarianceMethod::DirectSum);
        assert!(v.clamped);
    }

    #[test]
    fn design_nodes_and_errors() {
        let rect = StressRectangle::new(
            Interval::new(0.0, 2.0).unwrap(),
            Interval::new(1.0, 4.0).unwrap(),
        );
        let d = bivariate_design((-1.0, 0.0), &rect, 4, 2, 40, 1.0, 0.0).unwrap();
        assert_eq!(d.x_nodes().nodes(), &[0.0, 0.5, 1.5, 2.0]);
        assert_eq!(d.y_nodes().nodes(), &[1.0, 4.0]);
        d.validate().unwrap();
        assert!(matches!(
            bivariate_design((0.5, 0.0), &rect, 2, 2, 10, 1.0, 0.0),
            Err(Error::NotExtrapolation { .. })
        ));
        assert!(bivariate_design((0.0, 1.0), &rect, 2, 2, 10, 1.0, 0.0).is_ok());
        assert!(bivariate_design((-1.0, 0.0), &rect, 2, 2, 3, 1.0, 0.0).is_err());
        assert!(bivariate_design((-1.0, 0.0), &rect, 2, 2, 10, 0.0, 0.0).is_err());
    }

    #[test]
    fn variance_closed_form_examples() {
        let rect = unit_rect();
        let (xn, yn) = axis_nodes(2, 2, &rect).unwrap();
        let v = bivariate_variance_closed_form(&xn, &yn, 1.0, 1.0, 0.0, 1.0, (-1.0, -1.0));
        // per-axis Σ|l(-1)| = 3
        assert!((v - 81.0).abs() < 1e-12);
        assert_eq!(
            bivariate_variance_closed_form(&xn, &yn, 1.0, 1.0, 0.0, 0.0, (-1.0, -1.0)),
            0.0
        );

        let d = bivariate_design((-1.0, -0.5), &rect, 3, 2, 36, 1.0, 0.0).unwrap();
        let d2 = bivariate_design((-1.0, -0.5), &rect, 3, 2, 72, 1.0, 0.0).unwrap();
        let v1 = bivariate_variance(&d, 1.0, (-1.0, -0.5)).unwrap();
        let v2 = bivariate_variance(&d2, 1.0, (-1.0, -0.5)).unwrap();
        assert_eq!(v1.method, VarianceMethod::ClosedForm);
        assert!((v1.value / v2.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gumbel_order_statistics_small_sample() {
        let m = gumbel_order_statistics(1, 200_000, 7).unwrap();
        // single draw: mean -γ, variance π²/6
        assert!((m.means[0] + 0.5772156649).abs() < 0.01);
        assert!((m.covariance[(0, 0)] - std::f64::consts::PI.powi(2) / 6.0).abs() < 0.03);
        let m3 = gumbel_order_statistics(3, 50_000, 7).unwrap();
        assert!(m3.means.windows(2).all(|w| w[0] < w[1]));
        assert!(Cholesky::new(m3.covariance.clone()).is_some());
        assert_eq!(m3, gumbel_order_statistics(3, 50_000, 7).unwrap());
        assert!(gumbel_order_statistics(31, 10, 1).is_err());
    }
}
