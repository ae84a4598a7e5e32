//! Point estimates and confidence intervals for `f(x)` from replicated node
//! observations.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::poly::NodeSet;

/// Replicated responses `y_i(x_j)` grouped by node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSamples {
    nodes: NodeSet,
    observations: Vec<Vec<f64>>,
}

impl NodeSamples {
    pub fn new(nodes: NodeSet, observations: Vec<Vec<f64>>) -> Result<Self> {
        if observations.len() != nodes.len() {
            return Err(Error::InsufficientData(format!(
                "{} nodes but observations for {}",
                nodes.len(),
                observations.len()
            )));
        }
        if let Some(j) = observations.iter().position(|o| o.is_empty()) {
            return Err(Error::InsufficientData(format!(
                "node {j} has no observations"
            )));
        }
        Ok(NodeSamples {
            nodes,
            observations,
        })
    }

    /// Samples whose per-node counts must match the design frequencies.
    pub fn for_design(design: &Design, observations: Vec<Vec<f64>>) -> Result<Self> {
        let s = NodeSamples::new(design.nodes().clone(), observations)?;
        for (j, (obs, &f)) in s.observations.iter().zip(design.frequencies()).enumerate() {
            if obs.len() != f {
                return Err(Error::InsufficientData(format!(
                    "node {j} has {} observations but the design allocates {f}",
                    obs.len()
                )));
            }
        }
        Ok(s)
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn counts(&self) -> Vec<usize> {
        self.observations.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.observations.iter().map(Vec::len).sum()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-node sample means.
pub fn node_means(s: &NodeSamples) -> Vec<f64> {
    s.observations.iter().map(|o| mean(o)).collect()
}

/// `Σ_j Ȳ_j l_j(x)`.
pub fn point_estimate(s: &NodeSamples, x: f64) -> f64 {
    node_means(s)
        .iter()
        .zip(s.nodes.lagrange_basis(x))
        .map(|(m, l)| m * l)
        .sum()
}

/// How the noise variance entering a confidence interval is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMode {
    /// Noise variance σ² known in advance; normal quantile.
    Known(f64),
    /// Standard pooled estimate with `n - g` degrees of freedom; Student quantile.
    Pooled,
    /// Pooled estimate with denominators `n - g - 2` and `g - 2` degrees of freedom.
    PaperPooled,
}

impl VarianceMode {
    pub fn tag(&self) -> &'static str {
        match self {
            VarianceMode::Known(_) => "known",
            VarianceMode::Pooled => "pooled",
            VarianceMode::PaperPooled => "paper_pooled",
        }
    }
}

/// Pooled noise-variance estimate and its degrees of freedom.
pub fn pooled_variance(s: &NodeSamples, mode: VarianceMode) -> Result<(f64, usize)> {
    for (node, obs) in s.observations.iter().enumerate() {
        if obs.len() < 2 {
            return Err(Error::InsufficientReplication {
                node,
                count: obs.len(),
            });
        }
    }
    let n = s.total() as i64;
    let g = s.nodes.len() as i64;
    let sum_sq = |obs: &[f64]| {
        let m = mean(obs);
        obs.iter().map(|y| (y - m) * (y - m)).sum::<f64>()
    };
    match mode {
        VarianceMode::Pooled | VarianceMode::Known(_) => {
            let dof = n - g;
            if dof <= 0 {
                return Err(Error::NonPositiveDof(dof));
            }
            // (n_j - 1) s_j² is the within-node sum of squares
            let ss: f64 = s.observations.iter().map(|o| sum_sq(o)).sum();
            Ok((ss / dof as f64, dof as usize))
        }
        VarianceMode::PaperPooled => {
            let denom = n - g - 2;
            if denom <= 0 {
                return Err(Error::NonPositiveDof(denom));
            }
            let dof = g - 2;
            if dof <= 0 {
                return Err(Error::NonPositiveDof(dof));
            }
            let d = denom as f64;
            let s2: f64 = s
                .observations
                .iter()
                .map(|o| (o.len() - 1) as f64 * sum_sq(o) / d)
                .sum::<f64>()
                / d;
            Ok((s2, dof as usize))
        }
    }
}

/// Two-sided interval `center ± half_width` for `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
    pub variance_mode: VarianceMode,
    pub dof: Option<usize>,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.center).abs() <= self.half_width
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Student quantile with `dof` degrees of freedom.
pub fn student_quantile(p: f64, dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// `Σ_j l_j(x)² / n_j` for the sample counts.
pub fn variance_factor(nodes: &NodeSet, counts: &[usize], x: f64) -> f64 {
    nodes
        .lagrange_basis(x)
        .iter()
        .zip(counts)
        .map(|(l, &c)| l * l / c as f64)
        .sum()
}

/// Interval with half width `q · sqrt(V)`, `V = σ̂² Σ_j l_j(x)²/n_j`.
pub fn confidence_interval(
    s: &NodeSamples,
    x: f64,
    level: f64,
    mode: VarianceMode,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {level} is not in (0, 1)"
        )));
    }
    let factor = variance_factor(&s.nodes, &s.counts(), x);
    let upper = 0.5 + 0.5 * level;
    let (q, s2, dof) = match mode {
        VarianceMode::Known(sigma2) => {
            if !(sigma2 >= 0.0) {
                return Err(Error::Domain(format!(
                    "noise variance {sigma2} is negative"
                )));
            }
            (normal_quantile(upper), sigma2, None)
        }
        VarianceMode::Pooled | VarianceMode::PaperPooled => {
            let (s2, dof) = pooled_variance(s, mode)?;
            (student_quantile(upper, dof), s2, Some(dof))
        }
    };
    Ok(ConfidenceInterval {
        center: point_estimate(s, x),
        half_width: q * (s2 * factor).sqrt(),
        level,
        variance_mode: mode,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{chebyshev_nodes, hoel_levine_design, DesignRequest};

    fn two_node_samples() -> NodeSamples {
        NodeSamples::new(
            chebyshev_nodes(2).unwrap(),
            vec![vec![0.0, 2.0], vec![1.0, 3.0]],
        )
        .unwrap()
    }

    #[test]
    fn means_and_estimates() {
        let s = NodeSamples::new(
            chebyshev_nodes(2).unwrap(),
            vec![vec![1.0, 3.0], vec![5.0; 3]],
        )
        .unwrap();
        assert_eq!(node_means(&s), vec![2.0, 5.0]);
        assert_eq!(point_estimate(&s, -1.0), 2.0);
        assert_eq!(point_estimate(&s, 1.0), 5.0);

        let nodes = chebyshev_nodes(4).unwrap();
        let obs = nodes.nodes().iter().map(|&x| vec![x * x * x; 3]).collect();
        let s = NodeSamples::new(nodes, obs).unwrap();
        assert_eq!(point_estimate(&s, 2.0), 8.0);

        let nodes = chebyshev_nodes(5).unwrap();
        let s = NodeSamples::new(nodes, vec![vec![4.25]; 5]).unwrap();
        for &x in &[-3.0, 0.1, 7.0] {
            assert!((point_estimate(&s, x) - 4.25).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_node_is_rejected() {
        let r = NodeSamples::new(chebyshev_nodes(2).unwrap(), vec![vec![1.0], vec![]]);
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pooled_examples() {
        let s = two_node_samples();
        assert_eq!(pooled_variance(&s, VarianceMode::Pooled).unwrap(), (2.0, 2));
        assert!(matches!(
            pooled_variance(&s, VarianceMode::PaperPooled),
            Err(Error::NonPositiveDof(0))
        ));
        let flat = NodeSamples::new(
            chebyshev_nodes(2).unwrap(),
            vec![vec![1.0; 3], vec![2.0; 4]],
        )
        .unwrap();
        assert_eq!(pooled_variance(&flat, VarianceMode::Pooled).unwrap().0, 0.0);
        let single =
            NodeSamples::new(chebyshev_nodes(2).unwrap(), vec![vec![1.0], vec![2.0, 3.0]]).unwrap();
        assert!(matches!(
            pooled_variance(&single, VarianceMode::Pooled),
            Err(Error::InsufficientReplication { node: 0, count: 1 })
        ));
    }

    #[test]
    fn reduced_denominator_pooling() {
        // g = 3, n = 9: denominators n - g - 2 = 4, dof g - 2 = 1
        let nodes = chebyshev_nodes(3).unwrap();
        let obs = vec![
            vec![0.0, 2.0, 4.0],
            vec![1.0, 1.0, 4.0],
            vec![3.0, 5.0, 7.0],
        ];
        let s = NodeSamples::new(nodes, obs).unwrap();
        let (s2, dof) = pooled_variance(&s, VarianceMode::PaperPooled).unwrap();
        // per-node sums of squares 8, 6, 8
        let expected = (2.0 * 8.0 / 4.0 + 2.0 * 6.0 / 4.0 + 2.0 * 8.0 / 4.0) / 4.0;
        assert_eq!(dof, 1);
        assert!((s2 - expected).abs() < 1e-15);
        let (p, dof) = pooled_variance(&s, VarianceMode::Pooled).unwrap();
        assert_eq!(dof, 6);
        assert!((p - 22.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles_are_accurate() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert!((student_quantile(0.975, 10) - 2.2281388519649385).abs() < 1e-8);
        assert!((student_quantile(0.975, 2) - 4.302652729696142).abs() < 1e-8);
        assert!((student_quantile(0.995, 48) - 2.6822040269502).abs() < 1e-8);
    }

    #[test]
    fn known_sigma_interval_for_worked_example() {
        let d = hoel_levine_design(&DesignRequest::unit(4, 52, Some(2.0)).unwrap()).unwrap();
        let obs = d.frequencies().iter().map(|&f| vec![0.0; f]).collect();
        let s = NodeSamples::for_design(&d, obs).unwrap();
        let ci = confidence_interval(&s, 2.0, 0.95, VarianceMode::Known(1.0)).unwrap();
        assert!((ci.half_width - 1.959963984540054 * 13f64.sqrt()).abs() < 1e-9);
        let zero = confidence_interval(&s, 2.0, 0.95, VarianceMode::Known(0.0)).unwrap();
        assert_eq!(zero.half_width, 0.0);
        assert!(confidence_interval(&s, 2.0, 1.0, VarianceMode::Known(1.0)).is_err());
    }

    #[test]
    fn for_design_checks_counts() {
        let d = hoel_levine_design(&DesignRequest::unit(2, 10, Some(3.0)).unwrap()).unwrap();
        assert!(NodeSamples::for_design(&d, vec![vec![0.0; 3], vec![0.0; 6]]).is_err());
        assert!(NodeSamples::for_design(&d, vec![vec![0.0; 3], vec![0.0; 7]]).is_ok());
    }
}
