//! Design construction: Chebyshev (Hoel-Levine) extrapolation designs, Legendre
//! (Guest) interpolation designs and integer frequency rounding.

use crate::error::{Error, Result};
use crate::poly::{cos_pi_ratio, legendre_deriv_roots, Interval, NodeSet};

/// Which construction produced a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignKind {
    /// Variance-minimizing at a single extrapolation point.
    HoelLevine {
        target: f64,
    },
    /// Minimax variance over the design interval.
    Guest,
    Custom,
}

impl DesignKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DesignKind::HoelLevine { .. } => "hoel_levine",
            DesignKind::Guest => "guest",
            DesignKind::Custom => "custom",
        }
    }

    pub fn target(&self) -> Option<f64> {
        match self {
            DesignKind::HoelLevine { target } => Some(*target),
            _ => None,
        }
    }
}

/// Nodes with continuous weights `w_j` and rounded frequencies `n_j`, both summing
/// to the budget `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    nodes: NodeSet,
    weights: Vec<f64>,
    frequencies: Vec<usize>,
    n: usize,
    kind: DesignKind,
}

impl Design {
    /// Assembles a design from its parts, checking every invariant.
    pub fn from_parts(
        nodes: NodeSet,
        weights: Vec<f64>,
        frequencies: Vec<usize>,
        n: usize,
        kind: DesignKind,
    ) -> Result<Self> {
        let g = nodes.len();
        if weights.len() != g || frequencies.len() != g {
            return Err(Error::InvalidRequest(format!(
                "{g} nodes but {} weights and {} frequencies",
                weights.len(),
                frequencies.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidRequest("budget n must be positive".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidRequest(format!("weight {w} is not positive")));
        }
        let wsum: f64 = weights.iter().sum();
        if (wsum - n as f64).abs() > 1e-9 * (n as f64).max(1.0) {
            return Err(Error::InvalidRequest(format!(
                "weights sum to {wsum}, expected {n}"
            )));
        }
        let fsum: usize = frequencies.iter().sum();
        if fsum != n {
            return Err(Error::InvalidRequest(format!(
                "frequencies sum to {fsum}, expected {n}"
            )));
        }
        // each weight below one may need a unit lifted from another node
        let slack = 1.0 + weights.iter().filter(|&&w| w < 1.0).count() as f64;
        if let Some(j) = (0..g).find(|&j| (frequencies[j] as f64 - weights[j]).abs() >= slack) {
            return Err(Error::InvalidRequest(format!(
                "frequency {} deviates from weight {} by {slack} or more",
                frequencies[j], weights[j]
            )));
        }
        if let DesignKind::HoelLevine { target } = kind {
            check_extrapolation(&nodes.interval(), target)?;
        }
        Ok(Design {
            nodes,
            weights,
            frequencies,
            n,
            kind,
        })
    }

    /// A custom design with the given integer frequencies (weights equal frequencies).
    pub fn from_frequencies(nodes: NodeSet, frequencies: Vec<usize>) -> Result<Self> {
        let n = frequencies.iter().sum();
        let weights = frequencies.iter().map(|&f| f as f64).collect();
        Design::from_parts(nodes, weights, frequencies, n, DesignKind::Custom)
    }

    /// A custom design from continuous weights; frequencies are rounded to sum to `n`.
    pub fn from_weights(nodes: NodeSet, weights: Vec<f64>, n: usize) -> Result<Self> {
        let frequencies = positive_frequencies(&weights, n)?;
        Design::from_parts(nodes, weights, frequencies, n, DesignKind::Custom)
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frequencies(&self) -> &[usize] {
        &self.frequencies
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn interval(&self) -> Interval {
        self.nodes.interval()
    }
}

/// Input to the design constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignRequest {
    pub g: usize,
    pub n: usize,
    pub interval: Interval,
    pub target: Option<f64>,
}

impl DesignRequest {
    pub fn new(g: usize, n: usize, interval: Interval, target: Option<f64>) -> Result<Self> {
        if g < 2 {
            return Err(Error::InvalidRequest(format!(
                "g must be at least 2, got {g}"
            )));
        }
        if n < g {
            return Err(Error::InvalidRequest(format!(
                "budget n = {n} is smaller than the number of nodes g = {g}"
            )));
        }
        if let Some(t) = target {
            check_extrapolation(&interval, t)?;
        }
        Ok(DesignRequest {
            g,
            n,
            interval,
            target,
        })
    }

    /// Request on the reference interval `[-1, 1]`.
    pub fn unit(g: usize, n: usize, target: Option<f64>) -> Result<Self> {
        DesignRequest::new(g, n, Interval::unit(), target)
    }
}

fn check_extrapolation(interval: &Interval, target: f64) -> Result<()> {
    if !target.is_finite() || interval.contains(target) {
        return Err(Error::NotExtrapolation {
            target,
            lo: interval.lo(),
            hi: interval.hi(),
        });
    }
    Ok(())
}

/// Chebyshev extremal nodes `cos(kπ/(g-1))` on `[-1, 1]`, sorted increasing.
pub fn chebyshev_nodes(g: usize) -> Result<NodeSet> {
    if g < 2 {
        return Err(Error::InvalidRequest(format!(
            "g must be at least 2, got {g}"
        )));
    }
    let h = g - 1;
    let nodes = (0..g).map(|i| cos_pi_ratio(h - i, h)).collect();
    NodeSet::new(nodes, Interval::unit())
}

/// Endpoints plus the roots of `P'_{g-1}` on `[-1, 1]`.
pub fn guest_nodes(g: usize) -> Result<NodeSet> {
    if g < 2 {
        return Err(Error::InvalidRequest(format!(
            "g must be at least 2, got {g}"
        )));
    }
    let mut nodes = Vec::with_capacity(g);
    nodes.push(-1.0);
    nodes.extend(legendre_deriv_roots(g - 1)?);
    nodes.push(1.0);
    NodeSet::new(nodes, Interval::unit())
}

/// Hoel-Levine design: Chebyshev nodes on the request interval and weights
/// proportional to `|l_j(target)|`.
pub fn hoel_levine_design(req: &DesignRequest) -> Result<Design> {
    let target = req
        .target
        .ok_or_else(|| Error::InvalidRequest("Hoel-Levine design requires a target".into()))?;
    check_extrapolation(&req.interval, target)?;
    let nodes = chebyshev_nodes(req.g)?.rescaled(req.interval)?;
    let weights = hoel_levine_weights(&nodes, target, req.n as f64);
    let frequencies = positive_frequencies(&weights, req.n)?;
    Design::from_parts(
        nodes,
        weights,
        frequencies,
        req.n,
        DesignKind::HoelLevine { target },
    )
}

/// `total · |l_j(x)| / Σ_i |l_i(x)|`.
pub fn hoel_levine_weights(nodes: &NodeSet, x: f64, total: f64) -> Vec<f64> {
    let abs_l: Vec<f64> = nodes.lagrange_basis(x).iter().map(|l| l.abs()).collect();
    let sum: f64 = abs_l.iter().sum();
    abs_l.iter().map(|a| total * a / sum).collect()
}

/// Guest design: Legendre-derivative nodes and equal weights `n/g`.
pub fn guest_design(req: &DesignRequest) -> Result<Design> {
    if req.target.is_some() {
        return Err(Error::InvalidRequest(
            "Guest design does not take a target".into(),
        ));
    }
    let nodes = guest_nodes(req.g)?.rescaled(req.interval)?;
    let weights = vec![req.n as f64 / req.g as f64; req.g];
    let frequencies = positive_frequencies(&weights, req.n)?;
    Design::from_parts(nodes, weights, frequencies, req.n, DesignKind::Guest)
}

/// Largest-remainder rounding of non-negative weights summing to `n`.
///
/// Every weight is floored, then the missing units go to the largest fractional
/// parts; ties go to the lower index.
pub fn round_frequencies(weights: &[f64], n: usize) -> Vec<usize> {
    let mut freqs: Vec<usize> = weights
        .iter()
        .map(|w| w.max(0.0).floor() as usize)
        .collect();
    let assigned: usize = freqs.iter().sum();
    let missing = n.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let frac = |i: usize| weights[i].max(0.0) - weights[i].max(0.0).floor();
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &i in order.iter().take(missing) {
        freqs[i] += 1;
    }
    freqs
}

/// Rounds with [`round_frequencies`] and then lifts any zero entry to one, taking
/// the unit from the largest over-allocated frequency.
pub fn positive_frequencies(weights: &[f64], n: usize) -> Result<Vec<usize>> {
    if n < weights.len() {
        return Err(Error::InvalidRequest(format!(
            "budget n = {n} cannot give every one of {} nodes an observation",
            weights.len()
        )));
    }
    let mut freqs = round_frequencies(weights, n);
    while let Some(zero) = freqs.iter().position(|&f| f == 0) {
        let donor = (0..freqs.len())
            .filter(|&j| freqs[j] >= 2)
            .max_by(|&a, &b| {
                let ea = freqs[a] as f64 - weights[a];
                let eb = freqs[b] as f64 - weights[b];
                ea.total_cmp(&eb)
                    .then(freqs[a].cmp(&freqs[b]))
                    .then(b.cmp(&a))
            })
            .expect("n >= g guarantees a donor");
        freqs[donor] -= 1;
        freqs[zero] = 1;
    }
    Ok(freqs)
}

/// Moves a design onto another interval, keeping weights and frequencies.
pub fn rescale_design(d: &Design, interval: Interval) -> Result<Design> {
    let old = d.interval();
    let nodes = d.nodes.rescaled(interval)?;
    let kind = match d.kind {
        DesignKind::HoelLevine { target } => DesignKind::HoelLevine {
            target: interval.from_reference(old.to_reference(target)),
        },
        k => k,
    };
    Ok(Design {
        nodes,
        weights: d.weights.clone(),
        frequencies: d.frequencies.clone(),
        n: d.n,
        kind,
    })
}
