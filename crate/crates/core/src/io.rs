//! JSON and CSV formats.
//!
//! Reals are written with 17 significant digits so every value read back is
//! bit-identical to the one written; a design therefore re-emits byte for byte.

use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::bivariate::{
    kkt_allocation, tensor_lagrange_eval, BivariateDesign, ContinuousAllocation,
};
use crate::design::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::inference::ConfidenceInterval;
use crate::poly::{Interval, NodeSet};
use crate::sim::{Replicate, SimulationReport};
use crate::variance::{CrossoverResult, VarianceProfile};

/// Formats a real like C's `%.17g`, keeping a decimal point on integral values.
pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0.0".into()
        } else {
            "0.0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let mut s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.push('0');
            }
        } else {
            s.push_str(".0");
        }
        s
    } else {
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.pop();
            }
        }
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Real serialized through [`format_real`]; non-finite values become `null`.
#[derive(Debug, Clone, Copy)]
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            RawValue::from_string(format_real(self.0))
                .map_err(serde::ser::Error::custom)?
                .serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().map(|&x| Real(x)).collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("in-memory serialization")
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Serialize)]
struct DesignOut<'a> {
    kind: &'static str,
    interval: [Real; 2],
    nodes: Vec<Real>,
    weights: Vec<Real>,
    frequencies: &'a [usize],
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Real>,
}

impl<'a> From<&'a Design> for DesignOut<'a> {
    fn from(d: &'a Design) -> Self {
        let iv = d.interval();
        DesignOut {
            kind: d.kind().tag(),
            interval: [Real(iv.lo()), Real(iv.hi())],
            nodes: reals(d.nodes().nodes()),
            weights: reals(d.weights()),
            frequencies: d.frequencies(),
            n: d.n(),
            target: d.kind().target().map(Real),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignIn {
    kind: String,
    interval: [f64; 2],
    nodes: Vec<f64>,
    weights: Vec<f64>,
    frequencies: Vec<usize>,
    n: usize,
    #[serde(default)]
    target: Option<f64>,
}

impl DesignIn {
    fn into_design(self) -> Result<Design> {
        let interval = Interval::new(self.interval[0], self.interval[1])?;
        let nodes = NodeSet::new(self.nodes, interval)?;
        let kind = match (self.kind.as_str(), self.target) {
            ("hoel_levine", Some(target)) => DesignKind::HoelLevine { target },
            ("hoel_levine", None) => {
                return Err(Error::Parse("hoel_levine design without target".into()))
            }
            ("guest", None) => DesignKind::Guest,
            ("custom", None) => DesignKind::Custom,
            (k @ ("guest" | "custom"), Some(_)) => {
                return Err(Error::Parse(format!("{k} design cannot carry a target")))
            }
            (other, _) => return Err(Error::Parse(format!("unknown design kind {other:?}"))),
        };
        Design::from_parts(nodes, self.weights, self.frequencies, self.n, kind)
    }
}

/// Design as a one-line JSON object.
pub fn design_to_json(d: &Design) -> String {
    to_json(&DesignOut::from(d))
}

pub fn design_from_json(text: &str) -> Result<Design> {
    serde_json::from_str::<DesignIn>(text)
        .map_err(parse_err)?
        .into_design()
}

#[derive(Serialize)]
struct CrossoverOut {
    g: usize,
    c1: Real,
    ratio_at_c1: Real,
    iterations: usize,
}

pub fn crossover_to_json(r: &CrossoverResult) -> String {
    to_json(&CrossoverOut {
        g: r.g,
        c1: Real(r.c1),
        ratio_at_c1: Real(r.ratio_at_c1),
        iterations: r.iterations,
    })
}

#[derive(Serialize)]
struct IntervalOut {
    center: Real,
    half_width: Real,
    level: Real,
    variance_mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dof: Option<usize>,
}

pub fn confidence_to_json(ci: &ConfidenceInterval) -> String {
    to_json(&IntervalOut {
        center: Real(ci.center),
        half_width: Real(ci.half_width),
        level: Real(ci.level),
        variance_mode: ci.variance_mode.tag(),
        dof: ci.dof,
    })
}

#[derive(Serialize)]
struct ReportOut {
    replications: usize,
    eval_point: Real,
    empirical_mean: Real,
    empirical_variance: Real,
    theoretical_variance: Real,
    variance_ratio: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<Real>,
    seed: u64,
}

/// One JSON line per report.
pub fn report_to_json(r: &SimulationReport) -> String {
    to_json(&ReportOut {
        replications: r.replications,
        eval_point: Real(r.eval_point),
        empirical_mean: Real(r.empirical_mean),
        empirical_variance: Real(r.empirical_variance),
        theoretical_variance: Real(r.theoretical_variance),
        variance_ratio: Real(r.variance_ratio),
        coverage: r.coverage.map(Real),
        seed: r.seed,
    })
}

/// `x,variance` rows followed by `# max at <x> value <v>`.
pub fn profile_to_csv(p: &VarianceProfile) -> String {
    let mut out = String::from("x,variance\n");
    for (x, v) in p.grid.iter().zip(&p.values) {
        out.push_str(&format!("{},{}\n", format_real(*x), format_real(*v)));
    }
    out.push_str(&format!(
        "# max at {} value {}\n",
        format_real(p.max_point),
        format_real(p.max_value)
    ));
    out
}

/// `replicate,estimate[,covered]` rows.
pub fn replicates_to_csv(reps: &[Replicate]) -> String {
    let with_cov = reps.first().is_some_and(|r| r.covered.is_some());
    let mut out = String::from(if with_cov {
        "replicate,estimate,covered\n"
    } else {
        "replicate,estimate\n"
    });
    for (i, r) in reps.iter().enumerate() {
        match r.covered {
            Some(c) if with_cov => {
                out.push_str(&format!("{i},{},{}\n", format_real(r.estimate), c as u8))
            }
            _ => out.push_str(&format!("{i},{}\n", format_real(r.estimate))),
        }
    }
    out
}

#[derive(Serialize)]
struct BivariateOut<'a> {
    x_design: DesignOut<'a>,
    y_design: DesignOut<'a>,
    replications: &'a [Vec<usize>],
    #[serde(rename = "M1")]
    m1: usize,
    alpha: Real,
    beta: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<[Real; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BivariateIn {
    x_design: DesignIn,
    y_design: DesignIn,
    replications: Vec<Vec<usize>>,
    #[serde(rename = "M1")]
    m1: usize,
    alpha: f64,
    beta: f64,
    #[serde(default)]
    target: Option<[f64; 2]>,
}

pub fn bivariate_to_json(d: &BivariateDesign) -> String {
    to_json(&BivariateOut {
        x_design: (&d.x_design).into(),
        y_design: (&d.y_design).into(),
        replications: &d.replications,
        m1: d.m1,
        alpha: Real(d.alpha),
        beta: Real(d.beta),
        target: d.target.map(|(a, b)| [Real(a), Real(b)]),
    })
}

/// Reads a bivariate design; the continuous allocation is recomputed from the
/// target when one is recorded.
pub fn bivariate_from_json(text: &str) -> Result<BivariateDesign> {
    let raw: BivariateIn = serde_json::from_str(text).map_err(parse_err)?;
    let x_design = raw.x_design.into_design()?;
    let y_design = raw.y_design.into_design()?;
    let target = raw.target.map(|[a, b]| (a, b));
    let allocation = target.map(|u| {
        let g2 = y_design.g();
        let abs_l: Vec<f64> = tensor_lagrange_eval(x_design.nodes(), y_design.nodes(), u)
            .into_iter()
            .flatten()
            .map(f64::abs)
            .collect();
        let (flat, clamped) = kkt_allocation(&abs_l, raw.m1 as f64, raw.alpha, raw.beta);
        ContinuousAllocation {
            values: flat.chunks(g2).map(|r| r.to_vec()).collect(),
            clamped,
        }
    });
    let d = BivariateDesign {
        x_design,
        y_design,
        replications: raw.replications,
        m1: raw.m1,
        alpha: raw.alpha,
        beta: raw.beta,
        target,
        allocation,
    };
    d.validate()?;
    Ok(d)
}

#[derive(Deserialize)]
struct SampleRow {
    node_index: usize,
    replicate_index: usize,
    y: f64,
}

/// Reads `node_index,replicate_index,y` rows into per-node observation lists
/// ordered by replicate index.
pub fn read_samples_csv<R: Read>(reader: R, g: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(parse_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node_index", "replicate_index", "y"] {
        return Err(Error::Parse(format!(
            "expected header node_index,replicate_index,y, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut per_node: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g];
    for row in rdr.deserialize::<SampleRow>() {
        let row = row.map_err(parse_err)?;
        if row.node_index >= g {
            return Err(Error::Parse(format!(
                "node_index {} out of range for {g} nodes",
                row.node_index
            )));
        }
        per_node[row.node_index].push((row.replicate_index, row.y));
    }
    per_node
        .into_iter()
        .enumerate()
        .map(|(j, mut obs)| {
            obs.sort_by_key(|o| o.0);
            if obs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Parse(format!(
                    "duplicate replicate_index at node {j}"
                )));
            }
            Ok(obs.into_iter().map(|o| o.1).collect())
        })
        .collect()
}

/// Reads a dense row-major matrix preceded by a `dim=n` header line.
pub fn read_omega_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Parse("empty covariance file".into()))?
        .map_err(parse_err)?;
    let dim: usize = header
        .get(0)
        .and_then(|h| h.strip_prefix("dim="))
        .ok_or_else(|| Error::Parse("covariance header must be dim=<n>".into()))?
        .parse()
        .map_err(parse_err)?;
    if dim == 0 || header.len() != 1 {
        return Err(Error::Parse("covariance header must be dim=<n>".into()));
    }
    let mut values = Vec::with_capacity(dim * dim);
    let mut rows = 0;
    for rec in records {
        let rec = rec.map_err(parse_err)?;
        if rec.len() != dim {
            return Err(Error::Parse(format!(
                "covariance row {} has {} entries, expected {dim}",
                rows + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            values.push(field.parse::<f64>().map_err(parse_err)?);
        }
        rows += 1;
    }
    if rows != dim {
        return Err(Error::Parse(format!(
            "covariance has {rows} rows, expected {dim}"
        )));
    }
    Ok(DMatrix::from_row_slice(dim, dim, &values))
}
