//! Mean-field inference: single-edge forward/backward updates and the
//! iterative solver for entailment graphs with positive and negative
//! relations.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::kernels::{log1m_exp, log_sigmoid, sigmoid};
use crate::operators::Operator;
use crate::vector::{LogOddsVector, ProbVector};

/// Forward update: `Q(x_k=1) = σ(θ^x_k + log Q(y_k=1))`.
pub fn forward_infer(theta_x: &LogOddsVector, q_y: &ProbVector) -> Result<ProbVector> {
    if theta_x.dim() != q_y.dim() {
        return Err(Error::DimensionMismatch { left: theta_x.dim(), right: q_y.dim() });
    }
    if let Some(index) = q_y.iter().position(|&q| q == 0.0) {
        return Err(Error::ImpossibleFeature { index });
    }
    ProbVector::new(
        theta_x
            .iter()
            .zip(q_y.iter())
            .map(|(&t, &q)| sigmoid(t + q.ln()))
            .collect(),
    )
}

/// Backward update: `Q(y_k=1) = σ(θ^y_k − log(1 − Q(x_k=1)))`.
pub fn backward_infer(theta_y: &LogOddsVector, q_x: &ProbVector) -> Result<ProbVector> {
    if theta_y.dim() != q_x.dim() {
        return Err(Error::DimensionMismatch { left: theta_y.dim(), right: q_x.dim() });
    }
    if let Some(index) = q_x.iter().position(|&q| q == 1.0) {
        return Err(Error::CertainlyKnown { index });
    }
    ProbVector::new(
        theta_y
            .iter()
            .zip(q_x.iter())
            .map(|(&t, &q)| sigmoid(t - (-q).ln_1p()))
            .collect(),
    )
}

fn log_neg_constant(xi: &[f64], xj: &[f64], k: usize) -> f64 {
    xi.iter()
        .zip(xj)
        .enumerate()
        .filter(|&(kk, _)| kk != k)
        .map(|(_, (&a, &b))| Operator::Factorized.term(a, b))
        .sum()
}

/// `C_ijk = Π_{k'≠k} (1 − σ(−X_ik')·σ(X_jk'))`, the probability that every
/// other dimension of `x_i ⇒ x_j` holds. Accumulated in log space.
pub fn neg_relation_constant(xi: &LogOddsVector, xj: &LogOddsVector, k: usize) -> Result<f64> {
    if xi.dim() != xj.dim() {
        return Err(Error::DimensionMismatch { left: xi.dim(), right: xj.dim() });
    }
    if k >= xi.dim() {
        return Err(Error::IndexOutOfRange { index: k, dim: xi.dim() });
    }
    Ok(log_neg_constant(xi, xj, k).exp())
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    theta: LogOddsVector,
}

/// Nodes with per-node prior log-odds, entailment (`r`) and non-entailment
/// (`r̄`) relations, and clamped observations.
#[derive(Debug, Clone, Default)]
pub struct EntailmentGraph {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    pos_edges: Vec<(usize, usize)>,
    neg_edges: Vec<(usize, usize)>,
    observations: BTreeMap<usize, Vec<f64>>,
}

impl EntailmentGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.nodes.first().map(|n| n.theta.dim())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.name.as_str())
    }

    pub fn add_node(&mut self, name: &str, theta: LogOddsVector) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidGraph(format!("node {name:?} declared twice")));
        }
        if let Some(dim) = self.dim() {
            if theta.dim() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: theta.dim() });
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { name: name.to_string(), theta });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidGraph(format!("unknown node {name:?}")))
    }

    fn edge(&self, a: &str, b: &str) -> Result<(usize, usize)> {
        let (i, j) = (self.lookup(a)?, self.lookup(b)?);
        if i == j {
            return Err(Error::InvalidGraph(format!("self-edge on {a:?}")));
        }
        Ok((i, j))
    }

    /// Adds `a ⇒ b`.
    pub fn add_entail(&mut self, a: &str, b: &str) -> Result<()> {
        let e = self.edge(a, b)?;
        if !self.pos_edges.contains(&e) {
            self.pos_edges.push(e);
        }
        Ok(())
    }

    /// Adds `a ⇏ b`.
    pub fn add_not_entail(&mut self, a: &str, b: &str) -> Result<()> {
        let e = self.edge(a, b)?;
        if !self.neg_edges.contains(&e) {
            self.neg_edges.push(e);
        }
        Ok(())
    }

    /// Clamps dimension `k` of `name`. An observed node is never updated;
    /// its unobserved dimensions stay at the prior.
    pub fn observe(&mut self, name: &str, k: usize, log_odds: f64) -> Result<()> {
        let id = self.lookup(name)?;
        let theta = &self.nodes[id].theta;
        if k >= theta.dim() {
            return Err(Error::IndexOutOfRange { index: k, dim: theta.dim() });
        }
        if !log_odds.is_finite() {
            return Err(Error::NonFinite { index: k, value: log_odds });
        }
        let init = theta.values().to_vec();
        self.observations.entry(id).or_insert(init)[k] = log_odds;
        Ok(())
    }

    pub fn is_observed(&self, name: &str) -> bool {
        self.index.get(name).is_some_and(|id| self.observations.contains_key(id))
    }

    /// Parses the line-oriented graph format:
    ///
    /// ```text
    /// node <name> <dim> [θ_1 … θ_dim]
    /// entail <a> <b>
    /// notentail <a> <b>
    /// observe <name> <k> <logodds>
    /// ```
    ///
    /// `#` starts a comment. Nodes must be declared before use.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut graph = EntailmentGraph::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let content = line.split('#').next().unwrap_or("");
            let fields: Vec<&str> = content.split_whitespace().collect();
            let Some((&keyword, args)) = fields.split_first() else {
                continue;
            };
            let at = |e: Error| match e {
                Error::Parse { .. } | Error::Io(_) => e,
                other => Error::Parse { line: lineno, msg: other.to_string() },
            };
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            match keyword {
                "node" => {
                    let [name, dim, thetas @ ..] = args else {
                        return Err(bad("expected `node <name> <dim> [θ…]`".into()));
                    };
                    let dim: usize = dim.parse().map_err(|_| bad(format!("bad dimension {dim:?}")))?;
                    if dim == 0 {
                        return Err(bad("dimension must be positive".into()));
                    }
                    let theta = if thetas.is_empty() {
                        vec![0.0; dim]
                    } else if thetas.len() == dim {
                        thetas
                            .iter()
                            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad prior {t:?}"))))
                            .collect::<Result<_>>()?
                    } else {
                        return Err(bad(format!("expected {dim} prior values, got {}", thetas.len())));
                    };
                    graph.add_node(name, LogOddsVector::new(theta).map_err(at)?).map_err(at)?;
                }
                "entail" | "notentail" => {
                    let [a, b] = args else {
                        return Err(bad(format!("expected `{keyword} <a> <b>`")));
                    };
                    if keyword == "entail" {
                        graph.add_entail(a, b).map_err(at)?;
                    } else {
                        graph.add_not_entail(a, b).map_err(at)?;
                    }
                }
                "observe" => {
                    let [name, k, value] = args else {
                        return Err(bad("expected `observe <name> <k> <logodds>`".into()));
                    };
                    let k: usize = k.parse().map_err(|_| bad(format!("bad index {k:?}")))?;
                    let value: f64 = value.parse().map_err(|_| bad(format!("bad log-odds {value:?}")))?;
                    graph.observe(name, k, value).map_err(at)?;
                }
                other => return Err(bad(format!("unknown directive {other:?}"))),
            }
        }
        Ok(graph)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_sweeps: usize,
    /// Convergence threshold on the largest absolute log-odds change in a sweep.
    pub tol: f64,
    /// `X ← (1 − d)·X_new + d·X_old`.
    pub damping: f64,
    /// Log-odds magnitude cap applied after every update.
    pub clamp: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_sweeps: 500, tol: 1e-6, damping: 0.0, clamp: 30.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps < 1 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig("damping must lie in [0, 1)".into()));
        }
        if !(self.clamp > 0.0) {
            return Err(Error::InvalidConfig("clamp must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Node name and inferred log-odds, in declaration order.
    pub assignments: Vec<(String, LogOddsVector)>,
    pub converged: bool,
    pub sweeps_used: usize,
    pub final_delta: f64,
}

impl SolverResult {
    pub fn get(&self, name: &str) -> Option<&LogOddsVector> {
        self.assignments.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

#[derive(Default, Clone)]
struct Neighbours {
    entailed: Vec<usize>,
    entailing: Vec<usize>,
    not_entailed: Vec<usize>,
    not_entailing: Vec<usize>,
}

/// Round-robin Gauss-Seidel mean-field solver.
///
/// Free nodes start at their prior. Each sweep visits nodes in declaration
/// order and dimensions in index order, replacing `X_ik` with the prior plus
/// `−log σ(−X_jk)` for every entailed `j`, `log σ(X_jk)` for every entailing
/// `j`, and the non-entailment terms built from the current `C` constants.
pub fn graph_infer(graph: &EntailmentGraph, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let n = graph.nodes.len();
    let clamp = |x: f64| x.clamp(-cfg.clamp, cfg.clamp);

    let mut state: Vec<Vec<f64>> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            graph
                .observations
                .get(&i)
                .unwrap_or(&node.theta.values().to_vec())
                .iter()
                .map(|&x| clamp(x))
                .collect()
        })
        .collect();

    let mut adj = vec![Neighbours::default(); n];
    for &(i, j) in &graph.pos_edges {
        adj[i].entailed.push(j);
        adj[j].entailing.push(i);
    }
    for &(i, j) in &graph.neg_edges {
        adj[i].not_entailed.push(j);
        adj[j].not_entailing.push(i);
    }

    let dim = graph.dim().unwrap_or(0);
    let mut converged = false;
    let mut sweeps_used = 0;
    let mut final_delta = 0.0;

    for sweep in 1..=cfg.max_sweeps {
        sweeps_used = sweep;
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if graph.observations.contains_key(&i) {
                continue;
            }
            for k in 0..dim {
                let mut x = graph.nodes[i].theta[k];
                for &j in &adj[i].entailed {
                    x -= log_sigmoid(-state[j][k]);
                }
                for &j in &adj[i].entailing {
                    x += log_sigmoid(state[j][k]);
                }
                // j ⇏ i, i plays the entailed role
                for &j in &adj[i].not_entailing {
                    let log_c = log_neg_constant(&state[j], &state[i], k);
                    x += log1m_exp(log_c + log_sigmoid(state[j][k])) - log1m_exp(log_c);
                }
                // i ⇏ j, i plays the entailing role
                for &j in &adj[i].not_entailed {
                    let log_c = log_neg_constant(&state[i], &state[j], k);
                    x -= log1m_exp(log_c + log_sigmoid(-state[j][k])) - log1m_exp(log_c);
                }
                if x.is_nan() {
                    return Err(Error::Solver { node: graph.nodes[i].name.clone(), dim: k, sweep });
                }
                let old = state[i][k];
                let new = (1.0 - cfg.damping) * clamp(x) + cfg.damping * old;
                delta = delta.max((new - old).abs());
                state[i][k] = new;
            }
        }
        final_delta = delta;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    let assignments = graph
        .nodes
        .iter()
        .zip(state)
        .map(|(node, x)| Ok((node.name.clone(), LogOddsVector::new(x)?)))
        .collect::<Result<_>>()?;
    Ok(SolverResult { assignments, converged, sweeps_used, final_delta })
}
