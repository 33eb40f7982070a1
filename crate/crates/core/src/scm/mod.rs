//! Structural causal models: each variable is assigned from its parents and
//! an independent noise variable, `X_i := f_i(PA_i, U_i)`.
//!
//! Sampling is ancestral. Noise for node `i` comes from its own counter-based
//! substream keyed by the model seed and a hash of the node name, split into
//! fixed-size row blocks, so output is identical for any thread count and
//! adding a node does not disturb the draws of the others.
//!
//! Models whose noises and mechanisms are all finite also support exact
//! enumeration of the entailed joint distribution, see [`ExactDistribution`].

mod dataset;
mod exact;
mod mechanism;
mod noise;

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::graph::{Dag, GraphError};

pub use dataset::Dataset;
pub use exact::{CiCheck, ExactDistribution, DEFAULT_CI_TOLERANCE, MAX_MARKOV_VARIABLES};
pub use mechanism::{Mechanism, ParentFn, UnaryFn};
pub use noise::NoiseSpec;

/// Rows per noise block; each (node, block) pair owns a disjoint substream window.
const SAMPLE_BLOCK: usize = 1024;

/// Upper bound on noise configurations visited by exact enumeration.
pub const MAX_NOISE_CONFIGURATIONS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node `{node}`: invalid noise: {reason}")]
    InvalidNoise { node: String, reason: String },
    #[error("node `{node}`: invalid mechanism: {reason}")]
    InvalidMechanism { node: String, reason: String },
    #[error("node `{node}`: mechanism takes {expected} parents, {found} declared")]
    ArityMismatch { node: String, expected: usize, found: usize },
    #[error("node `{node}` is not finite (continuous noise or mechanism); exact queries need finite domains")]
    NotFinite { node: String },
    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),
    #[error("unknown intervention target `{0}`")]
    UnknownTarget(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}

pub type Result<T> = std::result::Result<T, ScmError>;

/// Declarative description of one node, in the order parents are passed to
/// the mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub noise: NoiseSpec,
    pub mechanism: Mechanism,
}

impl NodeSpec {
    pub fn new(name: &str, parents: &[&str], noise: NoiseSpec, mechanism: Mechanism) -> Self {
        Self {
            name: name.to_owned(),
            parents: parents.iter().map(|p| (*p).to_owned()).collect(),
            noise,
            mechanism,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    parents: Vec<usize>,
    noise: NoiseSpec,
    mechanism: Mechanism,
    /// Sorted finite set of attainable values, `None` if continuous.
    support: Option<Vec<f64>>,
    stream: u64,
}

/// A structural causal model over a [`Dag`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    graph: Dag,
    nodes: Vec<Node>,
}

/// Replacement of one structural assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub target: String,
    pub action: InterventionAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionAction {
    /// Hard intervention `do(X = c)`.
    SetConstant(f64),
    ReplaceMechanism { parents: Vec<String>, mechanism: Mechanism },
    ReplaceNoise(NoiseSpec),
}

impl Intervention {
    pub fn set_constant(target: &str, value: f64) -> Self {
        Self { target: target.to_owned(), action: InterventionAction::SetConstant(value) }
    }

    pub fn replace_noise(target: &str, noise: NoiseSpec) -> Self {
        Self { target: target.to_owned(), action: InterventionAction::ReplaceNoise(noise) }
    }

    pub fn replace_mechanism(target: &str, parents: &[&str], mechanism: Mechanism) -> Self {
        Self {
            target: target.to_owned(),
            action: InterventionAction::ReplaceMechanism {
                parents: parents.iter().map(|p| (*p).to_owned()).collect(),
                mechanism,
            },
        }
    }
}

impl Scm {
    /// Builds and validates a model. Nodes keep the given declaration order.
    pub fn new(specs: Vec<NodeSpec>) -> Result<Self> {
        let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        let mut edges = Vec::new();
        for s in &specs {
            let mut seen = HashSet::new();
            for p in &s.parents {
                if !seen.insert(p) {
                    return Err(ScmError::InvalidMechanism {
                        node: s.name.clone(),
                        reason: format!("parent `{p}` listed twice"),
                    });
                }
                edges.push((p.as_str(), s.name.as_str()));
            }
        }
        let graph = Dag::new(&names, &edges)?;

        let mut nodes: Vec<Option<Node>> = vec![None; specs.len()];
        for &i in graph.topo_indices() {
            let spec = &specs[i];
            let err_noise = |reason| ScmError::InvalidNoise { node: spec.name.clone(), reason };
            let err_mech = |reason| ScmError::InvalidMechanism { node: spec.name.clone(), reason };
            spec.noise.validate().map_err(err_noise)?;
            spec.mechanism.validate().map_err(err_mech)?;
            if spec.mechanism.arity() != spec.parents.len() {
                return Err(ScmError::ArityMismatch {
                    node: spec.name.clone(),
                    expected: spec.mechanism.arity(),
                    found: spec.parents.len(),
                });
            }
            let parents: Vec<usize> =
                spec.parents.iter().map(|p| graph.require(p)).collect::<std::result::Result<_, _>>()?;
            let parent_supports: Vec<Option<&Vec<f64>>> = parents
                .iter()
                .map(|&p| nodes[p].as_ref().expect("parents precede children").support.as_ref())
                .collect();
            let support = node_support(spec, &parent_supports).map_err(err_mech)?;
            nodes[i] = Some(Node {
                parents,
                noise: spec.noise.clone(),
                mechanism: spec.mechanism.clone(),
                support,
                stream: name_stream(&spec.name),
            });
        }
        let nodes = nodes.into_iter().map(|n| n.expect("every node visited")).collect();
        Ok(Self { graph, nodes })
    }

    pub fn graph(&self) -> &Dag {
        &self.graph
    }

    pub fn names(&self) -> &[String] {
        self.graph.nodes()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Mechanism argument order for node `i`.
    pub fn parents_of(&self, i: usize) -> &[usize] {
        &self.nodes[i].parents
    }

    pub fn mechanism(&self, i: usize) -> &Mechanism {
        &self.nodes[i].mechanism
    }

    pub fn noise(&self, i: usize) -> &NoiseSpec {
        &self.nodes[i].noise
    }

    /// Finite support of node `i`, if it has one.
    pub fn support(&self, i: usize) -> Option<&[f64]> {
        self.nodes[i].support.as_deref()
    }

    pub fn is_finite(&self) -> bool {
        self.nodes.iter().all(|n| n.support.is_some())
    }

    pub fn specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeSpec {
                name: self.graph.name(i).to_owned(),
                parents: n.parents.iter().map(|&p| self.graph.name(p).to_owned()).collect(),
                noise: n.noise.clone(),
                mechanism: n.mechanism.clone(),
            })
            .collect()
    }

    /// Draws `n` IID rows; columns follow declaration order.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        self.sample_with(n, seed, Execution::default())
    }

    pub fn sample_with(&self, n: usize, seed: u64, exec: Execution) -> Dataset {
        let width = self.nodes.len();
        let blocks = n.div_ceil(SAMPLE_BLOCK);
        let chunks = exec::map_indices(exec, blocks, |b| {
            let rows = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
            let noise: Vec<Vec<f64>> = self
                .nodes
                .iter()
                .map(|node| {
                    let mut rng = exec::substream(seed, node.stream, b as u64);
                    (0..rows).map(|_| node.noise.sample(&mut rng)).collect()
                })
                .collect();
            let mut out = vec![0.0; rows * width];
            let mut args = Vec::new();
            for r in 0..rows {
                let row = &mut out[r * width..(r + 1) * width];
                for &i in self.graph.topo_indices() {
                    let node = &self.nodes[i];
                    args.clear();
                    args.extend(node.parents.iter().map(|&p| row[p]));
                    row[i] = node
                        .mechanism
                        .evaluate(&args, noise[i][r])
                        .expect("mechanism domains validated at construction");
                }
            }
            out
        });
        let data = chunks.concat();
        Dataset::new(self.names().to_vec(), data, Some(seed)).expect("rectangular by construction")
    }

    /// Returns a new model with one assignment replaced; `self` is unchanged.
    pub fn intervene(&self, iv: &Intervention) -> Result<Scm> {
        let target = self
            .graph
            .index_of(&iv.target)
            .ok_or_else(|| ScmError::UnknownTarget(iv.target.clone()))?;
        let mut specs = self.specs();
        let spec = &mut specs[target];
        match &iv.action {
            InterventionAction::SetConstant(c) => {
                spec.parents.clear();
                spec.mechanism = Mechanism::Constant { value: *c };
            }
            InterventionAction::ReplaceMechanism { parents, mechanism } => {
                spec.parents = parents.clone();
                spec.mechanism = mechanism.clone();
            }
            InterventionAction::ReplaceNoise(noise) => spec.noise = noise.clone(),
        }
        Scm::new(specs)
    }

    /// Joint distribution by summing over every noise configuration.
    pub fn exact_distribution(&self) -> Result<ExactDistribution> {
        ExactDistribution::from_scm(self)
    }

    /// Checks every d-separation-implied independence `X _||_ Y | Z` between
    /// single variables against the exact joint, at [`DEFAULT_CI_TOLERANCE`].
    pub fn verify_markov(&self) -> Result<Vec<CiCheck>> {
        self.verify_markov_with(DEFAULT_CI_TOLERANCE)
    }

    pub fn verify_markov_with(&self, tolerance: f64) -> Result<Vec<CiCheck>> {
        exact::verify_markov(self, tolerance)
    }

    /// A generic binary model over `dag`: each node is a table over its
    /// parents and a categorical "response function" noise with random
    /// weights, which can represent any conditional distribution. Nodes may
    /// have at most three parents.
    pub fn random_binary(dag: &Dag, seed: u64) -> Result<Scm> {
        let mut rng = exec::substream(seed, 0x5c4d, 0);
        let mut specs = Vec::with_capacity(dag.len());
        for i in 0..dag.len() {
            let parents = dag.parents(i);
            if parents.len() > 3 {
                return Err(ScmError::EnumerationBound(format!(
                    "node `{}` has {} parents, random tables support at most 3",
                    dag.name(i),
                    parents.len()
                )));
            }
            let configs = 1usize << parents.len();
            let functions = 1usize << configs;
            let raw: Vec<f64> = (0..functions).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let drift: f64 = 1.0 - weights.iter().sum::<f64>();
            weights[0] += drift;
            let mut outputs = Vec::with_capacity(configs * functions);
            for c in 0..configs {
                for u in 0..functions {
                    outputs.push(((u >> c) & 1) as f64);
                }
            }
            specs.push(NodeSpec {
                name: dag.name(i).to_owned(),
                parents: parents.iter().map(|&p| dag.name(p).to_owned()).collect(),
                noise: NoiseSpec::Categorical { weights },
                mechanism: Mechanism::Table {
                    parent_domains: vec![vec![0.0, 1.0]; parents.len()],
                    noise_domain: (0..functions).map(|u| u as f64).collect(),
                    outputs,
                },
            });
        }
        Scm::new(specs)
    }
}

/// FNV-1a hash of a node name, used as its noise stream id.
fn name_stream(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Computes a node's finite support, or `None` when it is continuous, and
/// checks that tables and selectors cover every reachable input.
fn node_support(
    spec: &NodeSpec,
    parent_supports: &[Option<&Vec<f64>>],
) -> std::result::Result<Option<Vec<f64>>, String> {
    let noise_support = spec.noise.support();
    match &spec.mechanism {
        Mechanism::Table { parent_domains, noise_domain, .. } => {
            let Some(ns) = &noise_support else {
                return Err("table mechanism needs finite noise".into());
            };
            if let Some((v, _)) = ns.iter().find(|(v, _)| !noise_domain.contains(v)) {
                return Err(format!("noise value {v} missing from table noise domain"));
            }
            for (k, (dom, sup)) in parent_domains.iter().zip(parent_supports).enumerate() {
                let Some(sup) = sup else {
                    return Err(format!("table parent #{k} is continuous"));
                };
                if let Some(v) = sup.iter().find(|v| !dom.contains(v)) {
                    return Err(format!("parent #{k} value {v} missing from table domain"));
                }
            }
        }
        Mechanism::Selector { family } => {
            let Some(ns) = &noise_support else {
                return Err("selector mechanism needs finite noise".into());
            };
            if let Some((v, _)) = ns.iter().find(|(v, _)| mechanism::selector_index(*v, family.len()).is_none()) {
                return Err(format!("noise value {v} does not index the selector family"));
            }
        }
        _ => {}
    }

    if !spec.mechanism.is_discrete() {
        return Ok(None);
    }
    let Some(noise_support) = noise_support else {
        return Ok(match spec.mechanism {
            Mechanism::Constant { value } => Some(vec![value]),
            _ => None,
        });
    };
    let Some(parent_supports) = parent_supports.iter().copied().collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let mut values = BTreeSet::new();
    let mut args = vec![0.0; parent_supports.len()];
    let mut odometer = vec![0usize; parent_supports.len()];
    'outer: loop {
        for (a, (s, &k)) in args.iter_mut().zip(parent_supports.iter().zip(&odometer)) {
            *a = s[k];
        }
        for &(u, _) in &noise_support {
            let v = spec.mechanism.evaluate(&args, u).ok_or("mechanism undefined on its input domain")?;
            values.insert(v.to_bits());
        }
        for (k, slot) in odometer.iter_mut().enumerate().rev() {
            *slot += 1;
            if *slot < parent_supports[k].len() {
                continue 'outer;
            }
            *slot = 0;
        }
        break;
    }
    let mut support: Vec<f64> = values.into_iter().map(f64::from_bits).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    Ok(Some(support))
}
