//! Directed acyclic graphs over named variables, d-separation, and summary
//! graphs read off from the dependency pattern of an ODE right-hand side.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph contains a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("node `{0}` appears in more than one of the query sets")]
    OverlappingSets(String),
    #[error("component index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// A directed acyclic graph whose nodes are identified by unique names.
///
/// Nodes keep their declaration order; parent and child lists are sorted by
/// declaration index. Acyclicity is checked on construction, so every `Dag`
/// value has a valid topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    pub fn new<N, E>(nodes: &[N], edges: &[(E, E)]) -> Result<Self>
    where
        N: AsRef<str>,
        E: AsRef<str>,
    {
        let names: Vec<String> = nodes.iter().map(|n| n.as_ref().to_owned()).collect();
        let index = build_index(&names)?;
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let a = lookup(&index, a.as_ref())?;
            let b = lookup(&index, b.as_ref())?;
            idx_edges.push((a, b));
        }
        Self::assemble(names, index, &idx_edges)
    }

    /// Builds a graph from `(parent, child)` index pairs into `names`.
    pub fn from_indices(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let index = build_index(&names)?;
        let n = names.len();
        for &(a, b) in edges {
            for i in [a, b] {
                if i >= n {
                    return Err(GraphError::IndexOutOfRange { index: i, dim: n });
                }
            }
        }
        Self::assemble(names, index, edges)
    }

    fn assemble(
        names: Vec<String>,
        index: HashMap<String, usize>,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        let n = names.len();
        let mut parent_sets = vec![BTreeSet::new(); n];
        let mut child_sets = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            parent_sets[b].insert(a);
            child_sets[a].insert(b);
        }
        let parents: Vec<Vec<usize>> = parent_sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let children: Vec<Vec<usize>> = child_sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let topo = kahn(&parents, &children).map_err(|stuck| {
            GraphError::Cycle(stuck.into_iter().map(|i| names[i].clone()).collect())
        })?;
        Ok(Self { names, index, parents, children, topo })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        lookup(&self.index, name)
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// All edges as `(parent, child)` index pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    /// Topological order; ties are broken by declaration order.
    pub fn topo_order(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.names[i].as_str()).collect()
    }

    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    /// Strict descendants of `i`.
    pub fn descendants(&self, i: usize) -> BTreeSet<usize> {
        walk(i, &self.children)
    }

    /// Strict ancestors of `i`.
    pub fn ancestors(&self, i: usize) -> BTreeSet<usize> {
        walk(i, &self.parents)
    }

    /// Returns a copy of the graph in which `target` has exactly `new_parents`.
    pub fn with_parents(&self, target: usize, new_parents: &[usize]) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> =
            self.edges().into_iter().filter(|&(_, c)| c != target).collect();
        edges.extend(new_parents.iter().map(|&p| (p, target)));
        Self::from_indices(self.names.clone(), &edges)
    }

    /// d-separation query over node names.
    pub fn d_separated<S: AsRef<str>>(&self, a: &[S], b: &[S], z: &[S]) -> Result<bool> {
        let resolve = |set: &[S]| -> Result<Vec<usize>> {
            set.iter().map(|n| self.require(n.as_ref())).collect()
        };
        let (a, b, z) = (resolve(a)?, resolve(b)?, resolve(z)?);
        let mut seen = HashSet::new();
        for &i in a.iter().chain(&b).chain(&z) {
            if !seen.insert(i) {
                return Err(GraphError::OverlappingSets(self.names[i].clone()));
            }
        }
        Ok(self.d_separated_idx(&a, &b, &z))
    }

    /// d-separation over indices; the sets must be disjoint.
    ///
    /// Reachability ("Bayes ball"): a trail is followed through a
    /// non-conditioned node in any non-collider position, and through a
    /// collider only if the collider has a descendant in `z`.
    pub fn d_separated_idx(&self, a: &[usize], b: &[usize], z: &[usize]) -> bool {
        let n = self.len();
        let mut in_z = vec![false; n];
        for &i in z {
            in_z[i] = true;
        }
        // z together with all its ancestors
        let mut anc_z = in_z.clone();
        let mut stack: Vec<usize> = z.to_vec();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !anc_z[p] {
                    anc_z[p] = true;
                    stack.push(p);
                }
            }
        }

        const UP: usize = 0; // arrived from a child
        const DOWN: usize = 1; // arrived from a parent
        let mut visited = vec![[false; 2]; n];
        let mut reachable = vec![false; n];
        let mut stack: Vec<(usize, usize)> = a.iter().map(|&i| (i, UP)).collect();
        while let Some((v, dir)) = stack.pop() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if !in_z[v] {
                reachable[v] = true;
            }
            if dir == UP && !in_z[v] {
                stack.extend(self.parents[v].iter().map(|&p| (p, UP)));
                stack.extend(self.children[v].iter().map(|&c| (c, DOWN)));
            } else if dir == DOWN {
                if !in_z[v] {
                    stack.extend(self.children[v].iter().map(|&c| (c, DOWN)));
                }
                if anc_z[v] {
                    stack.extend(self.parents[v].iter().map(|&p| (p, UP)));
                }
            }
        }
        !b.iter().any(|&i| reachable[i])
    }

    /// Every labelled DAG over `names` (all subsets of ordered pairs that are
    /// acyclic). Intended for small node counts: three nodes give 25 graphs.
    pub fn enumerate_all<S: AsRef<str>>(names: &[S]) -> Vec<Dag> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_owned()).collect();
        let n = names.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        assert!(pairs.len() < 20, "enumeration is limited to four nodes");
        let mut out = Vec::new();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &e)| e)
                .collect();
            if let Ok(dag) = Dag::from_indices(names.clone(), &edges) {
                out.push(dag);
            }
        }
        out
    }
}

fn build_index(names: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(GraphError::DuplicateNode(name.clone()));
        }
    }
    Ok(index)
}

fn lookup(index: &HashMap<String, usize>, name: &str) -> Result<usize> {
    index
        .get(name)
        .copied()
        .ok_or_else(|| GraphError::UnknownNode(name.to_owned()))
}

/// Kahn's algorithm, smallest available index first. On failure returns the
/// nodes that could not be ordered.
fn kahn(parents: &[Vec<usize>], children: &[Vec<usize>]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

fn walk(start: usize, next: &[Vec<usize>]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = next[start].clone();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(next[v].iter().copied());
        }
    }
    seen
}

/// Which state components each component's time derivative depends on:
/// `deps[i]` holds every `j` such that `dx_i/dt` is a function of `x_j`.
/// Components are indexed from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdeMask {
    dim: usize,
    deps: Vec<BTreeSet<usize>>,
}

impl OdeMask {
    pub fn new(dim: usize, deps: Vec<Vec<usize>>) -> Result<Self> {
        if deps.len() != dim {
            return Err(GraphError::IndexOutOfRange { index: deps.len(), dim });
        }
        let mut sets = Vec::with_capacity(dim);
        for row in deps {
            let mut set = BTreeSet::new();
            for j in row {
                if j >= dim {
                    return Err(GraphError::IndexOutOfRange { index: j, dim });
                }
                set.insert(j);
            }
            sets.push(set);
        }
        Ok(Self { dim, deps: sets })
    }

    /// Mask of the linear system `dx/dt = A x`: component `i` depends on
    /// `x_j` wherever `A[i][j]` is non-zero.
    pub fn from_linear_system(a: &[Vec<f64>]) -> Result<Self> {
        let dim = a.len();
        let deps = a
            .iter()
            .map(|row| {
                if row.len() != dim {
                    return Err(GraphError::IndexOutOfRange { index: row.len(), dim });
                }
                Ok(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect())
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Self::new(dim, deps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depends_on(&self, i: usize) -> &BTreeSet<usize> {
        &self.deps[i]
    }
}

/// Directed graph that may contain cycles; produced only by [`from_ode_mask`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    names: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
    self_dependent: Vec<bool>,
}

impl DirectedGraph {
    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Whether component `i` feeds back into its own derivative.
    pub fn self_dependent(&self, i: usize) -> bool {
        self.self_dependent[i]
    }

    pub fn is_acyclic(&self) -> bool {
        self.to_dag().is_ok()
    }

    /// Drops the self-dependence flags and validates acyclicity.
    pub fn to_dag(&self) -> Result<Dag> {
        let edges: Vec<_> = self.edges.iter().copied().collect();
        Dag::from_indices(self.names.clone(), &edges)
    }
}

/// Summary causal graph of an ODE: an edge `x_j -> x_i` for every `j != i`
/// that `dx_i/dt` depends on. Nodes are named `x1 .. xd`.
pub fn from_ode_mask(mask: &OdeMask) -> DirectedGraph {
    let names = (1..=mask.dim).map(|i| format!("x{i}")).collect();
    let mut edges = BTreeSet::new();
    let mut self_dependent = vec![false; mask.dim];
    for (i, deps) in mask.deps.iter().enumerate() {
        for &j in deps {
            if j == i {
                self_dependent[i] = true;
            } else {
                edges.insert((j, i));
            }
        }
    }
    DirectedGraph { names, edges, self_dependent }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Dag {
        Dag::new(&["X", "Z", "Y"], &[("X", "Z"), ("Z", "Y")]).unwrap()
    }

    #[test]
    fn topo_of_chain_and_singleton() {
        assert_eq!(chain().topo_order(), vec!["X", "Z", "Y"]);
        let single = Dag::new(&["A"], &[] as &[(&str, &str)]).unwrap();
        assert_eq!(single.topo_order(), vec!["A"]);
    }

    #[test]
    fn topo_breaks_ties_by_declaration() {
        let g = Dag::new(&["C", "B", "A"], &[("A", "B")]).unwrap();
        assert_eq!(g.topo_order(), vec!["C", "A", "B"]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Dag::new(&["A", "A"], &[] as &[(&str, &str)]),
            Err(GraphError::DuplicateNode("A".into()))
        );
        assert_eq!(Dag::new(&["A"], &[("A", "B")]), Err(GraphError::UnknownNode("B".into())));
        assert!(matches!(
            Dag::new(&["A", "B"], &[("A", "B"), ("B", "A")]),
            Err(GraphError::Cycle(_))
        ));
        assert!(matches!(Dag::new(&["A"], &[("A", "A")]), Err(GraphError::Cycle(_))));
    }

    #[test]
    fn fork_and_collider() {
        let fork = Dag::new(&["X", "Z", "Y"], &[("Z", "X"), ("Z", "Y")]).unwrap();
        assert!(fork.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
        assert!(!fork.d_separated(&["X"], &["Y"], &[] as &[&str]).unwrap());

        let collider = Dag::new(&["X", "Z", "Y"], &[("X", "Z"), ("Y", "Z")]).unwrap();
        assert!(collider.d_separated(&["X"], &["Y"], &[] as &[&str]).unwrap());
        assert!(!collider.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
    }

    #[test]
    fn conditioning_on_collider_descendant_opens() {
        let g = Dag::new(&["X", "Y", "Z", "W"], &[("X", "Z"), ("Y", "Z"), ("Z", "W")]).unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &["W"]).unwrap());
    }

    #[test]
    fn d_separation_errors() {
        let g = chain();
        assert_eq!(
            g.d_separated(&["X"], &["X"], &[] as &[&str]),
            Err(GraphError::OverlappingSets("X".into()))
        );
        assert_eq!(
            g.d_separated(&["X"], &["Q"], &[] as &[&str]),
            Err(GraphError::UnknownNode("Q".into()))
        );
    }

    #[test]
    fn there_are_25_three_node_dags() {
        assert_eq!(Dag::enumerate_all(&["A", "B", "C"]).len(), 25);
        assert_eq!(Dag::enumerate_all(&["A", "B", "C", "D"]).len(), 543);
    }

    #[test]
    fn with_parents_rejects_cycles() {
        let g = chain();
        let y = g.index_of("Y").unwrap();
        let x = g.index_of("X").unwrap();
        assert!(matches!(g.with_parents(x, &[y]), Err(GraphError::Cycle(_))));
        let g2 = g.with_parents(y, &[x]).unwrap();
        assert!(g2.has_edge(x, y));
        assert!(!g2.has_edge(g.index_of("Z").unwrap(), y));
    }

    #[test]
    fn ode_diagonal_mask_has_no_edges() {
        let m = OdeMask::new(3, vec![vec![0], vec![1], vec![2]]).unwrap();
        let g = from_ode_mask(&m);
        assert!(g.edges().is_empty());
        assert!((0..3).all(|i| g.self_dependent(i)));
    }

    #[test]
    fn ode_single_coupling() {
        // f_1 depends on x_2 only
        let m = OdeMask::new(2, vec![vec![1], vec![]]).unwrap();
        let g = from_ode_mask(&m);
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(1, 0)]);
        assert!(!g.self_dependent(0));
        assert!(g.is_acyclic());
    }

    #[test]
    fn damped_coupled_oscillator_is_cyclic() {
        // x1 = position, x2 = velocity: dx1 = x2, dx2 = -k x1 - c x2
        let (k, c) = (2.0, 0.3);
        let a = vec![vec![0.0, 1.0], vec![-k, -c]];
        let g = from_ode_mask(&OdeMask::from_linear_system(&a).unwrap());
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(!g.self_dependent(0));
        assert!(g.self_dependent(1));
        assert!(!g.is_acyclic());
    }

    #[test]
    fn ode_mask_out_of_range() {
        assert_eq!(
            OdeMask::new(2, vec![vec![2], vec![]]),
            Err(GraphError::IndexOutOfRange { index: 2, dim: 2 })
        );
    }
}
