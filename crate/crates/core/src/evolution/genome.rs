use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EvolutionConfig, EvolutionError};

/// Slope of the logistic activation used by hidden and output nodes.
pub const SIGMOID_SLOPE: f64 = 4.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Input,
    Bias,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    SteepSigmoid,
}

impl Activation {
    pub fn for_kind(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Input | NodeKind::Bias => Activation::Identity,
            NodeKind::Hidden | NodeKind::Output => Activation::SteepSigmoid,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::SteepSigmoid => 1.0 / (1.0 + (-SIGMOID_SLOPE * x).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: u32,
    pub kind: NodeKind,
    pub activation: Activation,
}

impl NodeGene {
    pub fn new(id: u32, kind: NodeKind) -> Self {
        Self { id, kind, activation: Activation::for_kind(kind) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub innovation: u64,
    pub from: u32,
    pub to: u32,
    pub weight: f64,
    pub enabled: bool,
}

/// Node ids are laid out as inputs `0..n_in`, the bias `n_in`, outputs
/// `n_in+1..=n_in+n_out`, then hidden nodes. Nodes are kept sorted by id and
/// connections by innovation number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
    pub fitness: Option<f64>,
}

impl Genome {
    /// Nodes for `inputs` inputs, a bias and `outputs` outputs, with no connections.
    pub fn bare(inputs: usize, outputs: usize) -> Self {
        let mut nodes: Vec<NodeGene> = (0..inputs as u32).map(|i| NodeGene::new(i, NodeKind::Input)).collect();
        nodes.push(NodeGene::new(inputs as u32, NodeKind::Bias));
        nodes.extend((0..outputs as u32).map(|o| NodeGene::new(inputs as u32 + 1 + o, NodeKind::Output)));
        Self { nodes, connections: Vec::new(), fitness: None }
    }

    /// Every input and the bias wired to every output, weights uniform in ±`scale`.
    /// Innovation numbers follow the fixed wiring order so they agree across genomes.
    pub fn fully_connected(inputs: usize, outputs: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut g = Self::bare(inputs, outputs);
        let mut innovation = 0;
        for from in 0..=inputs as u32 {
            for o in 0..outputs as u32 {
                let weight = rng.gen_range(-scale..=scale);
                g.connections.push(ConnectionGene {
                    innovation,
                    from,
                    to: inputs as u32 + 1 + o,
                    weight,
                    enabled: true,
                });
                innovation += 1;
            }
        }
        g
    }

    /// Innovation numbers used by [`Genome::fully_connected`].
    pub fn initial_innovations(inputs: usize, outputs: usize) -> u64 {
        ((inputs + 1) * outputs) as u64
    }

    pub fn input_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Input).count()
    }

    pub fn output_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Output).count()
    }

    pub fn node(&self, id: u32) -> Option<&NodeGene> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &self.nodes[i])
    }

    pub fn max_node_id(&self) -> u32 {
        self.nodes.last().map(|n| n.id).unwrap_or(0)
    }

    pub fn has_pair(&self, from: u32, to: u32) -> bool {
        self.connections.iter().any(|c| c.from == from && c.to == to)
    }

    /// Whether `to` can reach `from` over any connection (enabled or not),
    /// i.e. whether adding `from -> to` would close a cycle.
    pub fn creates_cycle(&self, from: u32, to: u32) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![to];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == from {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.connections.iter().filter(|c| c.from == n).map(|c| c.to));
            }
        }
        false
    }

    /// Checks structural invariants.
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::InvalidGenome(m.to_string()));
        if self.nodes.windows(2).any(|w| w[0].id >= w[1].id) {
            return bad("node ids must be unique and sorted");
        }
        if self.connections.windows(2).any(|w| w[0].innovation >= w[1].innovation) {
            return bad("innovation numbers must be unique and sorted");
        }
        let mut pairs = BTreeSet::new();
        for c in &self.connections {
            let (Some(from), Some(to)) = (self.node(c.from), self.node(c.to)) else {
                return bad("connection references an undeclared node");
            };
            if matches!(to.kind, NodeKind::Input | NodeKind::Bias) || from.kind == NodeKind::Output {
                return bad("connection direction violates node roles");
            }
            if !c.weight.is_finite() {
                return bad("non-finite weight");
            }
            if !pairs.insert((c.from, c.to)) {
                return bad("duplicate connection pair");
            }
        }
        if self.topological_order(false).is_none() {
            return Err(EvolutionError::CyclicGenome);
        }
        Ok(())
    }

    /// Node ids in dependency order over the (enabled-only, if asked) connections.
    fn topological_order(&self, enabled_only: bool) -> Option<Vec<u32>> {
        let mut indeg: BTreeMap<u32, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let edges: Vec<&ConnectionGene> = self.connections.iter().filter(|c| c.enabled || !enabled_only).collect();
        for c in &edges {
            *indeg.get_mut(&c.to)? += 1;
        }
        let mut ready: BTreeSet<u32> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for c in edges.iter().filter(|c| c.from == n) {
                let d = indeg.get_mut(&c.to)?;
                *d -= 1;
                if *d == 0 {
                    ready.insert(c.to);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Whether every output is reachable from an input or the bias over enabled connections.
    pub fn outputs_reachable(&self) -> bool {
        let mut reached: BTreeSet<u32> =
            self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Input | NodeKind::Bias)).map(|n| n.id).collect();
        let mut stack: Vec<u32> = reached.iter().copied().collect();
        while let Some(n) = stack.pop() {
            for c in self.connections.iter().filter(|c| c.enabled && c.from == n) {
                if reached.insert(c.to) {
                    stack.push(c.to);
                }
            }
        }
        self.nodes.iter().filter(|n| n.kind == NodeKind::Output).all(|n| reached.contains(&n.id))
    }

    /// Precomputes an evaluation plan.
    pub fn compile(&self) -> Result<Network, EvolutionError> {
        let order = self.topological_order(true).ok_or(EvolutionError::CyclicGenome)?;
        let index: BTreeMap<u32, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut bias = None;
        for (i, n) in self.nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Input => inputs.push(i),
                NodeKind::Output => outputs.push(i),
                NodeKind::Bias => bias = Some(i),
                NodeKind::Hidden => {}
            }
        }
        let steps = order
            .iter()
            .map(|id| &self.nodes[index[id]])
            .filter(|n| matches!(n.kind, NodeKind::Hidden | NodeKind::Output))
            .map(|n| {
                let incoming = self
                    .connections
                    .iter()
                    .filter(|c| c.enabled && c.to == n.id)
                    .map(|c| (index[&c.from], c.weight))
                    .collect();
                (index[&n.id], n.activation, incoming)
            })
            .collect();
        Ok(Network { size: self.nodes.len(), inputs, bias, outputs, steps })
    }
}

/// A genome compiled into a feed-forward evaluation plan.
#[derive(Debug, Clone)]
pub struct Network {
    size: usize,
    inputs: Vec<usize>,
    bias: Option<usize>,
    outputs: Vec<usize>,
    steps: Vec<Step>,
}

/// Node, its activation and its enabled inputs as (source node, weight).
type Step = (usize, Activation, Vec<(usize, f64)>);

impl Network {
    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn activate(&self, inputs: &[f64]) -> Result<Vec<f64>, EvolutionError> {
        if inputs.len() != self.inputs.len() {
            return Err(EvolutionError::ArityMismatch { expected: self.inputs.len(), got: inputs.len() });
        }
        let mut values = vec![0.0; self.size];
        for (&slot, &x) in self.inputs.iter().zip(inputs) {
            values[slot] = x;
        }
        if let Some(b) = self.bias {
            values[b] = 1.0;
        }
        for (node, act, incoming) in &self.steps {
            let sum: f64 = incoming.iter().map(|&(src, w)| w * values[src]).sum();
            values[*node] = act.apply(sum);
        }
        Ok(self.outputs.iter().map(|&o| values[o]).collect())
    }
}

/// Evaluates `genome` on one input vector.
pub fn activate(genome: &Genome, inputs: &[f64]) -> Result<Vec<f64>, EvolutionError> {
    genome.compile()?.activate(inputs)
}

/// Hands out innovation numbers and hidden-node ids. Identical structural
/// events within one generation share numbers; [`InnovationRegistry::new_generation`]
/// forgets the events but never reuses numbers.
#[derive(Debug, Clone)]
pub struct InnovationRegistry {
    next_innovation: u64,
    next_node: u32,
    connections: BTreeMap<(u32, u32), u64>,
    splits: BTreeMap<u64, (u32, u64, u64)>,
}

impl InnovationRegistry {
    pub fn new(next_innovation: u64, next_node: u32) -> Self {
        Self { next_innovation, next_node, connections: BTreeMap::new(), splits: BTreeMap::new() }
    }

    /// Registry consistent with a population of [`Genome::fully_connected`] genomes.
    pub fn for_layout(inputs: usize, outputs: usize) -> Self {
        Self::new(Genome::initial_innovations(inputs, outputs), (inputs + 1 + outputs) as u32)
    }

    /// Registry continuing after every number used by `genomes`.
    pub fn after<'a>(genomes: impl IntoIterator<Item = &'a Genome>) -> Self {
        let mut r = Self::new(0, 0);
        for g in genomes {
            r.next_node = r.next_node.max(g.max_node_id() + 1);
            if let Some(c) = g.connections.last() {
                r.next_innovation = r.next_innovation.max(c.innovation + 1);
            }
        }
        r
    }

    pub fn new_generation(&mut self) {
        self.connections.clear();
        self.splits.clear();
    }

    pub fn peek_innovation(&self) -> u64 {
        self.next_innovation
    }

    fn fresh_innovation(&mut self) -> u64 {
        let i = self.next_innovation;
        self.next_innovation += 1;
        i
    }

    pub fn connection(&mut self, from: u32, to: u32) -> u64 {
        if let Some(&i) = self.connections.get(&(from, to)) {
            return i;
        }
        let i = self.fresh_innovation();
        self.connections.insert((from, to), i);
        i
    }

    /// Node id and the two connection innovations for splitting `innovation`.
    pub fn split(&mut self, innovation: u64) -> (u32, u64, u64) {
        if let Some(&s) = self.splits.get(&innovation) {
            return s;
        }
        let node = self.next_node;
        self.next_node += 1;
        let s = (node, self.fresh_innovation(), self.fresh_innovation());
        self.splits.insert(innovation, s);
        s
    }

    fn fresh_split(&mut self) -> (u32, u64, u64) {
        let node = self.next_node;
        self.next_node += 1;
        (node, self.fresh_innovation(), self.fresh_innovation())
    }
}

/// What a call to [`mutate`] changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutationOutcome {
    pub weights_changed: bool,
    pub connection_added: bool,
    pub node_added: bool,
    /// An add-connection was drawn but no legal pair existed.
    pub saturated: bool,
}

fn insert_connection(g: &mut Genome, c: ConnectionGene) {
    let pos = g.connections.partition_point(|x| x.innovation < c.innovation);
    g.connections.insert(pos, c);
}

fn insert_node(g: &mut Genome, n: NodeGene) {
    let pos = g.nodes.partition_point(|x| x.id < n.id);
    g.nodes.insert(pos, n);
}

/// Applies weight, add-connection and add-node mutations at the configured rates.
pub fn mutate(
    genome: &mut Genome,
    config: &EvolutionConfig,
    registry: &mut InnovationRegistry,
    rng: &mut impl Rng,
) -> MutationOutcome {
    let mut out = MutationOutcome::default();
    if !genome.connections.is_empty() && rng.gen_bool(config.weight_mutation_rate) {
        for c in &mut genome.connections {
            if rng.gen_bool(config.weight_reset_rate) {
                c.weight = rng.gen_range(-config.weight_init_scale..=config.weight_init_scale);
            } else {
                c.weight += rng.gen_range(-config.weight_step..=config.weight_step);
            }
            c.weight = c.weight.clamp(-config.weight_limit, config.weight_limit);
        }
        out.weights_changed = true;
    }
    if rng.gen_bool(config.add_connection_rate) {
        let mut candidates = Vec::new();
        for from in genome.nodes.iter().filter(|n| n.kind != NodeKind::Output) {
            for to in genome.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Hidden | NodeKind::Output)) {
                if !genome.has_pair(from.id, to.id) && !genome.creates_cycle(from.id, to.id) {
                    candidates.push((from.id, to.id));
                }
            }
        }
        if candidates.is_empty() {
            out.saturated = true;
        } else {
            let (from, to) = candidates[rng.gen_range(0..candidates.len())];
            let weight = rng.gen_range(-config.weight_init_scale..=config.weight_init_scale);
            let innovation = registry.connection(from, to);
            insert_connection(genome, ConnectionGene { innovation, from, to, weight, enabled: true });
            out.connection_added = true;
        }
    }
    if rng.gen_bool(config.add_node_rate) {
        let enabled: Vec<usize> = (0..genome.connections.len()).filter(|&i| genome.connections[i].enabled).collect();
        if !enabled.is_empty() {
            let idx = enabled[rng.gen_range(0..enabled.len())];
            let old = genome.connections[idx];
            let mut split = registry.split(old.innovation);
            let clash = genome.node(split.0).is_some()
                || genome.connections.iter().any(|c| c.innovation == split.1 || c.innovation == split.2);
            if clash {
                split = registry.fresh_split();
            }
            let (node, in_innov, out_innov) = split;
            genome.connections[idx].enabled = false;
            insert_node(genome, NodeGene::new(node, NodeKind::Hidden));
            insert_connection(
                genome,
                ConnectionGene { innovation: in_innov, from: old.from, to: node, weight: 1.0, enabled: true },
            );
            insert_connection(
                genome,
                ConnectionGene { innovation: out_innov, from: node, to: old.to, weight: old.weight, enabled: true },
            );
            out.node_added = true;
        }
    }
    if out != MutationOutcome::default() {
        genome.fitness = None;
    }
    out
}

/// Probability that a gene disabled in either parent stays disabled in the child.
pub const INHERIT_DISABLED: f64 = 0.75;

/// NEAT crossover aligned on innovation numbers. The child takes excess and
/// disjoint genes from the fitter parent, or from both on a fitness tie
/// (skipping genes that would duplicate a pair or close a cycle).
pub fn crossover(a: &Genome, b: &Genome, rng: &mut impl Rng) -> Result<Genome, EvolutionError> {
    let (fa, fb) = match (a.fitness, b.fitness) {
        (Some(fa), Some(fb)) => (fa, fb),
        _ => return Err(EvolutionError::UnevaluatedParent),
    };
    let tie = fa == fb;
    let (fit, weak) = if fb > fa { (b, a) } else { (a, b) };
    let weak_genes: BTreeMap<u64, &ConnectionGene> = weak.connections.iter().map(|c| (c.innovation, c)).collect();
    let fit_innovs: BTreeSet<u64> = fit.connections.iter().map(|c| c.innovation).collect();

    let mut child = Genome { nodes: fit.nodes.clone(), connections: Vec::new(), fitness: None };
    for c in &fit.connections {
        let gene = match weak_genes.get(&c.innovation) {
            Some(other) => {
                let mut g = if rng.gen_bool(0.5) { *c } else { **other };
                g.enabled = if !c.enabled || !other.enabled { !rng.gen_bool(INHERIT_DISABLED) } else { true };
                g
            }
            None => *c,
        };
        child.connections.push(gene);
    }
    if tie {
        for n in &weak.nodes {
            if child.node(n.id).is_none() {
                insert_node(&mut child, *n);
            }
        }
        for c in weak.connections.iter().filter(|c| !fit_innovs.contains(&c.innovation)) {
            if !child.has_pair(c.from, c.to) && !child.creates_cycle(c.from, c.to) {
                insert_connection(&mut child, *c);
            }
        }
    }
    // parents are acyclic and tie genes are checked on insert; this only guards the invariant
    prune_cycles(&mut child);
    Ok(child)
}

/// Drops connections (newest first) until the graph is acyclic.
fn prune_cycles(g: &mut Genome) {
    if g.topological_order(false).is_some() {
        return;
    }
    let mut kept: Vec<ConnectionGene> = Vec::with_capacity(g.connections.len());
    let all = std::mem::take(&mut g.connections);
    for c in all {
        g.connections = kept.clone();
        if !g.creates_cycle(c.from, c.to) {
            kept.push(c);
        }
    }
    g.connections = kept;
}

/// NEAT compatibility distance `c1*E/N + c2*D/N + c3*W`.
pub fn compatibility_distance(a: &Genome, b: &Genome, config: &EvolutionConfig) -> f64 {
    let (ca, cb) = (&a.connections, &b.connections);
    if ca.is_empty() && cb.is_empty() {
        return 0.0;
    }
    let max_a = ca.last().map(|c| c.innovation);
    let max_b = cb.last().map(|c| c.innovation);
    let (mut i, mut j) = (0, 0);
    let (mut excess, mut disjoint, mut matching, mut wdiff) = (0usize, 0usize, 0usize, 0.0);
    while i < ca.len() || j < cb.len() {
        match (ca.get(i), cb.get(j)) {
            (Some(x), Some(y)) if x.innovation == y.innovation => {
                matching += 1;
                wdiff += (x.weight - y.weight).abs();
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.innovation < y.innovation => {
                disjoint += 1;
                i += 1;
            }
            (Some(_), Some(_)) => {
                disjoint += 1;
                j += 1;
            }
            (Some(x), None) => {
                if Some(x.innovation) > max_b {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                i += 1;
            }
            (None, Some(y)) => {
                if Some(y.innovation) > max_a {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    let n = if ca.len() < 20 && cb.len() < 20 { 1.0 } else { ca.len().max(cb.len()) as f64 };
    let w = if matching == 0 { 0.0 } else { wdiff / matching as f64 };
    config.c1 * excess as f64 / n + config.c2 * disjoint as f64 / n + config.c3 * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_connections_gives_sigmoid_of_zero() {
        let g = Genome::bare(2, 3);
        assert_eq!(activate(&g, &[0.3, -1.0]).unwrap(), vec![0.5; 3]);
        assert!(matches!(activate(&g, &[1.0]), Err(EvolutionError::ArityMismatch { .. })));
    }

    #[test]
    fn single_edge() {
        let mut g = Genome::bare(1, 1);
        g.connections.push(ConnectionGene { innovation: 0, from: 0, to: 2, weight: 0.7, enabled: true });
        let y = activate(&g, &[0.4]).unwrap()[0];
        assert!((y - 1.0 / (1.0 + (-4.9f64 * 0.28).exp())).abs() < 1e-15);
    }

    #[test]
    fn add_node_on_single_connection() {
        let mut g = Genome::bare(1, 1);
        g.connections.push(ConnectionGene { innovation: 0, from: 0, to: 2, weight: 0.7, enabled: true });
        let cfg = EvolutionConfig {
            weight_mutation_rate: 0.0,
            add_connection_rate: 0.0,
            add_node_rate: 1.0,
            ..EvolutionConfig::default()
        };
        let mut reg = InnovationRegistry::after([&g]);
        let out = mutate(&mut g, &cfg, &mut reg, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(out.node_added);
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.connections.iter().filter(|c| c.enabled).count(), 2);
        assert_eq!(g.connections.iter().filter(|c| !c.enabled).count(), 1);
        g.validate().unwrap();
    }

    #[test]
    fn zero_rates_leave_genome_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Genome::fully_connected(3, 2, 1.0, &mut rng);
        let cfg = EvolutionConfig {
            weight_mutation_rate: 0.0,
            add_connection_rate: 0.0,
            add_node_rate: 0.0,
            ..EvolutionConfig::default()
        };
        let mut m = g.clone();
        mutate(&mut m, &cfg, &mut InnovationRegistry::for_layout(3, 2), &mut rng);
        assert_eq!(m, g);
    }

    #[test]
    fn same_split_in_one_generation_shares_numbers() {
        let mut reg = InnovationRegistry::for_layout(2, 1);
        let a = reg.split(0);
        assert_eq!(reg.split(0), a);
        reg.new_generation();
        assert_ne!(reg.split(0), a);
        let c = reg.connection(0, 5);
        assert_eq!(reg.connection(0, 5), c);
        assert_ne!(reg.connection(1, 5), c);
    }

    #[test]
    fn identical_weights_shift_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Genome::fully_connected(2, 2, 1.0, &mut rng);
        let mut b = a.clone();
        for c in &mut b.connections {
            c.weight += 0.3;
        }
        let cfg = EvolutionConfig::default();
        assert_eq!(compatibility_distance(&a, &a, &cfg), 0.0);
        assert!((compatibility_distance(&a, &b, &cfg) - cfg.c3 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn self_crossover_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = Genome::fully_connected(2, 1, 1.0, &mut rng);
        g.fitness = Some(1.0);
        let child = crossover(&g, &g, &mut rng).unwrap();
        assert_eq!(child.nodes, g.nodes);
        assert_eq!(child.connections, g.connections);
        let unevaluated = Genome { fitness: None, ..g.clone() };
        assert!(matches!(crossover(&g, &unevaluated, &mut rng), Err(EvolutionError::UnevaluatedParent)));
    }

    #[test]
    fn fitter_superset_parent_dictates_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let small = Genome { fitness: Some(1.0), ..Genome::fully_connected(2, 1, 1.0, &mut rng) };
        let mut big = small.clone();
        let cfg = EvolutionConfig { add_node_rate: 1.0, ..EvolutionConfig::default() };
        mutate(&mut big, &cfg, &mut InnovationRegistry::for_layout(2, 1), &mut rng);
        big.fitness = Some(2.0);
        for _ in 0..20 {
            let child = crossover(&small, &big, &mut rng).unwrap();
            let pairs = |g: &Genome| g.connections.iter().map(|c| c.innovation).collect::<Vec<_>>();
            assert_eq!(pairs(&child), pairs(&big));
        }
    }
}
