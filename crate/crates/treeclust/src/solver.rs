//! Exact solver for the 0-1 path-selection problem: pick pairwise-disjoint
//! candidate clusters, at most `max_leaves` of them, jointly covering at
//! least ceil(rho * N) points, minimizing total within-cluster cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::CoverageMask;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("search aborted after exploring {explored} nodes (limit {limit})")]
    NodeLimitExceeded { explored: u64, limit: u64 },
    #[error("brute-force oracle accepts at most 25 paths, got {n_paths}")]
    OracleTooLarge { n_paths: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Immutable input to [`solve`].
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub costs: Vec<f64>,
    pub coverages: Vec<CoverageMask>,
    pub sizes: Vec<usize>,
    pub max_leaves: usize,
    pub rho: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

/// Solver output: chosen path indices (ascending) with their exact total cost.
#[derive(Debug, Clone)]
pub struct Selection {
    pub chosen: Vec<usize>,
    pub total_cost: f64,
    pub covered: CoverageMask,
    pub status: SolveStatus,
}

/// Offline dump of an instance for debugging and oracle replay.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceDump {
    pub n_points: usize,
    pub l: usize,
    pub rho: f64,
    pub paths: Vec<DumpPath>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DumpPath {
    pub cost: f64,
    pub covered_indices: Vec<usize>,
}

impl ProblemInstance {
    pub fn n_paths(&self) -> usize {
        self.costs.len()
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.costs.len() != self.coverages.len() || self.costs.len() != self.sizes.len() {
            return Err(SolverError::InvalidInstance(
                "costs, coverages and sizes must have equal length".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(SolverError::InvalidInstance(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        if self.max_leaves < 1 {
            return Err(SolverError::InvalidInstance("max_leaves must be at least 1".into()));
        }
        for (j, mask) in self.coverages.iter().enumerate() {
            let count = mask.count();
            if count != self.sizes[j] || count == 0 {
                return Err(SolverError::InvalidInstance(format!(
                    "path {j}: coverage popcount {count} vs recorded size {}",
                    self.sizes[j]
                )));
            }
            if !(self.costs[j] >= 0.0 && self.costs[j].is_finite()) {
                return Err(SolverError::InvalidInstance(format!(
                    "path {j}: cost {} must be finite and nonnegative",
                    self.costs[j]
                )));
            }
        }
        Ok(())
    }

    /// Integer coverage target ceil(rho * N). A tiny slack absorbs float
    /// noise in the product (0.8 * 30 must demand 24 points, not 25).
    pub fn required_coverage(&self) -> usize {
        let raw = (self.rho * self.n_points as f64 - 1e-9).ceil();
        (raw.max(0.0) as usize).min(self.n_points)
    }

    pub fn to_dump(&self) -> InstanceDump {
        InstanceDump {
            n_points: self.n_points,
            l: self.max_leaves,
            rho: self.rho,
            paths: self
                .costs
                .iter()
                .zip(&self.coverages)
                .map(|(&cost, mask)| DumpPath {
                    cost,
                    covered_indices: mask.ones().collect(),
                })
                .collect(),
        }
    }

    pub fn from_dump(dump: &InstanceDump) -> Self {
        let coverages: Vec<CoverageMask> = dump
            .paths
            .iter()
            .map(|p| {
                let mut m = CoverageMask::empty(dump.n_points);
                for &i in &p.covered_indices {
                    m.set(i);
                }
                m
            })
            .collect();
        let sizes = coverages.iter().map(CoverageMask::count).collect();
        Self {
            costs: dump.paths.iter().map(|p| p.cost).collect(),
            coverages,
            sizes,
            max_leaves: dump.l,
            rho: dump.rho,
            n_points: dump.n_points,
        }
    }
}

/// Total cost of a chosen set, summed in ascending index order so that every
/// code path reports bit-identical totals for the same set.
fn canonical_cost(costs: &[f64], sorted_chosen: &[usize]) -> f64 {
    sorted_chosen.iter().map(|&j| costs[j]).sum()
}

/// Lexicographic order on sorted index sets; a proper prefix sorts first, so
/// the empty set is smallest.
fn lex_less(a: &[usize], b: &[usize]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x < y;
        }
    }
    a.len() < b.len()
}

/// Incumbent tracking shared by both search modes and the oracle: replace on
/// strictly smaller canonical cost, or equal cost and lexicographically
/// smaller chosen set.
struct Incumbent {
    best: Option<(f64, Vec<usize>)>,
}

impl Incumbent {
    fn new() -> Self {
        Self { best: None }
    }

    fn offer(&mut self, costs: &[f64], chosen: &[usize]) {
        let mut sorted = chosen.to_vec();
        sorted.sort_unstable();
        let cost = canonical_cost(costs, &sorted);
        let replace = match &self.best {
            None => true,
            Some((bc, bs)) => cost < *bc || (cost == *bc && lex_less(&sorted, bs)),
        };
        if replace {
            self.best = Some((cost, sorted));
        }
    }

    /// Prune threshold: bounds above this cannot contain a new incumbent.
    /// The slack keeps equal-cost solutions alive for the lexicographic
    /// tie-break even when the running sum differs from the canonical sum in
    /// the last bits.
    fn prune_above(&self) -> f64 {
        match &self.best {
            None => f64::INFINITY,
            Some((c, _)) => c + 1e-9 * (1.0 + c.abs()),
        }
    }
}

/// Paths with identical coverage can never both be chosen; keep the cheaper
/// (then lower-index) one. Returns the surviving indices in ascending order.
fn dominance_filter(instance: &ProblemInstance) -> Vec<usize> {
    let mut best: std::collections::HashMap<&CoverageMask, usize> = std::collections::HashMap::new();
    for j in 0..instance.n_paths() {
        match best.entry(&instance.coverages[j]) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(j);
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                if instance.costs[j] < instance.costs[*e.get()] {
                    e.insert(j);
                }
            }
        }
    }
    let mut keep: Vec<usize> = best.into_values().collect();
    keep.sort_unstable();
    keep
}

struct SearchCtx<'a> {
    instance: &'a ProblemInstance,
    required: usize,
    incumbent: Incumbent,
    nodes: u64,
    node_limit: u64,
}

impl SearchCtx<'_> {
    fn tick(&mut self) -> Result<(), SolverError> {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return Err(SolverError::NodeLimitExceeded {
                explored: self.nodes,
                limit: self.node_limit,
            });
        }
        Ok(())
    }
}

/// General search: depth-first include/exclude over the active paths sorted
/// by cost density (cost per covered point), ascending. Prunes on the density
/// lower bound, on an exhausted leaf budget, and when the points still
/// coverable by the remaining suffix cannot reach the target.
struct DensitySearch<'a> {
    ctx: SearchCtx<'a>,
    order: Vec<usize>,
    suffix_min_density: Vec<f64>,
    suffix_max_size: Vec<usize>,
    suffix_coverable: Vec<CoverageMask>,
    chosen: Vec<usize>,
}

impl<'a> DensitySearch<'a> {
    fn new(ctx: SearchCtx<'a>, active: Vec<usize>) -> Self {
        let instance = ctx.instance;
        let density =
            |j: usize| -> f64 { instance.costs[j] / instance.sizes[j] as f64 };
        let mut order = active;
        order.sort_by(|&a, &b| {
            density(a)
                .partial_cmp(&density(b))
                .unwrap()
                .then(a.cmp(&b))
        });
        let m = order.len();
        let mut suffix_min_density = vec![f64::INFINITY; m + 1];
        let mut suffix_max_size = vec![0usize; m + 1];
        let mut suffix_coverable = vec![CoverageMask::empty(instance.n_points); m + 1];
        for pos in (0..m).rev() {
            let j = order[pos];
            suffix_min_density[pos] = suffix_min_density[pos + 1].min(density(j));
            suffix_max_size[pos] = suffix_max_size[pos + 1].max(instance.sizes[j]);
            let mut cov = suffix_coverable[pos + 1].clone();
            cov.union_with(&instance.coverages[j]);
            suffix_coverable[pos] = cov;
        }
        Self {
            ctx,
            order,
            suffix_min_density,
            suffix_max_size,
            suffix_coverable,
            chosen: Vec::new(),
        }
    }

    fn run(&mut self) -> Result<(), SolverError> {
        let covered = CoverageMask::empty(self.ctx.instance.n_points);
        self.walk(0, &covered, 0, 0.0)
    }

    fn walk(
        &mut self,
        pos: usize,
        covered: &CoverageMask,
        covered_count: usize,
        acc_cost: f64,
    ) -> Result<(), SolverError> {
        self.ctx.tick()?;
        let instance = self.ctx.instance;
        if covered_count >= self.ctx.required {
            self.ctx.incumbent.offer(&instance.costs, &self.chosen);
        }
        if pos == self.order.len() {
            return Ok(());
        }
        let remaining_leaves = instance.max_leaves - self.chosen.len();
        let needed = self.ctx.required.saturating_sub(covered_count);
        if needed > 0 {
            if remaining_leaves == 0 {
                return Ok(());
            }
            if needed > self.suffix_coverable[pos].count_minus(covered) {
                return Ok(());
            }
            if needed > self.suffix_max_size[pos] * remaining_leaves {
                return Ok(());
            }
            let bound = acc_cost + needed as f64 * self.suffix_min_density[pos];
            if bound > self.ctx.incumbent.prune_above() {
                return Ok(());
            }
        } else if acc_cost > self.ctx.incumbent.prune_above() {
            return Ok(());
        }

        let j = self.order[pos];
        if remaining_leaves > 0 && covered.is_disjoint(&instance.coverages[j]) {
            let mut next = covered.clone();
            next.union_with(&instance.coverages[j]);
            self.chosen.push(j);
            self.walk(
                pos + 1,
                &next,
                covered_count + instance.sizes[j],
                acc_cost + instance.costs[j],
            )?;
            self.chosen.pop();
        }
        self.walk(pos + 1, covered, covered_count, acc_cost)
    }
}

/// Deterministic greedy covers over the active paths; feasible results seed
/// the incumbent so the bounds can prune from the first node.
fn greedy_cover_solutions(instance: &ProblemInstance, active: &[usize]) -> Vec<Vec<usize>> {
    let mut solutions = Vec::new();
    // preference 0: cheapest density among paths big enough to finish the
    // cover within the remaining budget; 1: largest path, cheapest on ties
    for preference in 0..2 {
        let mut uncovered = CoverageMask::full(instance.n_points);
        let mut uncovered_count = instance.n_points;
        let mut chosen: Vec<usize> = Vec::new();
        while uncovered_count > 0 && chosen.len() < instance.max_leaves {
            let slots = instance.max_leaves - chosen.len();
            let min_size = uncovered_count.div_ceil(slots * 2).max(1);
            let mut best: Option<usize> = None;
            let mut best_filtered = false;
            for &j in active {
                if !instance.coverages[j].is_subset(&uncovered) {
                    continue;
                }
                let passes_filter = instance.sizes[j] >= min_size;
                let better = match best {
                    None => true,
                    Some(b) => {
                        if preference == 0 && passes_filter != best_filtered {
                            // prefer paths large enough to finish in budget
                            passes_filter
                        } else {
                            let (dj, db) = (
                                instance.costs[j] / instance.sizes[j] as f64,
                                instance.costs[b] / instance.sizes[b] as f64,
                            );
                            if preference == 0 {
                                dj < db || (dj == db && instance.sizes[j] > instance.sizes[b])
                            } else {
                                instance.sizes[j] > instance.sizes[b]
                                    || (instance.sizes[j] == instance.sizes[b]
                                        && instance.costs[j] < instance.costs[b])
                            }
                        }
                    }
                };
                if better {
                    best = Some(j);
                    best_filtered = passes_filter;
                }
            }
            match best {
                Some(j) => {
                    uncovered.subtract(&instance.coverages[j]);
                    uncovered_count -= instance.sizes[j];
                    chosen.push(j);
                }
                None => break,
            }
        }
        if uncovered_count == 0 {
            solutions.push(chosen);
        }
    }
    solutions
}

/// Node-capped depth-first dive for any feasible cover: branch on the point
/// with fewest candidates, try large paths first. Used as a fallback upper
/// bound when the greedy passes fail.
fn dive_for_cover(instance: &ProblemInstance, active: &[usize], node_cap: u64) -> Option<Vec<usize>> {
    let n = instance.n_points;
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &j in active {
        for i in instance.coverages[j].ones() {
            candidates[i].push(j);
        }
    }
    for cands in candidates.iter_mut() {
        cands.sort_by(|&a, &b| {
            instance.sizes[b]
                .cmp(&instance.sizes[a])
                .then(
                    instance.costs[a]
                        .partial_cmp(&instance.costs[b])
                        .unwrap(),
                )
                .then(a.cmp(&b))
        });
    }
    let max_size = active.iter().map(|&j| instance.sizes[j]).max().unwrap_or(0);

    struct Dive<'a> {
        instance: &'a ProblemInstance,
        candidates: &'a [Vec<usize>],
        max_size: usize,
        nodes: u64,
        node_cap: u64,
        chosen: Vec<usize>,
    }
    impl Dive<'_> {
        fn walk(&mut self, uncovered: &CoverageMask, uncovered_count: usize) -> bool {
            if uncovered_count == 0 {
                return true;
            }
            self.nodes += 1;
            if self.nodes > self.node_cap {
                return false;
            }
            let remaining = self.instance.max_leaves - self.chosen.len();
            if remaining == 0 || uncovered_count > remaining * self.max_size {
                return false;
            }
            let mut point = usize::MAX;
            let mut fewest = usize::MAX;
            for i in uncovered.ones() {
                if self.candidates[i].len() < fewest {
                    fewest = self.candidates[i].len();
                    point = i;
                }
            }
            for idx in 0..self.candidates[point].len() {
                let j = self.candidates[point][idx];
                if !self.instance.coverages[j].is_subset(uncovered) {
                    continue;
                }
                let mut next = uncovered.clone();
                next.subtract(&self.instance.coverages[j]);
                self.chosen.push(j);
                if self.walk(&next, uncovered_count - self.instance.sizes[j]) {
                    return true;
                }
                self.chosen.pop();
            }
            false
        }
    }

    let mut dive = Dive {
        instance,
        candidates: &candidates,
        max_size,
        nodes: 0,
        node_cap,
        chosen: Vec::new(),
    };
    let uncovered = CoverageMask::full(n);
    if dive.walk(&uncovered, n) {
        Some(dive.chosen)
    } else {
        None
    }
}

/// Result of subgradient ascent on the Lagrangian dual of the exact-cover
/// problem (coverage constraints dualized, the leaf budget kept).
struct DualInfo {
    /// Best lower bound on the optimal cost.
    bound: f64,
    /// Per-point multipliers at the best iterate.
    y: Vec<f64>,
    /// Reduced cost at the best iterate, indexed by path id (infinity for
    /// paths outside the active set).
    reduced_costs: Vec<f64>,
    /// Path ids the inner problem selected at the best iterate, and the
    /// largest selected reduced cost (0 when the budget was not exhausted).
    kept: Vec<usize>,
    kept_worst: f64,
}

/// Maximize L(y) = sum_i y_i + min over selections of at most l paths of
/// sum (cost_P - y(P)) z_P, a lower bound on the optimum for every y. The
/// inner minimum just takes the most negative reduced costs, and coverage
/// violations drive the subgradient step. Fully deterministic.
fn lagrangian_dual(instance: &ProblemInstance, active: &[usize], ub: f64) -> DualInfo {
    let n = instance.n_points;
    let l = instance.max_leaves;
    // start from the dual-feasible per-point cheapest rate
    let mut y = vec![f64::INFINITY; n];
    for &j in active {
        let rate = instance.costs[j] / instance.sizes[j] as f64;
        for i in instance.coverages[j].ones() {
            if rate < y[i] {
                y[i] = rate;
            }
        }
    }

    let mut best = DualInfo {
        bound: f64::NEG_INFINITY,
        y: y.clone(),
        reduced_costs: Vec::new(),
        kept: Vec::new(),
        kept_worst: 0.0,
    };
    let mut theta = 1.0f64;
    let mut since_improve = 0u32;
    let mut cbar = vec![0.0f64; active.len()];
    for _ in 0..80 {
        for (pos, &j) in active.iter().enumerate() {
            let mass: f64 = instance.coverages[j].ones().map(|i| y[i]).sum();
            cbar[pos] = instance.costs[j] - mass;
        }
        let mut negatives: Vec<usize> = (0..active.len()).filter(|&p| cbar[p] < 0.0).collect();
        negatives.sort_by(|&a, &b| cbar[a].partial_cmp(&cbar[b]).unwrap().then(a.cmp(&b)));
        negatives.truncate(l);
        let inner: f64 = negatives.iter().map(|&p| cbar[p]).sum();
        let bound = y.iter().sum::<f64>() + inner;

        if bound > best.bound {
            let mut by_id = vec![f64::INFINITY; instance.n_paths()];
            for (pos, &j) in active.iter().enumerate() {
                by_id[j] = cbar[pos];
            }
            best = DualInfo {
                bound,
                y: y.clone(),
                reduced_costs: by_id,
                kept_worst: if negatives.len() == l {
                    negatives.iter().map(|&p| cbar[p]).fold(f64::NEG_INFINITY, f64::max)
                } else {
                    0.0
                },
                kept: negatives.iter().map(|&p| active[p]).collect(),
            };
            since_improve = 0;
        } else {
            since_improve += 1;
            if since_improve >= 8 {
                theta *= 0.5;
                since_improve = 0;
            }
        }

        // coverage violation subgradient
        let mut g = vec![1.0f64; n];
        for &p in &negatives {
            for i in instance.coverages[active[p]].ones() {
                g[i] -= 1.0;
            }
        }
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2 == 0.0 {
            break; // the inner selection is itself an exact cover
        }
        let gap = (ub - bound).max(1e-12);
        let step = theta * gap / gnorm2;
        for i in 0..n {
            y[i] += step * g[i];
        }
    }
    best
}

/// Reduced-cost variable fixing: forcing a path with a large reduced cost
/// into the selection provably exceeds the incumbent, so it can be removed
/// outright. Kept inner-selection paths are never fixed.
fn fix_variables(active: Vec<usize>, dual: &DualInfo, ub: f64) -> Vec<usize> {
    let guard = 1e-9 * (1.0 + ub.abs());
    let kept: std::collections::HashSet<usize> = dual.kept.iter().copied().collect();
    active
        .into_iter()
        .filter(|&j| {
            kept.contains(&j) || dual.bound + dual.reduced_costs[j] - dual.kept_worst <= ub + guard
        })
        .collect()
}

/// Improve a feasible cover by repeatedly splitting one of its clusters into
/// two candidate paths that partition it exactly (the complement is found by
/// coverage-mask lookup). Splitting weakly reduces within-cluster cost, so
/// this walks a known cover toward the leaf budget. Deterministic.
fn refine_by_splitting(
    instance: &ProblemInstance,
    active: &[usize],
    start: &[usize],
) -> Vec<usize> {
    let mut mask_to_path: std::collections::HashMap<&CoverageMask, usize> =
        std::collections::HashMap::new();
    for &j in active {
        mask_to_path.insert(&instance.coverages[j], j);
    }
    let mut current: Vec<usize> = start.to_vec();
    while current.len() < instance.max_leaves {
        // (delta, position, replacement pair)
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (pos, &c) in current.iter().enumerate() {
            let c_cov = &instance.coverages[c];
            for &a in active {
                if instance.sizes[a] >= instance.sizes[c]
                    || !instance.coverages[a].is_subset(c_cov)
                {
                    continue;
                }
                let mut complement = c_cov.clone();
                complement.subtract(&instance.coverages[a]);
                let Some(&b) = mask_to_path.get(&complement) else {
                    continue;
                };
                if b <= a {
                    continue; // each unordered pair once
                }
                let delta = instance.costs[a] + instance.costs[b] - instance.costs[c];
                let better = match &best {
                    None => delta < -1e-12,
                    Some((bd, bp, ba, _)) => {
                        delta < *bd
                            || (delta == *bd && (pos, a) < (*bp, *ba))
                    }
                };
                if better {
                    best = Some((delta, pos, a, b));
                }
            }
        }
        match best {
            Some((_, pos, a, b)) => {
                current[pos] = a;
                current.push(b);
            }
            None => break,
        }
    }
    current
}

/// Per-point candidate lists over the active paths, each sorted ascending by
/// `order_score` (ties: larger coverage, then lower index). None when some
/// point has no covering path.
fn build_candidates(
    instance: &ProblemInstance,
    active: &[usize],
    order_score: &[f64],
) -> Option<Vec<Vec<usize>>> {
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); instance.n_points];
    for &j in active {
        for i in instance.coverages[j].ones() {
            candidates[i].push(j);
        }
    }
    for cands in candidates.iter_mut() {
        if cands.is_empty() {
            return None;
        }
        cands.sort_by(|&a, &b| {
            order_score[a]
                .partial_cmp(&order_score[b])
                .unwrap()
                .then(instance.sizes[b].cmp(&instance.sizes[a]))
                .then(a.cmp(&b))
        });
    }
    Some(candidates)
}

/// Deterministic beam search for a cheap exact cover: at each level every
/// kept state branches on its most constrained uncovered point, trying the
/// best-scored candidates. Purely a heuristic for priming the incumbent.
fn beam_probe(
    instance: &ProblemInstance,
    candidates: &[Vec<usize>],
    point_value: &[f64],
) -> Option<Vec<usize>> {
    const WIDTH: usize = 48;
    const FANOUT: usize = 32;

    struct State {
        uncovered: CoverageMask,
        count: usize,
        cost: f64,
        chosen: Vec<usize>,
        score: f64,
    }

    let full_value: f64 = point_value.iter().sum();
    let mut states = vec![State {
        uncovered: CoverageMask::full(instance.n_points),
        count: instance.n_points,
        cost: 0.0,
        chosen: Vec::new(),
        score: full_value,
    }];
    let mut best: Option<(f64, Vec<usize>)> = None;

    for _level in 0..instance.max_leaves {
        let mut next: Vec<State> = Vec::new();
        for state in &states {
            let mut point = usize::MAX;
            let mut fewest = usize::MAX;
            for i in state.uncovered.ones() {
                if candidates[i].len() < fewest {
                    fewest = candidates[i].len();
                    point = i;
                }
            }
            let mut taken = 0;
            for &j in &candidates[point] {
                if taken == FANOUT {
                    break;
                }
                if !instance.coverages[j].is_subset(&state.uncovered) {
                    continue;
                }
                taken += 1;
                let mut uncovered = state.uncovered.clone();
                uncovered.subtract(&instance.coverages[j]);
                let count = state.count - instance.sizes[j];
                let cost = state.cost + instance.costs[j];
                let mut chosen = state.chosen.clone();
                chosen.push(j);
                if count == 0 {
                    let better = match &best {
                        None => true,
                        Some((c, _)) => cost < *c,
                    };
                    if better {
                        best = Some((cost, chosen));
                    }
                    continue;
                }
                let remaining: f64 = uncovered.ones().map(|i| point_value[i]).sum();
                next.push(State {
                    uncovered,
                    count,
                    cost,
                    chosen,
                    score: cost + remaining,
                });
            }
        }
        next.sort_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap()
                .then(a.chosen.cmp(&b.chosen))
        });
        next.truncate(WIDTH);
        if next.is_empty() {
            break;
        }
        states = next;
    }
    best.map(|(_, chosen)| chosen)
}

/// Exact-cover search used when the target is full coverage: every point must
/// end up in exactly one chosen path, so the search branches on an uncovered
/// point and tries each candidate path that covers it. Branches are disjoint
/// (two paths covering the same point can never be chosen together), so every
/// feasible selection is visited exactly once.
///
/// Pruning combines three completion bounds, each sound against any
/// completion that partitions the uncovered set with the remaining budget r:
///
/// * Budget-penalized rate rows. For a penalty lambda >= 0 put
///   y_i = min over paths P covering i of (cost_P + lambda) / size_P; then
///   the completion costs at least sum_{i uncovered} y_i - r * lambda, since
///   each chosen path pays its points' rates minus one lambda. Zero-cost
///   singleton paths cap the plain rate at zero, but with lambda > 0 they
///   charge lambda per point while the -r*lambda term refunds only r of them.
/// * A Lagrangian row from the subgradient dual: the completion costs at
///   least sum_{i uncovered} y*_i + r * min(0, min reduced cost).
/// * Chain bound: sorted by size, the k-th largest completion path covers at
///   least ceil((u - k*max_size) / (r - k)) points, and a path covering at
///   least s points costs at least min_cost_by_size[s].
///
/// Every row keeps a per-path mass vector so a node update is O(rows).
struct CoverSearch<'a> {
    ctx: SearchCtx<'a>,
    /// Candidate paths per point, sorted by (density, size desc, index).
    candidates: Vec<Vec<usize>>,
    /// Per bound row: budget coefficient (bound = row_sum + r * coef).
    row_coef: Vec<f64>,
    /// Per bound row, per path: sum of that row's per-point values.
    row_mass: Vec<Vec<f64>>,
    /// Per bound row: current sum over uncovered points.
    row_sum: Vec<f64>,
    /// min_cost_by_size[s]: cheapest cost among paths covering >= s points.
    min_cost_by_size: Vec<f64>,
    max_size: usize,
    chosen: Vec<usize>,
    /// Probing mode: stop quietly (keeping the incumbent) past this many
    /// nodes instead of erroring.
    soft_cap: Option<u64>,
    soft_stopped: bool,
}

impl<'a> CoverSearch<'a> {
    /// Returns None if some point is covered by no active path (infeasible).
    /// Candidates are ordered by `order_score` (reduced costs when the dual
    /// ran, densities otherwise): most promising first.
    fn new(
        ctx: SearchCtx<'a>,
        active: &[usize],
        dual_row: Option<(&[f64], f64)>,
        order_score: &[f64],
    ) -> Option<Self> {
        let instance = ctx.instance;
        let n = instance.n_points;
        let candidates = build_candidates(instance, active, order_score)?;

        let max_cost = active
            .iter()
            .map(|&j| instance.costs[j])
            .fold(0.0f64, f64::max);
        let mut lambdas = vec![0.0];
        if max_cost > 0.0 {
            // geometric grid over four decades up to the largest path cost
            let mut lam = max_cost * 1e-4;
            while lam <= max_cost * 1.0001 {
                lambdas.push(lam);
                lam *= 2.0;
            }
        }

        // per-row per-point values; lambda rows first, dual row last
        let mut point_values: Vec<Vec<f64>> = Vec::new();
        let mut row_coef: Vec<f64> = Vec::new();
        for &lam in &lambdas {
            let mut y = vec![f64::INFINITY; n];
            for &j in active {
                let rate = (instance.costs[j] + lam) / instance.sizes[j] as f64;
                for i in instance.coverages[j].ones() {
                    if rate < y[i] {
                        y[i] = rate;
                    }
                }
            }
            point_values.push(y);
            row_coef.push(-lam);
        }
        if let Some((y_star, min_cbar)) = dual_row {
            point_values.push(y_star.to_vec());
            row_coef.push(min_cbar.min(0.0));
        }

        let row_mass: Vec<Vec<f64>> = point_values
            .iter()
            .map(|values| {
                (0..instance.n_paths())
                    .map(|j| instance.coverages[j].ones().map(|i| values[i]).sum())
                    .collect()
            })
            .collect();
        let row_sum: Vec<f64> = point_values.iter().map(|v| v.iter().sum()).collect();

        let max_size = active.iter().map(|&j| instance.sizes[j]).max().unwrap_or(0);
        let mut min_cost_by_size = vec![f64::INFINITY; max_size + 1];
        for &j in active {
            let s = instance.sizes[j];
            if instance.costs[j] < min_cost_by_size[s] {
                min_cost_by_size[s] = instance.costs[j];
            }
        }
        for s in (1..max_size).rev() {
            if min_cost_by_size[s + 1] < min_cost_by_size[s] {
                min_cost_by_size[s] = min_cost_by_size[s + 1];
            }
        }

        Some(Self {
            ctx,
            candidates,
            row_coef,
            row_mass,
            row_sum,
            min_cost_by_size,
            max_size,
            chosen: Vec::new(),
            soft_cap: None,
            soft_stopped: false,
        })
    }

    fn chain_bound(&self, uncovered_count: usize, remaining_leaves: usize) -> f64 {
        let mut bound = 0.0;
        let mut need = uncovered_count as isize;
        for k in 0..remaining_leaves {
            if need <= 0 {
                break;
            }
            let slots = (remaining_leaves - k) as isize;
            let at_least = ((need + slots - 1) / slots) as usize;
            bound += self.min_cost_by_size[at_least.min(self.max_size)];
            need -= self.max_size as isize;
        }
        bound
    }

    fn completion_bound(&self, uncovered_count: usize, remaining_leaves: usize) -> f64 {
        let r = remaining_leaves as f64;
        let rows = self
            .row_sum
            .iter()
            .zip(&self.row_coef)
            .map(|(sum, coef)| sum + r * coef)
            .fold(0.0f64, f64::max);
        rows.max(self.chain_bound(uncovered_count, remaining_leaves))
    }

    fn run(&mut self) -> Result<(), SolverError> {
        let uncovered = CoverageMask::full(self.ctx.instance.n_points);
        self.walk(&uncovered, self.ctx.instance.n_points, 0.0)
    }

    fn walk(
        &mut self,
        uncovered: &CoverageMask,
        uncovered_count: usize,
        acc_cost: f64,
    ) -> Result<(), SolverError> {
        if self.soft_stopped {
            return Ok(());
        }
        if let Some(cap) = self.soft_cap {
            if self.ctx.nodes >= cap {
                self.soft_stopped = true;
                return Ok(());
            }
        }
        self.ctx.tick()?;
        let instance = self.ctx.instance;
        if uncovered_count == 0 {
            self.ctx.incumbent.offer(&instance.costs, &self.chosen);
            return Ok(());
        }
        let remaining_leaves = instance.max_leaves - self.chosen.len();
        if remaining_leaves == 0 || uncovered_count > remaining_leaves * self.max_size {
            return Ok(());
        }
        let threshold = self.ctx.incumbent.prune_above();
        if acc_cost + self.completion_bound(uncovered_count, remaining_leaves) > threshold {
            return Ok(());
        }

        // Branch on the uncovered point with the fewest candidate paths.
        let mut point = usize::MAX;
        let mut fewest = usize::MAX;
        for i in uncovered.ones() {
            let deg = self.candidates[i].len();
            if deg < fewest {
                fewest = deg;
                point = i;
            }
        }

        for idx in 0..self.candidates[point].len() {
            let j = self.candidates[point][idx];
            if !instance.coverages[j].is_subset(uncovered) {
                continue;
            }
            let mut next = uncovered.clone();
            next.subtract(&instance.coverages[j]);
            self.chosen.push(j);
            for g in 0..self.row_sum.len() {
                self.row_sum[g] -= self.row_mass[g][j];
            }
            self.walk(
                &next,
                uncovered_count - instance.sizes[j],
                acc_cost + instance.costs[j],
            )?;
            for g in 0..self.row_sum.len() {
                self.row_sum[g] += self.row_mass[g][j];
            }
            self.chosen.pop();
        }
        Ok(())
    }
}

fn hint_is_feasible(instance: &ProblemInstance, required: usize, chosen: &[usize]) -> bool {
    if chosen.len() > instance.max_leaves {
        return false;
    }
    let mut covered = CoverageMask::empty(instance.n_points);
    for &j in chosen {
        if j >= instance.n_paths() || !covered.is_disjoint(&instance.coverages[j]) {
            return false;
        }
        covered.union_with(&instance.coverages[j]);
    }
    covered.count() >= required
}

fn finish(instance: &ProblemInstance, incumbent: Incumbent) -> Selection {
    match incumbent.best {
        Some((cost, chosen)) => {
            let mut covered = CoverageMask::empty(instance.n_points);
            for &j in &chosen {
                covered.union_with(&instance.coverages[j]);
            }
            Selection {
                chosen,
                total_cost: cost,
                covered,
                status: SolveStatus::Optimal,
            }
        }
        None => Selection {
            chosen: Vec::new(),
            total_cost: 0.0,
            covered: CoverageMask::empty(instance.n_points),
            status: SolveStatus::Infeasible,
        },
    }
}

/// Provably optimal selection, or `Infeasible` when no subset of at most
/// `max_leaves` disjoint paths reaches the coverage target. Among optima the
/// lexicographically smallest chosen-index set is returned. Exceeding
/// `node_limit` aborts with an error, reported distinctly from infeasibility.
pub fn solve(instance: &ProblemInstance, node_limit: Option<u64>) -> Result<Selection, SolverError> {
    solve_with_hint(instance, node_limit, None)
}

/// [`solve`] seeded with a known-feasible selection (for example the optimum
/// of a smaller leaf budget). The hint only primes the incumbent; the result
/// is identical to an unseeded solve.
pub fn solve_with_hint(
    instance: &ProblemInstance,
    node_limit: Option<u64>,
    hint: Option<&[usize]>,
) -> Result<Selection, SolverError> {
    instance.validate()?;
    let required = instance.required_coverage();
    let mut active = dominance_filter(instance);
    let mut incumbent = Incumbent::new();
    if let Some(chosen) = hint {
        if hint_is_feasible(instance, required, chosen) {
            incumbent.offer(&instance.costs, chosen);
        }
    }

    let exact_cover = required == instance.n_points && instance.n_points > 0;
    let node_limit = node_limit.unwrap_or(u64::MAX);

    if !exact_cover {
        let ctx = SearchCtx {
            instance,
            required,
            incumbent,
            nodes: 0,
            node_limit,
        };
        let mut search = DensitySearch::new(ctx, active);
        search.run()?;
        return Ok(finish(instance, search.ctx.incumbent));
    }

    // Exact cover: alternate dual ascent with reduced-cost fixing and short
    // probing searches. A better incumbent tightens the fixing threshold, a
    // smaller active set tightens the dual, so the rounds reinforce each
    // other; the final search then runs uncapped on the reduced set.
    for solution in greedy_cover_solutions(instance, &active) {
        incumbent.offer(&instance.costs, &solution);
    }
    if incumbent.best.is_none() {
        // the greedy passes got stuck; look for any feasible cover
        if let Some(solution) = dive_for_cover(instance, &active, 200_000) {
            incumbent.offer(&instance.costs, &solution);
        }
    }
    if let Some((_, chosen)) = &incumbent.best {
        let refined = refine_by_splitting(instance, &active, &chosen.clone());
        incumbent.offer(&instance.costs, &refined);
    }

    let debug = std::env::var_os("TREECLUST_SOLVER_DEBUG").is_some();
    let mut dual_store: Option<DualInfo> = None;
    let mut nodes_used: u64 = 0;
    const ROUNDS: usize = 4;
    const PROBE_NODES: u64 = 150_000;

    for round in 0..ROUNDS {
        let Some((ub, _)) = &incumbent.best else {
            break; // no feasible solution known; nothing to fix against
        };
        let ub = *ub;
        let dual = lagrangian_dual(instance, &active, ub);
        let before = active.len();
        active = fix_variables(active, &dual, ub);
        if debug {
            eprintln!(
                "l={} round={} ub={:.4} dual={:.4} gap={:.1}% active {} -> {}",
                instance.max_leaves,
                round,
                ub,
                dual.bound,
                100.0 * (ub - dual.bound) / ub.max(1e-12),
                before,
                active.len()
            );
        }
        dual_store = Some(dual);
        if round + 1 == ROUNDS {
            break;
        }
        let dual_ref = dual_store.as_ref().unwrap();

        // cheap wide probe guided by the dual values
        if let Some(candidates) = build_candidates(instance, &active, &dual_ref.reduced_costs) {
            if let Some(solution) = beam_probe(instance, &candidates, &dual_ref.y) {
                let refined = refine_by_splitting(instance, &active, &solution);
                incumbent.offer(&instance.costs, &solution);
                incumbent.offer(&instance.costs, &refined);
            }
        }
        if let Some((_, chosen)) = &incumbent.best {
            let refined = refine_by_splitting(instance, &active, &chosen.clone());
            incumbent.offer(&instance.costs, &refined);
        }
        // deeper capped probe once fixing has thinned the candidates
        if active.len() <= 25_000 {
            let ctx = SearchCtx {
                instance,
                required,
                incumbent,
                nodes: nodes_used,
                node_limit,
            };
            let min_cbar = active.iter().map(|&j| dual_ref.reduced_costs[j]).fold(0.0f64, f64::min);
            match CoverSearch::new(
                ctx,
                &active,
                Some((dual_ref.y.as_slice(), min_cbar)),
                &dual_ref.reduced_costs,
            ) {
                Some(mut search) => {
                    search.soft_cap = Some(nodes_used + PROBE_NODES);
                    search.run()?;
                    nodes_used = search.ctx.nodes;
                    incumbent = search.ctx.incumbent;
                    if !search.soft_stopped {
                        // the probe ran to completion: optimality over the
                        // active set is already proven
                        return Ok(finish(instance, incumbent));
                    }
                }
                None => return Ok(finish(instance, Incumbent::new())),
            }
        }
        let improved = match (&incumbent.best, ub) {
            (Some((new_ub, _)), old) => *new_ub < old,
            _ => false,
        };
        if debug {
            eprintln!(
                "l={} probe round={} nodes={} improved={} new_ub={:?}",
                instance.max_leaves,
                round,
                nodes_used,
                improved,
                incumbent.best.as_ref().map(|(c, s)| (*c, s.len()))
            );
        }
        if !improved {
            break; // further rounds would fix against the same bound
        }
    }

    let ctx = SearchCtx {
        instance,
        required,
        incumbent,
        nodes: nodes_used,
        node_limit,
    };
    let dual_row = dual_store.as_ref().map(|d| {
        let min_cbar = active.iter().map(|&j| d.reduced_costs[j]).fold(0.0f64, f64::min);
        (d.y.as_slice(), min_cbar)
    });
    let order_score: Vec<f64> = match &dual_store {
        Some(d) => d.reduced_costs.clone(),
        None => (0..instance.n_paths())
            .map(|j| instance.costs[j] / instance.sizes[j] as f64)
            .collect(),
    };
    let incumbent = match CoverSearch::new(ctx, &active, dual_row, &order_score) {
        Some(mut search) => {
            search.run()?;
            search.ctx.incumbent
        }
        // a point with no covering path at all: infeasible (fixing never
        // removes a point's last optimal candidate, so this only occurs
        // when no feasible solution exists and no incumbent was primed)
        None => Incumbent::new(),
    };
    Ok(finish(instance, incumbent))
}

/// Exhaustive oracle over all subsets satisfying the constraints; same
/// optimality and tie-break contract as [`solve`]. Enforced small.
pub fn brute_force_solve(instance: &ProblemInstance) -> Result<Selection, SolverError> {
    instance.validate()?;
    if instance.n_paths() > 25 {
        return Err(SolverError::OracleTooLarge {
            n_paths: instance.n_paths(),
        });
    }
    let required = instance.required_coverage();
    let mut incumbent = Incumbent::new();
    let mut chosen: Vec<usize> = Vec::new();

    fn rec(
        instance: &ProblemInstance,
        required: usize,
        j: usize,
        chosen: &mut Vec<usize>,
        covered: &CoverageMask,
        covered_count: usize,
        incumbent: &mut Incumbent,
    ) {
        if j == instance.n_paths() {
            if covered_count >= required {
                incumbent.offer(&instance.costs, chosen);
            }
            return;
        }
        if chosen.len() < instance.max_leaves && covered.is_disjoint(&instance.coverages[j]) {
            let mut next = covered.clone();
            next.union_with(&instance.coverages[j]);
            chosen.push(j);
            rec(
                instance,
                required,
                j + 1,
                chosen,
                &next,
                covered_count + instance.sizes[j],
                incumbent,
            );
            chosen.pop();
        }
        rec(instance, required, j + 1, chosen, covered, covered_count, incumbent);
    }

    let covered = CoverageMask::empty(instance.n_points);
    rec(instance, required, 0, &mut chosen, &covered, 0, &mut incumbent);
    Ok(finish(instance, incumbent))
}

/// Re-check every constraint and the reported cost from scratch.
pub fn verify(instance: &ProblemInstance, selection: &Selection) -> bool {
    if selection.chosen.len() > instance.max_leaves {
        return false;
    }
    let mut covered = CoverageMask::empty(instance.n_points);
    for &j in &selection.chosen {
        if j >= instance.n_paths() || !covered.is_disjoint(&instance.coverages[j]) {
            return false;
        }
        covered.union_with(&instance.coverages[j]);
    }
    if covered.count() < instance.required_coverage() {
        return false;
    }
    if covered != selection.covered {
        return false;
    }
    let mut sorted = selection.chosen.clone();
    sorted.sort_unstable();
    canonical_cost(&instance.costs, &sorted) == selection.total_cost
}

/// Root-level lower bound on the optimal cost; used to check bound soundness
/// against the oracle.
pub fn lower_bound(instance: &ProblemInstance) -> f64 {
    let required = instance.required_coverage();
    if required == 0 {
        return 0.0;
    }
    let density = |j: usize| -> f64 { instance.costs[j] / instance.sizes[j] as f64 };
    if required == instance.n_points {
        // per-point cheapest rate
        let mut total = 0.0;
        for i in 0..instance.n_points {
            let rate = (0..instance.n_paths())
                .filter(|&j| instance.coverages[j].contains(i))
                .map(density)
                .fold(f64::INFINITY, f64::min);
            if rate == f64::INFINITY {
                return f64::INFINITY; // uncoverable point
            }
            total += rate;
        }
        total
    } else {
        let min_density = (0..instance.n_paths())
            .map(density)
            .fold(f64::INFINITY, f64::min);
        if min_density == f64::INFINITY {
            return f64::INFINITY;
        }
        required as f64 * min_density
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(n: usize, bits: &[usize]) -> CoverageMask {
        let mut m = CoverageMask::empty(n);
        for &b in bits {
            m.set(b);
        }
        m
    }

    fn instance(n: usize, paths: &[(f64, &[usize])], l: usize, rho: f64) -> ProblemInstance {
        let coverages: Vec<CoverageMask> = paths.iter().map(|(_, pts)| mask(n, pts)).collect();
        let sizes = coverages.iter().map(CoverageMask::count).collect();
        ProblemInstance {
            costs: paths.iter().map(|(c, _)| *c).collect(),
            coverages,
            sizes,
            max_leaves: l,
            rho,
            n_points: n,
        }
    }

    // N=4: A covers {0,1} cost 1, B covers {2,3} cost 2, C covers all cost 10
    fn abc() -> Vec<(f64, Vec<usize>)> {
        vec![
            (1.0, vec![0, 1]),
            (2.0, vec![2, 3]),
            (10.0, vec![0, 1, 2, 3]),
        ]
    }

    #[test]
    fn two_small_paths_beat_the_big_one() {
        let owned = abc();
        let paths: Vec<(f64, &[usize])> = owned.iter().map(|(c, p)| (*c, p.as_slice())).collect();
        let inst = instance(4, &paths, 2, 1.0);
        for sel in [solve(&inst, None).unwrap(), brute_force_solve(&inst).unwrap()] {
            assert_eq!(sel.status, SolveStatus::Optimal);
            assert_eq!(sel.chosen, vec![0, 1]);
            assert_eq!(sel.total_cost, 3.0);
            assert!(verify(&inst, &sel));
        }
    }

    #[test]
    fn single_leaf_forces_the_big_path() {
        let owned = abc();
        let paths: Vec<(f64, &[usize])> = owned.iter().map(|(c, p)| (*c, p.as_slice())).collect();
        let inst = instance(4, &paths, 1, 1.0);
        for sel in [solve(&inst, None).unwrap(), brute_force_solve(&inst).unwrap()] {
            assert_eq!(sel.chosen, vec![2]);
            assert_eq!(sel.total_cost, 10.0);
        }
    }

    #[test]
    fn overlapping_pair_is_infeasible() {
        let inst = instance(3, &[(1.0, &[0, 1]), (1.0, &[1, 2])], 2, 1.0);
        for sel in [solve(&inst, None).unwrap(), brute_force_solve(&inst).unwrap()] {
            assert_eq!(sel.status, SolveStatus::Infeasible);
            assert!(sel.chosen.is_empty());
        }
    }

    #[test]
    fn zero_rho_selects_nothing() {
        let inst = instance(3, &[(0.0, &[0]), (1.0, &[1, 2])], 2, 0.0);
        for sel in [solve(&inst, None).unwrap(), brute_force_solve(&inst).unwrap()] {
            assert_eq!(sel.status, SolveStatus::Optimal);
            assert!(sel.chosen.is_empty());
            assert_eq!(sel.total_cost, 0.0);
        }
    }

    #[test]
    fn single_covering_path_is_the_unique_solution() {
        let inst = instance(3, &[(4.0, &[0, 1, 2])], 1, 1.0);
        let sel = brute_force_solve(&inst).unwrap();
        assert_eq!(sel.chosen, vec![0]);
        assert_eq!(solve(&inst, None).unwrap().chosen, vec![0]);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let paths: Vec<(f64, Vec<usize>)> = (0..26).map(|i| (1.0, vec![i % 4])).collect();
        let refs: Vec<(f64, &[usize])> = paths.iter().map(|(c, p)| (*c, p.as_slice())).collect();
        let inst = instance(4, &refs, 2, 0.5);
        assert!(matches!(
            brute_force_solve(&inst),
            Err(SolverError::OracleTooLarge { n_paths: 26 })
        ));
    }

    #[test]
    fn verify_rejects_overlap_and_excess_leaves() {
        let inst = instance(3, &[(1.0, &[0, 1]), (1.0, &[1, 2])], 2, 0.5);
        let overlapping = Selection {
            chosen: vec![0, 1],
            total_cost: 2.0,
            covered: mask(3, &[0, 1, 2]),
            status: SolveStatus::Optimal,
        };
        assert!(!verify(&inst, &overlapping));

        let inst2 = instance(3, &[(1.0, &[0]), (1.0, &[1]), (1.0, &[2])], 2, 0.5);
        let too_many = Selection {
            chosen: vec![0, 1, 2],
            total_cost: 3.0,
            covered: mask(3, &[0, 1, 2]),
            status: SolveStatus::Optimal,
        };
        assert!(!verify(&inst2, &too_many));
    }

    #[test]
    fn partial_coverage_drops_the_outlier() {
        // rho = 0.9 over 10 points: covering the outlier would cost extra
        let inst = instance(
            10,
            &[
                (0.5, &[0, 1, 2, 3, 4]),
                (0.5, &[5, 6, 7, 8]),
                (9.0, &[9]),
            ],
            3,
            0.9,
        );
        let sel = solve(&inst, None).unwrap();
        assert_eq!(sel.chosen, vec![0, 1]);
        assert_eq!(sel.covered.count(), 9);
        assert_eq!(brute_force_solve(&inst).unwrap().chosen, vec![0, 1]);
    }

    #[test]
    fn full_coverage_yields_exact_partition() {
        let inst = instance(
            6,
            &[
                (1.0, &[0, 1]),
                (1.5, &[2, 3]),
                (0.5, &[4, 5]),
                (2.0, &[0, 1, 2, 3]),
                (0.0, &[3]),
            ],
            3,
            1.0,
        );
        let sel = solve(&inst, None).unwrap();
        assert_eq!(sel.status, SolveStatus::Optimal);
        assert_eq!(sel.covered.count(), 6);
        let mut union = CoverageMask::empty(6);
        for &j in &sel.chosen {
            assert!(union.is_disjoint(&inst.coverages[j]));
            union.union_with(&inst.coverages[j]);
        }
        assert_eq!(union, CoverageMask::full(6));
        assert_eq!(sel.chosen, brute_force_solve(&inst).unwrap().chosen);
    }

    #[test]
    fn node_limit_aborts_distinctly() {
        let paths: Vec<(f64, Vec<usize>)> =
            (0..12).map(|i| (1.0 + i as f64, vec![i, (i + 1) % 12])).collect();
        let refs: Vec<(f64, &[usize])> = paths.iter().map(|(c, p)| (*c, p.as_slice())).collect();
        let inst = instance(12, &refs, 5, 0.8);
        assert!(matches!(
            solve(&inst, Some(3)),
            Err(SolverError::NodeLimitExceeded { .. })
        ));
    }

    #[test]
    fn dominated_duplicate_coverage_never_chosen() {
        // paths 0 and 2 cover the same points; 2 is cheaper and must win
        let inst = instance(4, &[(5.0, &[0, 1]), (1.0, &[2, 3]), (2.0, &[0, 1])], 2, 1.0);
        let sel = solve(&inst, None).unwrap();
        assert_eq!(sel.chosen, vec![1, 2]);
        assert_eq!(sel.total_cost, 3.0);
        assert_eq!(brute_force_solve(&inst).unwrap().chosen, vec![1, 2]);
    }

    #[test]
    fn equal_cost_ties_break_lexicographically() {
        // two disjoint pairs with identical costs in either order
        let inst = instance(
            4,
            &[(1.0, &[0, 1]), (1.0, &[2, 3]), (1.0, &[0, 2]), (1.0, &[1, 3])],
            2,
            1.0,
        );
        let sel = solve(&inst, None).unwrap();
        let oracle = brute_force_solve(&inst).unwrap();
        assert_eq!(sel.chosen, vec![0, 1]);
        assert_eq!(oracle.chosen, vec![0, 1]);
    }

    #[test]
    fn monotone_in_leaves_and_rho() {
        let paths: Vec<(f64, Vec<usize>)> = vec![
            (3.0, vec![0, 1, 2]),
            (1.0, vec![3, 4]),
            (2.5, vec![0, 1]),
            (1.5, vec![2, 3, 4]),
            (0.5, vec![2]),
        ];
        let refs: Vec<(f64, &[usize])> = paths.iter().map(|(c, p)| (*c, p.as_slice())).collect();
        let mut last = f64::INFINITY;
        for l in 2..=4 {
            let inst = instance(5, &refs, l, 1.0);
            let sel = solve(&inst, None).unwrap();
            assert_eq!(sel.status, SolveStatus::Optimal);
            assert!(sel.total_cost <= last + 1e-12);
            last = sel.total_cost;
        }
        let tight = solve(&instance(5, &refs, 2, 1.0), None).unwrap();
        let loose = solve(&instance(5, &refs, 2, 0.6), None).unwrap();
        assert!(loose.total_cost <= tight.total_cost);
    }

    #[test]
    fn instance_dump_round_trip() {
        let paths: Vec<(f64, &[usize])> = vec![(1.25, &[0, 2]), (0.0, &[1])];
        let inst = instance(3, &paths, 2, 1.0);
        let json = serde_json::to_string(&inst.to_dump()).unwrap();
        let replay = ProblemInstance::from_dump(&serde_json::from_str(&json).unwrap());
        let a = solve(&inst, None).unwrap();
        let b = solve(&replay, None).unwrap();
        assert_eq!(a.chosen, b.chosen);
        assert_eq!(a.total_cost, b.total_cost);
    }

    #[test]
    fn solve_is_deterministic() {
        let paths: Vec<(f64, Vec<usize>)> = vec![
            (1.0, vec![0, 1]),
            (1.0, vec![2, 3]),
            (1.0, vec![0, 2]),
            (0.0, vec![4]),
            (2.0, vec![3, 4]),
        ];
        let refs: Vec<(f64, &[usize])> = paths.iter().map(|(c, p)| (*c, p.as_slice())).collect();
        let inst = instance(5, &refs, 3, 1.0);
        let a = solve(&inst, None).unwrap();
        let b = solve(&inst, None).unwrap();
        assert_eq!(a.chosen, b.chosen);
        assert_eq!(a.total_cost, b.total_cost);
    }
}
