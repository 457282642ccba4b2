// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet};

use super::model::TransformationPlan;
use super::PlanError;

/// Index-level dependency graph of a plan. Unknown dependency ids are
/// skipped; validation reports them separately.
pub(crate) struct StepGraph {
    /// `deps[i]` are the indices step `i` depends on.
    pub deps: Vec<Vec<usize>>,
}

impl StepGraph {
    pub fn new(plan: &TransformationPlan) -> Self {
        let mut index = HashMap::new();
        for (i, s) in plan.steps.iter().enumerate() {
            index.entry(s.step_id.as_str()).or_insert(i);
        }
        let deps = plan
            .steps
            .iter()
            .map(|s| {
                s.depends_on
                    .iter()
                    .filter_map(|d| index.get(d.as_str()).copied())
                    .collect()
            })
            .collect();
        StepGraph { deps }
    }

    /// Stable Kahn order: among ready steps the earliest declared goes first.
    /// Returns the order, or the indices left over when a cycle blocks progress.
    pub fn order(&self) -> Result<Vec<usize>, Vec<usize>> {
        let n = self.deps.len();
        let mut indegree: Vec<usize> = self.deps.iter().map(Vec::len).collect();
        let mut dependents = vec![Vec::new(); n];
        for (i, ds) in self.deps.iter().enumerate() {
            for &d in ds {
                dependents[d].push(i);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            out.push(i);
            for &j in &dependents[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if out.len() == n {
            Ok(out)
        } else {
            let done: HashSet<usize> = out.into_iter().collect();
            Err((0..n).filter(|i| !done.contains(i)).collect())
        }
    }

    /// One concrete cycle among `stuck` nodes, in dependency order.
    pub fn find_cycle(&self, stuck: &[usize]) -> Vec<usize> {
        let stuck: HashSet<usize> = stuck.iter().copied().collect();
        let Some(&start) = stuck.iter().min() else {
            return Vec::new();
        };
        // Every stuck node has a stuck dependency; walk until a node repeats.
        let mut path = vec![start];
        let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
        let mut cur = start;
        loop {
            let next = self.deps[cur]
                .iter()
                .copied()
                .filter(|d| stuck.contains(d))
                .min()
                .expect("stuck nodes always have a stuck dependency");
            if let Some(&p) = pos.get(&next) {
                let mut cycle = path[p..].to_vec();
                cycle.reverse();
                return cycle;
            }
            pos.insert(next, path.len());
            path.push(next);
            cur = next;
        }
    }

    /// Transitive ancestors of every step.
    pub fn ancestors(&self) -> Vec<HashSet<usize>> {
        let n = self.deps.len();
        let mut memo: Vec<Option<HashSet<usize>>> = vec![None; n];
        fn visit(i: usize, deps: &[Vec<usize>], memo: &mut Vec<Option<HashSet<usize>>>, stack: &mut HashSet<usize>) -> HashSet<usize> {
            if let Some(m) = &memo[i] {
                return m.clone();
            }
            if !stack.insert(i) {
                return HashSet::new();
            }
            let mut acc = HashSet::new();
            for &d in &deps[i] {
                acc.insert(d);
                acc.extend(visit(d, deps, memo, stack));
            }
            stack.remove(&i);
            memo[i] = Some(acc.clone());
            acc
        }
        let mut stack = HashSet::new();
        (0..n).map(|i| visit(i, &self.deps, &mut memo, &mut stack)).collect()
    }
}

/// Deterministic topological order of step ids; declaration order breaks ties.
pub fn topo_order(plan: &TransformationPlan) -> Result<Vec<String>, PlanError> {
    let ids: HashSet<&str> = plan.steps.iter().map(|s| s.step_id.as_str()).collect();
    for s in &plan.steps {
        for d in &s.depends_on {
            if !ids.contains(d.as_str()) {
                return Err(PlanError::UnknownDependency {
                    step_id: s.step_id.clone(),
                    dependency: d.clone(),
                });
            }
        }
    }
    let graph = StepGraph::new(plan);
    match graph.order() {
        Ok(order) => Ok(order.into_iter().map(|i| plan.steps[i].step_id.clone()).collect()),
        Err(stuck) => Err(PlanError::Cycle(
            graph
                .find_cycle(&stuck)
                .into_iter()
                .map(|i| plan.steps[i].step_id.clone())
                .collect(),
        )),
    }
}
