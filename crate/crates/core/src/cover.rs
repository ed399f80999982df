//! Exact weighted set partitioning with lower-bounded side constraints.
//!
//! Maximizes `sum(weights[p] * x[p])` over 0/1 selections `x` that cover every
//! element exactly once and satisfy `sum(side.weights[p] * x[p]) >= side.lower_bound`
//! for each side constraint. Depth-first branch and bound: branch on the
//! uncovered element with the fewest candidates, bound each subtree with the
//! memoized optimum of the unconstrained cover of the remaining elements (one
//! table per weight vector). Among optimal selections the lexicographically
//! smallest sorted index list is returned.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_ELEMENTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverError {
    #[error("{0} elements exceed the supported {MAX_ELEMENTS}")]
    TooManyElements(usize),
    #[error("candidate {0} is empty or names an element out of range")]
    BadCandidate(usize),
    #[error("weight vector length {got} does not match {expected} candidates")]
    LengthMismatch { expected: usize, got: usize },
    #[error("element {0} is not covered by any candidate")]
    Uncovered(usize),
    #[error("no selection satisfies the partition and side constraints")]
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideConstraint {
    pub weights: Vec<i64>,
    pub lower_bound: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverProblem {
    pub n_elements: usize,
    /// Element sets as bitmasks over `0..n_elements`.
    pub candidates: Vec<u64>,
    pub weights: Vec<i64>,
    pub side: Vec<SideConstraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverSolution {
    /// Selected candidate indices, ascending.
    pub selected: Vec<usize>,
    pub objective: i64,
    pub side_values: Vec<i64>,
    pub nodes: u64,
}

impl CoverProblem {
    pub fn new(n_elements: usize, candidates: Vec<u64>, weights: Vec<i64>) -> Self {
        CoverProblem {
            n_elements,
            candidates,
            weights,
            side: Vec::new(),
        }
    }

    pub fn with_side(mut self, weights: Vec<i64>, lower_bound: i64) -> Self {
        self.side.push(SideConstraint {
            weights,
            lower_bound,
        });
        self
    }

    pub fn variable_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.n_elements + self.side.len()
    }

    fn validate(&self) -> Result<(), CoverError> {
        if self.n_elements > MAX_ELEMENTS {
            return Err(CoverError::TooManyElements(self.n_elements));
        }
        let full = full_mask(self.n_elements);
        for (i, &m) in self.candidates.iter().enumerate() {
            if m == 0 || m & !full != 0 {
                return Err(CoverError::BadCandidate(i));
            }
        }
        for w in std::iter::once(&self.weights).chain(self.side.iter().map(|s| &s.weights)) {
            if w.len() != self.candidates.len() {
                return Err(CoverError::LengthMismatch {
                    expected: self.candidates.len(),
                    got: w.len(),
                });
            }
        }
        let covered = self.candidates.iter().fold(0u64, |a, &m| a | m);
        if covered != full {
            return Err(CoverError::Uncovered((!covered & full).trailing_zeros() as usize));
        }
        Ok(())
    }

    /// Evaluates a selection; `None` if it is not an exact cover.
    pub fn evaluate(&self, selected: &[usize]) -> Option<(i64, Vec<i64>)> {
        let mut covered = 0u64;
        for &p in selected {
            let m = *self.candidates.get(p)?;
            if covered & m != 0 {
                return None;
            }
            covered |= m;
        }
        if covered != full_mask(self.n_elements) {
            return None;
        }
        let obj = selected.iter().map(|&p| self.weights[p]).sum();
        let side = self
            .side
            .iter()
            .map(|s| selected.iter().map(|&p| s.weights[p]).sum())
            .collect();
        Some((obj, side))
    }

    pub fn solve(&self) -> Result<CoverSolution, CoverError> {
        self.solve_with_hint(None)
    }

    /// Solves, optionally seeding the incumbent with a known feasible selection.
    pub fn solve_with_hint(&self, hint: Option<&[usize]>) -> Result<CoverSolution, CoverError> {
        self.validate()?;
        let n = self.n_elements;

        // Relabel elements so that bit 0 is the element with fewest candidates.
        let mut count = vec![0usize; n];
        for &m in &self.candidates {
            for (e, c) in count.iter_mut().enumerate() {
                if m & (1 << e) != 0 {
                    *c += 1;
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&e| (count[e], e));
        let mut rank = vec![0usize; n];
        for (r, &e) in order.iter().enumerate() {
            rank[e] = r;
        }
        let masks: Vec<u64> = self
            .candidates
            .iter()
            .map(|&m| {
                (0..n)
                    .filter(|&e| m & (1 << e) != 0)
                    .fold(0u64, |a, e| a | (1 << rank[e]))
            })
            .collect();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (p, &m) in masks.iter().enumerate() {
            lists[m.trailing_zeros() as usize].push(p);
        }

        let mut objective = BoundTable::new(&self.weights);
        let mut sides: Vec<BoundTable> = self.side.iter().map(|s| BoundTable::new(&s.weights)).collect();
        let full = full_mask(n);
        if objective.best(full, &masks, &lists).is_none() {
            return Err(CoverError::Infeasible);
        }

        let mut search = Search {
            problem: self,
            masks: &masks,
            lists: &lists,
            objective: &mut objective,
            sides: &mut sides,
            best: None,
            nodes: 0,
            chosen: Vec::new(),
        };
        if let Some(h) = hint {
            if let Some((obj, side)) = self.evaluate(h) {
                if side.iter().zip(&self.side).all(|(v, s)| *v >= s.lower_bound) {
                    let mut sel = h.to_vec();
                    sel.sort_unstable();
                    search.best = Some((obj, sel));
                }
            }
        }
        let side0 = vec![0i64; self.side.len()];
        search.run(full, 0, &side0);

        let nodes = search.nodes;
        let (obj, selected) = search.best.ok_or(CoverError::Infeasible)?;
        let (_, side_values) = self.evaluate(&selected).expect("solution is an exact cover");
        Ok(CoverSolution {
            selected,
            objective: obj,
            side_values,
            nodes,
        })
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

/// Memoized optimum of the unconstrained exact cover of a remaining set.
struct BoundTable<'a> {
    weights: &'a [i64],
    memo: HashMap<u64, Option<i64>>,
}

impl<'a> BoundTable<'a> {
    fn new(weights: &'a [i64]) -> Self {
        BoundTable {
            weights,
            memo: HashMap::new(),
        }
    }

    fn best(&mut self, rest: u64, masks: &[u64], lists: &[Vec<usize>]) -> Option<i64> {
        if rest == 0 {
            return Some(0);
        }
        if let Some(&v) = self.memo.get(&rest) {
            return v;
        }
        let e = rest.trailing_zeros() as usize;
        let mut out: Option<i64> = None;
        for &p in &lists[e] {
            let m = masks[p];
            if m & !rest != 0 {
                continue;
            }
            if let Some(sub) = self.best(rest & !m, masks, lists) {
                let v = self.weights[p] + sub;
                out = Some(out.map_or(v, |o| o.max(v)));
            }
        }
        self.memo.insert(rest, out);
        out
    }
}

struct Search<'a, 'b> {
    problem: &'a CoverProblem,
    masks: &'a [u64],
    lists: &'a [Vec<usize>],
    objective: &'b mut BoundTable<'a>,
    sides: &'b mut Vec<BoundTable<'a>>,
    best: Option<(i64, Vec<usize>)>,
    nodes: u64,
    chosen: Vec<usize>,
}

impl Search<'_, '_> {
    fn run(&mut self, rest: u64, value: i64, side_vals: &[i64]) {
        self.nodes += 1;
        if rest == 0 {
            if side_vals
                .iter()
                .zip(&self.problem.side)
                .any(|(v, s)| *v < s.lower_bound)
            {
                return;
            }
            let mut sel = self.chosen.clone();
            sel.sort_unstable();
            let better = match &self.best {
                None => true,
                Some((b, bsel)) => value > *b || (value == *b && sel < *bsel),
            };
            if better {
                self.best = Some((value, sel));
            }
            return;
        }

        let e = rest.trailing_zeros() as usize;
        let mut children: Vec<(i64, usize, u64)> = Vec::new();
        'cand: for &p in &self.lists[e] {
            let m = self.masks[p];
            if m & !rest != 0 {
                continue;
            }
            let after = rest & !m;
            let Some(bound) = self.objective.best(after, self.masks, self.lists) else {
                continue;
            };
            let reach = value + self.problem.weights[p] + bound;
            if let Some((b, _)) = &self.best {
                // strict, so equal-valued selections are still compared
                if reach < *b {
                    continue;
                }
            }
            for (k, s) in self.problem.side.iter().enumerate() {
                let Some(sb) = self.sides[k].best(after, self.masks, self.lists) else {
                    continue 'cand;
                };
                if side_vals[k] + s.weights[p] + sb < s.lower_bound {
                    continue 'cand;
                }
            }
            children.push((reach, p, after));
        }
        children.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        let mut next_side = side_vals.to_vec();
        for (reach, p, after) in children {
            if let Some((b, _)) = &self.best {
                if reach < *b {
                    continue;
                }
            }
            for (k, s) in self.problem.side.iter().enumerate() {
                next_side[k] = side_vals[k] + s.weights[p];
            }
            self.chosen.push(p);
            self.run(after, value + self.problem.weights[p], &next_side);
            self.chosen.pop();
        }
    }
}
