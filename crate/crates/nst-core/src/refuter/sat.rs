//! A small conflict-driven SAT procedure with unsatisfiable-core
//! extraction, plus an independent DPLL used by the certificate checker
//! so that no single solver is trusted twice.
//!
//! Literals are DIMACS-style non-zero integers: variable v is `v` (true)
//! or `-v` (false), with v in `1..=num_vars`.

/// Outcome of [`solve`]: a satisfying assignment (index 0 unused) or a
/// subset of input clause indices that is already unsatisfiable.
#[derive(Debug)]
pub enum SatResult {
    Sat(Vec<bool>),
    Unsat(Vec<usize>),
}

struct Solver {
    n: usize,
    /// Clause database; the first `n_input` entries are the input.
    db: Vec<Vec<i32>>,
    n_input: usize,
    /// For learned clauses: the database ids resolved to produce them.
    premises: Vec<Vec<usize>>,
    /// watches[lit_idx] = clause ids watching that literal.
    watches: Vec<Vec<usize>>,
    assign: Vec<i8>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    trail: Vec<i32>,
    trail_lim: Vec<usize>,
    prop_head: usize,
    activity: Vec<f64>,
    act_inc: f64,
    /// Binary max-heap of unassigned variables keyed by activity, with
    /// `heap_pos[v]` the index of v in `heap` (usize::MAX when absent).
    heap: Vec<usize>,
    heap_pos: Vec<usize>,
}

fn lit_idx(l: i32) -> usize {
    let v = l.unsigned_abs() as usize;
    (v << 1) | usize::from(l < 0)
}

impl Solver {
    fn value(&self, l: i32) -> i8 {
        let v = l.unsigned_abs() as usize;
        if l > 0 {
            self.assign[v]
        } else {
            -self.assign[v]
        }
    }

    fn enqueue(&mut self, l: i32, reason: Option<usize>) {
        let v = l.unsigned_abs() as usize;
        self.assign[v] = if l > 0 { 1 } else { -1 };
        self.level[v] = self.trail_lim.len();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.prop_head < self.trail.len() {
            let l = self.trail[self.prop_head];
            self.prop_head += 1;
            let falsified = -l;
            let mut ws = std::mem::take(&mut self.watches[lit_idx(falsified)]);
            let mut i = 0;
            while i < ws.len() {
                let ci = ws[i];
                // Ensure the falsified literal sits at position 1.
                if self.db[ci][0] == falsified {
                    self.db[ci].swap(0, 1);
                }
                let first = self.db[ci][0];
                if self.value(first) == 1 {
                    i += 1;
                    continue;
                }
                // Look for a new literal to watch.
                let mut moved = false;
                for k in 2..self.db[ci].len() {
                    if self.value(self.db[ci][k]) != -1 {
                        self.db[ci].swap(1, k);
                        let w = self.db[ci][1];
                        self.watches[lit_idx(w)].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if self.value(first) == -1 {
                    // Conflict; put the remaining watchers back first.
                    self.watches[lit_idx(falsified)] = ws;
                    return Some(ci);
                }
                self.enqueue(first, Some(ci));
                i += 1;
            }
            self.watches[lit_idx(falsified)] = ws;
        }
        None
    }

    /// Heap ordering: higher activity first, ties to the lower variable
    /// (keeps decisions deterministic).
    fn heap_less(&self, a: usize, b: usize) -> bool {
        self.activity[a] > self.activity[b]
            || (self.activity[a] == self.activity[b] && a < b)
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.heap_less(self.heap[i], self.heap[parent]) {
                self.heap.swap(i, parent);
                self.heap_pos[self.heap[i]] = i;
                self.heap_pos[self.heap[parent]] = parent;
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.heap.len() && self.heap_less(self.heap[l], self.heap[best]) {
                best = l;
            }
            if r < self.heap.len() && self.heap_less(self.heap[r], self.heap[best]) {
                best = r;
            }
            if best == i {
                break;
            }
            self.heap.swap(i, best);
            self.heap_pos[self.heap[i]] = i;
            self.heap_pos[self.heap[best]] = best;
            i = best;
        }
    }

    fn heap_insert(&mut self, v: usize) {
        if self.heap_pos[v] != usize::MAX {
            return;
        }
        self.heap_pos[v] = self.heap.len();
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1);
    }

    fn heap_pop(&mut self) -> Option<usize> {
        let top = *self.heap.first()?;
        self.heap_pos[top] = usize::MAX;
        let last = self.heap.pop().unwrap();
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.heap_pos[last] = 0;
            self.sift_down(0);
        }
        Some(top)
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.act_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.act_inc *= 1e-100;
            // Activities rescaled uniformly; heap order is unchanged.
        }
        if self.heap_pos[v] != usize::MAX {
            let i = self.heap_pos[v];
            self.sift_up(i);
        }
    }

    /// First-UIP conflict analysis. Returns the learned clause, the
    /// backjump level, and the database ids resolved along the way.
    fn analyze(&mut self, confl: usize) -> (Vec<i32>, usize, Vec<usize>) {
        let current = self.trail_lim.len();
        let mut seen = vec![false; self.n + 1];
        let mut learned: Vec<i32> = Vec::new();
        let mut premises = vec![confl];
        let mut counter = 0usize;
        let mut clause = self.db[confl].clone();
        let mut idx = self.trail.len();
        let mut uip;
        loop {
            for &q in &clause {
                let v = q.unsigned_abs() as usize;
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= current {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            // Walk back to the next marked trail literal.
            loop {
                idx -= 1;
                let v = self.trail[idx].unsigned_abs() as usize;
                if seen[v] {
                    uip = self.trail[idx];
                    seen[v] = false;
                    break;
                }
            }
            counter -= 1;
            if counter == 0 {
                break;
            }
            let r = self.reason[uip.unsigned_abs() as usize].expect("non-decision");
            premises.push(r);
            clause = self.db[r]
                .iter()
                .copied()
                .filter(|&q| q != uip)
                .collect();
        }
        learned.insert(0, -uip);
        let backjump = learned[1..]
            .iter()
            .map(|&q| self.level[q.unsigned_abs() as usize])
            .max()
            .unwrap_or(0);
        (learned, backjump, premises)
    }

    fn backtrack(&mut self, to: usize) {
        while self.trail_lim.len() > to {
            let lim = self.trail_lim.pop().unwrap();
            while self.trail.len() > lim {
                let l = self.trail.pop().unwrap();
                let v = l.unsigned_abs() as usize;
                self.assign[v] = 0;
                self.heap_insert(v);
            }
        }
        self.prop_head = self.trail.len();
    }

    fn add_watched(&mut self, ci: usize) {
        let c = &self.db[ci];
        debug_assert!(c.len() >= 2);
        self.watches[lit_idx(c[0])].push(ci);
        self.watches[lit_idx(c[1])].push(ci);
    }

    /// Expands a final conflict into the set of input clause indices it
    /// depends on, chasing reasons and learned-clause premises.
    fn input_core(&self, confl: usize) -> Vec<usize> {
        let mut core = std::collections::BTreeSet::new();
        let mut stack = vec![confl];
        let mut visited = vec![false; self.db.len()];
        while let Some(ci) = stack.pop() {
            if visited[ci] {
                continue;
            }
            visited[ci] = true;
            if ci < self.n_input {
                core.insert(ci);
            } else {
                stack.extend(self.premises[ci - self.n_input].iter().copied());
            }
            // Reasons of the clause's falsified literals (level 0).
            for &l in &self.db[ci] {
                let v = l.unsigned_abs() as usize;
                if self.assign[v] != 0 && self.level[v] == 0 {
                    if let Some(r) = self.reason[v] {
                        stack.push(r);
                    }
                }
            }
        }
        core.into_iter().collect()
    }
}

pub fn solve(num_vars: usize, clauses: &[Vec<i32>]) -> SatResult {
    let mut s = Solver {
        n: num_vars,
        db: Vec::with_capacity(clauses.len()),
        n_input: clauses.len(),
        premises: Vec::new(),
        watches: vec![Vec::new(); (num_vars + 1) << 1],
        assign: vec![0; num_vars + 1],
        level: vec![0; num_vars + 1],
        reason: vec![None; num_vars + 1],
        trail: Vec::new(),
        trail_lim: Vec::new(),
        prop_head: 0,
        activity: vec![0.0; num_vars + 1],
        act_inc: 1.0,
        heap: Vec::with_capacity(num_vars),
        heap_pos: vec![usize::MAX; num_vars + 1],
    };
    for v in 1..=num_vars {
        s.heap_insert(v);
    }
    // Load input clauses; handle empty and unit clauses at level 0.
    let mut units: Vec<(i32, usize)> = Vec::new();
    for (i, c) in clauses.iter().enumerate() {
        if c.is_empty() {
            return SatResult::Unsat(vec![i]);
        }
        s.db.push(c.clone());
        if c.len() == 1 {
            units.push((c[0], i));
        } else {
            s.add_watched(i);
        }
    }
    for (l, i) in units {
        match s.value(l) {
            1 => {}
            0 => s.enqueue(l, Some(i)),
            _ => {
                // Immediate contradiction between unit clauses.
                let other = s.reason[l.unsigned_abs() as usize].unwrap();
                return SatResult::Unsat(vec![other.min(i), other.max(i)]);
            }
        }
    }
    if let Some(confl) = s.propagate() {
        return SatResult::Unsat(s.input_core(confl));
    }
    let mut conflicts_here = 0u64;
    let mut restart_limit = 100u64;
    loop {
        // Decide: highest activity, ties to the lowest variable.
        let mut pick = 0usize;
        while let Some(v) = s.heap_pop() {
            if s.assign[v] == 0 {
                pick = v;
                break;
            }
        }
        if pick == 0 {
            let model = (0..=num_vars).map(|v| s.assign[v] == 1).collect();
            return SatResult::Sat(model);
        }
        s.trail_lim.push(s.trail.len());
        s.enqueue(-(pick as i32), None);
        while let Some(confl) = s.propagate() {
            conflicts_here += 1;
            s.act_inc /= 0.95;
            if s.trail_lim.is_empty() {
                return SatResult::Unsat(s.input_core(confl));
            }
            let (learned, backjump, premises) = s.analyze(confl);
            s.backtrack(backjump);
            let ci = s.db.len();
            s.db.push(learned.clone());
            s.premises.push(premises);
            if learned.len() == 1 {
                if s.value(learned[0]) == -1 && s.trail_lim.is_empty() {
                    return SatResult::Unsat(s.input_core(ci));
                }
                s.enqueue(learned[0], Some(ci));
            } else {
                s.add_watched(ci);
                s.enqueue(learned[0], Some(ci));
            }
            if conflicts_here >= restart_limit {
                // Geometric restart; learned clauses are kept.
                conflicts_here = 0;
                restart_limit += restart_limit / 2;
                s.backtrack(0);
                break;
            }
        }
    }
}

/// Independent complete check used by the certificate verifier: plain
/// recursive DPLL with unit propagation, no learning, no shared code with
/// [`solve`]. Returns true when the clause set is unsatisfiable.
pub fn dpll_unsat(num_vars: usize, clauses: &[Vec<i32>]) -> bool {
    fn go(assign: &mut Vec<i8>, clauses: &[Vec<i32>]) -> bool {
        // returns true iff satisfiable
        loop {
            let mut unit: Option<i32> = None;
            for c in clauses {
                let mut unassigned = 0;
                let mut last = 0;
                let mut sat = false;
                for &l in c {
                    let v = l.unsigned_abs() as usize;
                    let val = assign[v] * if l > 0 { 1 } else { -1 };
                    if val == 1 {
                        sat = true;
                        break;
                    }
                    if val == 0 {
                        unassigned += 1;
                        last = l;
                    }
                }
                if sat {
                    continue;
                }
                if unassigned == 0 {
                    return false;
                }
                if unassigned == 1 {
                    unit = Some(last);
                    break;
                }
            }
            match unit {
                Some(l) => {
                    assign[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                }
                None => break,
            }
        }
        let pick = (1..assign.len()).find(|&v| assign[v] == 0);
        let Some(v) = pick else {
            return true;
        };
        for val in [1i8, -1] {
            let saved = assign.clone();
            assign[v] = val;
            if go(assign, clauses) {
                return true;
            }
            *assign = saved;
        }
        false
    }
    if clauses.iter().any(|c| c.is_empty()) {
        return true;
    }
    !go(&mut vec![0; num_vars + 1], clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        match solve(1, &[vec![1], vec![-1]]) {
            SatResult::Unsat(core) => assert_eq!(core, vec![0, 1]),
            _ => panic!("expected unsat"),
        }
        assert!(matches!(solve(2, &[vec![1, 2]]), SatResult::Sat(_)));
        assert!(dpll_unsat(1, &[vec![1], vec![-1]]));
        assert!(!dpll_unsat(2, &[vec![1, 2]]));
    }

    #[test]
    fn pigeonhole_three_into_two_is_unsat() {
        // p_{i,j}: pigeon i in hole j; vars 1..=6.
        let p = |i: usize, j: usize| (i * 2 + j + 1) as i32;
        let mut cs: Vec<Vec<i32>> = (0..3).map(|i| vec![p(i, 0), p(i, 1)]).collect();
        for j in 0..2 {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    cs.push(vec![-p(a, j), -p(b, j)]);
                }
            }
        }
        match solve(6, &cs) {
            SatResult::Unsat(core) => {
                let core_cs: Vec<Vec<i32>> = core.iter().map(|&i| cs[i].clone()).collect();
                assert!(dpll_unsat(6, &core_cs), "core must itself be unsat");
            }
            _ => panic!("expected unsat"),
        }
        assert!(dpll_unsat(6, &cs));
    }

    #[test]
    fn random_agreement_with_dpll() {
        // Deterministic xorshift; no external RNG needed for this check.
        let mut state = 0x243f6a88u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _case in 0..300 {
            let nv = 3 + (rng() % 6) as usize;
            let nc = 2 + (rng() % 18) as usize;
            let cs: Vec<Vec<i32>> = (0..nc)
                .map(|_| {
                    let len = 1 + (rng() % 3) as usize;
                    (0..len)
                        .map(|_| {
                            let v = 1 + (rng() % nv as u64) as i32;
                            if rng() % 2 == 0 {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let cdcl_unsat = match solve(nv, &cs) {
                SatResult::Unsat(core) => {
                    let core_cs: Vec<Vec<i32>> =
                        core.iter().map(|&i| cs[i].clone()).collect();
                    assert!(dpll_unsat(nv, &core_cs), "bad core for {cs:?}");
                    true
                }
                SatResult::Sat(model) => {
                    for c in &cs {
                        assert!(
                            c.iter().any(|&l| {
                                let v = l.unsigned_abs() as usize;
                                model[v] == (l > 0)
                            }),
                            "model does not satisfy {c:?}"
                        );
                    }
                    false
                }
            };
            assert_eq!(cdcl_unsat, dpll_unsat(nv, &cs), "disagreement on {cs:?}");
        }
    }
}
