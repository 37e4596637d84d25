//! CDCL solver with a distribution-biased decision phase.
//!
//! Two-watched-literal propagation, VSIDS, first-UIP learning with local
//! minimization, Luby restarts and activity-based learnt-clause reduction.
//! The phase of every decision on a tracked variable favours the value that
//! is rarer in the recorded distribution.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cnf::{Cnf, Lit, Var};

/// Per-SAT-variable counts of zeros and ones over earlier solutions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitDistribution {
    counts: Vec<Option<(u32, u32)>>,
}

impl BitDistribution {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, v: Var) -> Option<(u32, u32)> {
        self.counts.get(v.index()).copied().flatten()
    }

    pub fn set(&mut self, v: Var, count0: u32, count1: u32) {
        if self.counts.len() <= v.index() {
            self.counts.resize(v.index() + 1, None);
        }
        self.counts[v.index()] = Some((count0, count1));
    }

    pub fn record(&mut self, v: Var, value: bool) {
        let (c0, c1) = self.get(v).unwrap_or((0, 0));
        if value {
            self.set(v, c0, c1 + 1);
        } else {
            self.set(v, c0 + 1, c1);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(Option::is_none)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Var, (u32, u32))> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (Var(i as u32), c)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PhaseBias {
    /// Bias applies to every decision.
    EveryDecision,
    /// Bias applies to a variable's first decision; later ones reuse the saved phase.
    FirstDecisionOnly,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub seed: u64,
    /// Probability of deciding the minority value of a tracked variable.
    pub bias_strength: f64,
    pub phase_bias: PhaseBias,
    pub var_decay: f64,
    pub clause_decay: f64,
    /// Conflicts per Luby unit.
    pub restart_base: u64,
    pub conflict_budget: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            bias_strength: 0.85,
            phase_bias: PhaseBias::EveryDecision,
            var_decay: 0.95,
            clause_decay: 0.999,
            restart_base: 100,
            conflict_budget: None,
            deadline: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(Vec<bool>),
    Unsat,
    /// Conflict budget or deadline exhausted.
    Unknown,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

/// Solves `cnf`, deciding phases against `dist`.
pub fn solve(cnf: &Cnf, dist: &BitDistribution, cfg: &SolverConfig) -> SatResult {
    assert!(
        (0.5..=1.0).contains(&cfg.bias_strength),
        "bias strength must lie in [0.5, 1]"
    );
    let mut s = Solver::new(cnf.num_vars as usize, dist, cfg);
    for c in &cnf.clauses {
        if !s.add_clause(c) {
            return SatResult::Unsat;
        }
    }
    let result = s.search_loop();
    if let SatResult::Sat(model) = &result {
        assert!(cnf.is_satisfied_by(model), "SAT model violates a clause");
    }
    result
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LBool {
    True,
    False,
    Undef,
}

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    activity: f64,
    deleted: bool,
}

#[derive(Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: Lit,
}

/// Max-heap of variables ordered by activity.
struct VarHeap {
    heap: Vec<Var>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn new(n: usize) -> Self {
        VarHeap {
            heap: Vec::with_capacity(n),
            pos: vec![None; n],
        }
    }

    fn contains(&self, v: Var) -> bool {
        self.pos[v.index()].is_some()
    }

    fn insert(&mut self, v: Var, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v.index()] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn increased(&mut self, v: Var, act: &[f64]) {
        if let Some(i) = self.pos[v.index()] {
            self.sift_up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<Var> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top.index()] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0].index()] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if act[p.index()] >= act[v.index()] {
                break;
            }
            self.heap[i] = p;
            self.pos[p.index()] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v.index()] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let child = if r < n && act[self.heap[r].index()] > act[self.heap[l].index()] {
                r
            } else {
                l
            };
            let c = self.heap[child];
            if act[c.index()] <= act[v.index()] {
                break;
            }
            self.heap[i] = c;
            self.pos[c.index()] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v.index()] = Some(i);
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0i32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

struct Solver<'a> {
    cfg: &'a SolverConfig,
    dist: &'a BitDistribution,
    rng: ChaCha8Rng,
    clauses: Vec<Clause>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watch>>,
    assigns: Vec<LBool>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    heap: VarHeap,
    saved_phase: Vec<Option<bool>>,
    seen: Vec<bool>,
    max_learnts: f64,
    conflicts: u64,
}

impl<'a> Solver<'a> {
    fn new(n: usize, dist: &'a BitDistribution, cfg: &'a SolverConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // Seeded jitter breaks initial activity ties differently per seed.
        let activity: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 1e-3).collect();
        let mut heap = VarHeap::new(n);
        for v in 0..n {
            heap.insert(Var(v as u32), &activity);
        }
        Solver {
            cfg,
            dist,
            rng,
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            assigns: vec![LBool::Undef; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            cla_inc: 1.0,
            heap,
            saved_phase: vec![None; n],
            seen: vec![false; n],
            max_learnts: 0.0,
            conflicts: 0,
        }
    }

    fn value(&self, l: Lit) -> LBool {
        match self.assigns[l.var().index()] {
            LBool::Undef => LBool::Undef,
            LBool::True if l.is_positive() => LBool::True,
            LBool::False if !l.is_positive() => LBool::True,
            _ => LBool::False,
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = l.var().index();
        debug_assert!(self.assigns[v] == LBool::Undef);
        self.assigns[v] = if l.is_positive() {
            LBool::True
        } else {
            LBool::False
        };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Adds an original clause at level 0. Returns false on a top-level conflict.
    fn add_clause(&mut self, lits: &[Lit]) -> bool {
        let mut c: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            match self.value(l) {
                LBool::True => return true,
                LBool::False => {}
                LBool::Undef => {
                    if c.contains(&!l) {
                        return true;
                    }
                    if !c.contains(&l) {
                        c.push(l);
                    }
                }
            }
        }
        match c.len() {
            0 => false,
            1 => {
                self.enqueue(c[0], None);
                self.propagate().is_none()
            }
            _ => {
                self.attach(c, false);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lits[0].code()].push(Watch {
            cref,
            blocker: lits[1],
        });
        self.watches[lits[1].code()].push(Watch {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            learnt,
            activity: 0.0,
            deleted: false,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == LBool::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let lits = &mut self.clauses[cref as usize].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let nw = Watch {
                    cref,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == LBool::True {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                let len = self.clauses[cref as usize].lits.len();
                for k in 2..len {
                    let lk = self.clauses[cref as usize].lits[k];
                    if self.value(lk) != LBool::False {
                        let lits = &mut self.clauses[cref as usize].lits;
                        lits.swap(1, k);
                        self.watches[lits[1].code()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.value(first) == LBool::False {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                    self.qhead = self.trail.len();
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: Var) {
        self.activity[v.index()] += self.var_inc;
        if self.activity[v.index()] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increased(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit::new(Var(0), true)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        loop {
            self.bump_clause(confl);
            let start = if p.is_some() { 1 } else { 0 };
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var();
                if !self.seen[v.index()] && self.level[v.index()] > 0 {
                    self.bump_var(v);
                    self.seen[v.index()] = true;
                    if self.level[v.index()] >= self.decision_level() {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[pl.var().index()] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[pl.var().index()].expect("implied literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Local minimization: drop literals implied by the rest of the clause.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let redundant = match self.reason[l.var().index()] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..]
                    .iter()
                    .all(|q| self.seen[q.var().index()] || self.level[q.var().index()] == 0),
            };
            if !redundant {
                keep.push(l);
            }
        }
        for &l in &learnt {
            self.seen[l.var().index()] = false;
        }
        let mut learnt = keep;

        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index()] > self.level[learnt[max_i].var().index()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[learnt[1].var().index()];
        }
        (learnt, bt)
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.saved_phase[v.index()] = Some(l.is_positive());
            self.assigns[v.index()] = LBool::Undef;
            self.reason[v.index()] = None;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn pick_phase(&mut self, v: Var) -> bool {
        if self.cfg.phase_bias == PhaseBias::FirstDecisionOnly {
            if let Some(p) = self.saved_phase[v.index()] {
                return p;
            }
        }
        match self.dist.get(v) {
            Some((c0, c1)) if c0 != c1 => {
                let minority = c0 > c1;
                if self.rng.random_bool(self.cfg.bias_strength) {
                    minority
                } else {
                    !minority
                }
            }
            _ => self.rng.random_bool(0.5),
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v.index()] == LBool::Undef {
                let phase = self.pick_phase(v);
                return Some(Lit::new(v, phase));
            }
        }
        None
    }

    fn locked(&self, cref: u32) -> bool {
        let l0 = self.clauses[cref as usize].lits[0];
        self.value(l0) == LBool::True && self.reason[l0.var().index()] == Some(cref)
    }

    fn reduce_db(&mut self) {
        let mut ls = std::mem::take(&mut self.learnts);
        ls.sort_by(|a, b| {
            self.clauses[*a as usize]
                .activity
                .total_cmp(&self.clauses[*b as usize].activity)
        });
        let half = ls.len() / 2;
        let mut kept = Vec::with_capacity(ls.len());
        for (i, &cref) in ls.iter().enumerate() {
            let c = &self.clauses[cref as usize];
            if i < half && c.lits.len() > 2 && !self.locked(cref) {
                self.clauses[cref as usize].deleted = true;
            } else {
                kept.push(cref);
            }
        }
        self.learnts = kept;
        let clauses = &self.clauses;
        for ws in self.watches.iter_mut() {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
        for cref in 0..self.clauses.len() {
            if self.clauses[cref].deleted {
                self.clauses[cref].lits = Vec::new();
            }
        }
    }

    fn out_of_budget(&self) -> bool {
        if let Some(b) = self.cfg.conflict_budget {
            if self.conflicts >= b {
                return true;
            }
        }
        if let Some(d) = self.cfg.deadline {
            if self.conflicts.is_multiple_of(128) && Instant::now() >= d {
                return true;
            }
        }
        false
    }

    /// Runs until a model, a refutation, or budget exhaustion.
    fn search(&mut self, conflict_limit: u64) -> Option<SatResult> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if self.decision_level() == 0 {
                    return Some(SatResult::Unsat);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(first, Some(cref));
                }
                self.var_inc /= self.cfg.var_decay;
                self.cla_inc /= self.cfg.clause_decay;
                if self.out_of_budget() {
                    return Some(SatResult::Unknown);
                }
            } else {
                if local >= conflict_limit {
                    self.cancel_until(0);
                    return None;
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                    self.max_learnts *= 1.1;
                }
                match self.pick_branch() {
                    None => {
                        let model = self.assigns.iter().map(|a| *a == LBool::True).collect();
                        return Some(SatResult::Sat(model));
                    }
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }

    fn search_loop(&mut self) -> SatResult {
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(2000.0);
        let mut restart = 0u64;
        loop {
            let limit = (luby(2.0, restart) * self.cfg.restart_base as f64) as u64;
            if let Some(r) = self.search(limit.max(1)) {
                return r;
            }
            restart += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnf_from(clauses: &[&[i64]]) -> Cnf {
        let mut cnf = Cnf::new();
        for c in clauses {
            cnf.add_clause(c.iter().map(|&d| Lit::from_dimacs(d)));
        }
        cnf
    }

    #[test]
    fn unit_clause_forces_model() {
        let cnf = cnf_from(&[&[1]]);
        let mut dist = BitDistribution::empty();
        dist.set(Var(0), 0, 5);
        let cfg = SolverConfig {
            bias_strength: 1.0,
            ..Default::default()
        };
        assert_eq!(solve(&cnf, &dist, &cfg), SatResult::Sat(vec![true]));
    }

    #[test]
    fn bias_is_decisive_on_free_variables() {
        let mut cnf = Cnf::new();
        cnf.num_vars = 1;
        let mut dist = BitDistribution::empty();
        dist.set(Var(0), 5, 0);
        let cfg = SolverConfig {
            bias_strength: 1.0,
            ..Default::default()
        };
        for seed in 0..20 {
            let cfg = SolverConfig {
                seed,
                ..cfg.clone()
            };
            assert_eq!(solve(&cnf, &dist, &cfg), SatResult::Sat(vec![true]));
        }
    }

    #[test]
    fn detects_unsat() {
        let cnf = cnf_from(&[&[1, 2], &[-1, 2], &[1, -2], &[-1, -2]]);
        assert_eq!(
            solve(&cnf, &BitDistribution::empty(), &SolverConfig::default()),
            SatResult::Unsat
        );
        let empty = Cnf {
            num_vars: 1,
            clauses: vec![vec![]],
        };
        assert_eq!(
            solve(&empty, &BitDistribution::empty(), &SolverConfig::default()),
            SatResult::Unsat
        );
    }

    #[test]
    fn pigeonhole_four_into_three_is_unsat() {
        // p(i,j): pigeon i in hole j, var = 3*i + j + 1
        let mut clauses: Vec<Vec<i64>> = Vec::new();
        for i in 0..4 {
            clauses.push((0..3).map(|j| 3 * i + j + 1).collect());
        }
        for j in 0..3 {
            for a in 0..4 {
                for b in a + 1..4 {
                    clauses.push(vec![-(3 * a + j + 1), -(3 * b + j + 1)]);
                }
            }
        }
        let refs: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
        let cnf = cnf_from(&refs);
        assert_eq!(
            solve(&cnf, &BitDistribution::empty(), &SolverConfig::default()),
            SatResult::Unsat
        );
    }

    #[test]
    fn conflict_budget_aborts() {
        let mut clauses: Vec<Vec<i64>> = Vec::new();
        let (p, h) = (8i64, 7i64);
        for i in 0..p {
            clauses.push((0..h).map(|j| h * i + j + 1).collect());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    clauses.push(vec![-(h * a + j + 1), -(h * b + j + 1)]);
                }
            }
        }
        let refs: Vec<&[i64]> = clauses.iter().map(|c| c.as_slice()).collect();
        let cnf = cnf_from(&refs);
        let cfg = SolverConfig {
            conflict_budget: Some(10),
            ..Default::default()
        };
        assert_eq!(
            solve(&cnf, &BitDistribution::empty(), &cfg),
            SatResult::Unknown
        );
    }

    #[test]
    fn same_seed_same_model() {
        let cnf = cnf_from(&[&[1, 2, 3], &[-1, -2], &[2, 4, -5], &[-3, 5]]);
        let cfg = SolverConfig {
            seed: 42,
            ..Default::default()
        };
        let a = solve(&cnf, &BitDistribution::empty(), &cfg);
        let b = solve(&cnf, &BitDistribution::empty(), &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn luby_sequence() {
        let seq: Vec<u64> = (0..15).map(|i| luby(2.0, i) as u64).collect();
        assert_eq!(seq, [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }
}
