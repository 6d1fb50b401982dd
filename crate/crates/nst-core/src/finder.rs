//! Exhaustive finite-model search over extensional membership structures.
//!
//! Models of a given size are enumerated in lexicographic order of the
//! relation bitmap (pair (0,0) is the most significant bit), optionally
//! filtered down to one representative per isomorphism class. Constant
//! assignments are searched inner-loop, also lexicographically, so the
//! reported witness is the globally least satisfying pair.

use crate::fragment::TheoryFragment;
use crate::model::FiniteModel;
use crate::refuter::{self, Certificate, RefuteBounds};
use crate::semantics::{self, is_extensional, EvalReport};
use crate::syntax::{expand, not, Formula};
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct SearchBudget {
    pub max_size: usize,
    pub max_constant_assignments: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Enumerate one representative per isomorphism class. Off by
    /// default: the least witness is then least over *all* models.
    pub canonical_only: bool,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_size: 4,
            max_constant_assignments: None,
            time_limit: None,
            canonical_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchStats {
    pub models_checked: u64,
    pub assignments_checked: u64,
    pub largest_size_completed: usize,
}

#[derive(Debug)]
pub enum SearchOutcome {
    Found(FiniteModel, EvalReport),
    /// Every candidate within the budget was examined.
    SpaceExhausted(SearchStats),
    TimedOut(SearchStats),
}

impl SearchOutcome {
    pub fn found(&self) -> Option<&FiniteModel> {
        match self {
            SearchOutcome::Found(m, _) => Some(m),
            _ => None,
        }
    }
}

/// All membership relations on `{0..size-1}` in bitmap order, optionally
/// restricted to extensional ones and to canonical (minimum-bitmap)
/// isomorphism-class representatives.
pub fn enumerate_models(
    size: usize,
    extensional_only: bool,
    canonical_only: bool,
) -> impl Iterator<Item = FiniteModel> {
    assert!(size >= 1 && size * size <= 64, "size out of range");
    let perms = permutations(size);
    (0..(1u64 << (size * size))).filter_map(move |bits| {
        let m = FiniteModel::from_bitmap(size, bits);
        if extensional_only && is_extensional(&m).is_err() {
            return None;
        }
        if canonical_only && !is_canonical(&m, &perms) {
            return None;
        }
        Some(m)
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            go(prefix, rest, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// A model is canonical when its bitmap is minimal among all permuted
/// copies.
pub fn is_canonical(m: &FiniteModel, perms: &[Vec<usize>]) -> bool {
    let me = m.bitmap();
    perms.iter().all(|p| m.permuted(p).bitmap() >= me)
}

fn quantifier_count(f: &Formula) -> u32 {
    match f {
        Formula::Mem(..) | Formula::Eq(..) => 0,
        Formula::Not(g) => quantifier_count(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            quantifier_count(a) + quantifier_count(b)
        }
        Formula::Forall(_, g) | Formula::Exists(_, g) => 1 + quantifier_count(g),
    }
}

/// Picks the cheaper evaluator: the naive walk for shallow formulas, the
/// relational one for deep quantifier nests.
fn eval_auto(m: &FiniteModel, f: &Formula, q: u32) -> Result<bool, semantics::EvalError> {
    let env = semantics::Env::new();
    if q <= 6 {
        semantics::eval_naive(m, f, &env)
    } else {
        semantics::eval(m, f, &env)
    }
}

/// Searches sizes `1..=max_size` for the lexicographically least
/// extensional model (and constant assignment) satisfying the fragment.
pub fn find_model(t: &TheoryFragment, budget: &SearchBudget) -> SearchOutcome {
    let started = Instant::now();
    let mut stats = SearchStats::default();
    // Pre-expand the axioms once; split off the constant-free ones so
    // they are checked a single time per model.
    let expanded: Vec<(bool, u32, Formula)> = t
        .axioms
        .iter()
        .map(|ax| {
            let f = expand(&ax.formula);
            (f.constants().is_empty(), quantifier_count(&f), f)
        })
        .collect();
    let k = t.constants.len();
    for size in 1..=budget.max_size {
        let perms = permutations(size);
        for bits in 0..(1u64 << (size * size)) {
            if let Some(limit) = budget.time_limit {
                if started.elapsed() > limit {
                    return SearchOutcome::TimedOut(stats);
                }
            }
            let m = FiniteModel::from_bitmap(size, bits);
            if is_extensional(&m).is_err() {
                continue;
            }
            if budget.canonical_only && !is_canonical(&m, &perms) {
                continue;
            }
            stats.models_checked += 1;
            if !expanded
                .iter()
                .filter(|(free, _, _)| *free)
                .all(|(_, q, f)| eval_auto(&m, f, *q).unwrap_or(false))
            {
                continue;
            }
            // Odometer over constant assignments, lexicographic.
            let mut assign = vec![0usize; k];
            'assign: loop {
                if let Some(cap) = budget.max_constant_assignments {
                    if stats.assignments_checked >= cap {
                        return SearchOutcome::SpaceExhausted(stats);
                    }
                }
                stats.assignments_checked += 1;
                let mut cm = m.clone();
                for (name, &e) in t.constants.iter().zip(&assign) {
                    cm.constants.insert(name.clone(), e);
                }
                let ok = expanded
                    .iter()
                    .filter(|(free, _, _)| !*free)
                    .all(|(_, q, f)| eval_auto(&cm, f, *q).unwrap_or(false));
                if ok {
                    let report = semantics::check_theory(&cm, t).expect("constants interpreted");
                    debug_assert!(report.pass());
                    return SearchOutcome::Found(cm, report);
                }
                // bump
                let mut i = k;
                loop {
                    if i == 0 {
                        break 'assign;
                    }
                    i -= 1;
                    assign[i] += 1;
                    if assign[i] < size {
                        break;
                    }
                    assign[i] = 0;
                }
            }
        }
        stats.largest_size_completed = size;
    }
    SearchOutcome::SpaceExhausted(stats)
}

/// Verdict on the status of a sentence over a theory.
#[derive(Debug)]
pub enum IndependenceVerdict {
    /// Models witnessing both the sentence and its negation.
    Independent(Box<FiniteModel>, Box<FiniteModel>),
    /// The sentence is provable: its negation was refuted.
    DecidedPositive(Box<Certificate>),
    /// The negation is provable: the sentence was refuted.
    DecidedNegative(Box<Certificate>),
    /// The base theory itself is contradictory.
    TheoryInconsistent(Box<Certificate>),
    /// Neither search nor refutation settled the question in budget.
    Unknown(SearchStats),
}

/// Decides the independence of `phi` over `t` by model search on both
/// `t + phi` and `t + ¬phi`, falling back to the refuter for any side
/// without a small model. The verdict never contradicts the refuter: a
/// side is only reported decided when a verified certificate exists for
/// the opposite side.
pub fn independence(
    t: &TheoryFragment,
    phi: &Formula,
    budget: &SearchBudget,
    rbounds: &RefuteBounds,
) -> IndependenceVerdict {
    let pos_t = t.with_axiom("query", phi.clone());
    let neg_t = t.with_axiom("query", not(phi.clone()));
    let pos = find_model(&pos_t, budget);
    let neg = find_model(&neg_t, budget);
    let mut stats = SearchStats::default();
    for side in [&pos, &neg] {
        if let SearchOutcome::SpaceExhausted(s) | SearchOutcome::TimedOut(s) = side {
            stats.models_checked += s.models_checked;
            stats.assignments_checked += s.assignments_checked;
        }
    }
    match (pos, neg) {
        (SearchOutcome::Found(mp, _), SearchOutcome::Found(mn, _)) => {
            IndependenceVerdict::Independent(Box::new(mp), Box::new(mn))
        }
        (SearchOutcome::Found(_, _), _) => match refute::certified(&neg_t, rbounds) {
            Some(c) => IndependenceVerdict::DecidedPositive(Box::new(c)),
            None => IndependenceVerdict::Unknown(stats),
        },
        (_, SearchOutcome::Found(_, _)) => match refute::certified(&pos_t, rbounds) {
            Some(c) => IndependenceVerdict::DecidedNegative(Box::new(c)),
            None => IndependenceVerdict::Unknown(stats),
        },
        _ => {
            // No model either way: suspect the base theory first.
            if let Some(c) = refute::certified(t, rbounds) {
                return IndependenceVerdict::TheoryInconsistent(Box::new(c));
            }
            if let Some(c) = refute::certified(&neg_t, rbounds) {
                return IndependenceVerdict::DecidedPositive(Box::new(c));
            }
            if let Some(c) = refute::certified(&pos_t, rbounds) {
                return IndependenceVerdict::DecidedNegative(Box::new(c));
            }
            IndependenceVerdict::Unknown(stats)
        }
    }
}

mod refute {
    //! Refuter calls gated behind certificate verification, so the finder
    //! can never report a decision the checker would reject.
    use super::*;

    pub fn certified(t: &TheoryFragment, bounds: &RefuteBounds) -> Option<Certificate> {
        match refuter::refute(t, bounds, None) {
            refuter::RefutationOutcome::Unsat(c) => {
                refuter::check_certificate(&c, t).ok().map(|_| c)
            }
            refuter::RefutationOutcome::Unknown { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Construction};
    use crate::parser::parse;
    use crate::syntax::not;

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_models(1, false, false).count(), 2);
        assert_eq!(enumerate_models(1, true, false).count(), 2);
        assert_eq!(enumerate_models(2, false, false).count(), 16);
        assert_eq!(enumerate_models(2, true, false).count(), 12);
        // Golden counts, fixed after the first run of the canonicalizer.
        assert_eq!(enumerate_models(2, true, true).count(), 7);
        assert_eq!(enumerate_models(3, true, false).count(), 336);
        assert_eq!(enumerate_models(3, true, true).count(), 66);
    }

    #[test]
    fn canonicalization_preserves_satisfiability() {
        // A theory is satisfied by some size-n model iff it is satisfied
        // by some canonical one (exhaustive for n <= 3, sampled theories).
        let theories = [
            catalog::named(&Construction::CoRussell).unwrap(),
            catalog::named(&Construction::Empty).unwrap(),
            catalog::named(&Construction::Universal).unwrap(),
            catalog::named(&Construction::SizeEq(1)).unwrap(),
        ];
        for t in &theories {
            for n in 1..=3usize {
                let full: Vec<bool> = enumerate_models(n, true, false)
                    .map(|m| {
                        let f = expand(&t.axioms[0].formula);
                        semantics::eval(&m, &f, &semantics::Env::new()).unwrap()
                    })
                    .collect();
                let canon: Vec<bool> = enumerate_models(n, true, true)
                    .map(|m| {
                        let f = expand(&t.axioms[0].formula);
                        semantics::eval(&m, &f, &semantics::Env::new()).unwrap()
                    })
                    .collect();
                assert_eq!(
                    full.iter().any(|&b| b),
                    canon.iter().any(|&b| b),
                    "{} at size {n}",
                    t.name
                );
            }
        }
    }

    #[test]
    fn corussell_least_model_is_the_empty_one() {
        let t = catalog::named(&Construction::CoRussell).unwrap();
        match find_model(&t, &SearchBudget::default()) {
            SearchOutcome::Found(m, _) => {
                assert_eq!(m.size(), 1);
                assert!(m.pairs().is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn d_sets_least_model_matches_collapse_remark() {
        let mut t = catalog::named(&Construction::DPlus).unwrap();
        t.merge(&catalog::named(&Construction::DMinus).unwrap());
        t.push("no_universal", catalog::no_universal_set());
        match find_model(&t, &SearchBudget::default()) {
            SearchOutcome::Found(m, _) => {
                assert_eq!(m.size(), 2);
                assert_eq!(m.pairs(), vec![(1, 1)]);
                assert_eq!(m.constant("D+"), Some(1));
                assert_eq!(m.constant("D-"), Some(0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_fixed_point_fragment_has_no_small_model() {
        let t = catalog::fixed_point(&parse("x != x").unwrap())
            .unwrap()
            .fragment;
        match find_model(&t, &SearchBudget::default()) {
            SearchOutcome::SpaceExhausted(stats) => {
                assert_eq!(stats.largest_size_completed, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn russell_has_no_model_anywhere() {
        let t = catalog::named(&Construction::Russell).unwrap();
        assert!(find_model(&t, &SearchBudget::default()).found().is_none());
    }

    #[test]
    fn time_limit_reported_distinctly() {
        let t = catalog::named(&Construction::Russell).unwrap();
        let b = SearchBudget {
            time_limit: Some(Duration::from_nanos(1)),
            ..Default::default()
        };
        assert!(matches!(find_model(&t, &b), SearchOutcome::TimedOut(_)));
    }

    #[test]
    fn beta_corussell_forces_self_membership() {
        // The least model of beta is one where the co-Russell set
        // contains itself (a Quine atom is needed).
        let t = catalog::named(&Construction::BetaCorussell).unwrap();
        let out = find_model(&t, &SearchBudget::default());
        let m = out.found().expect("beta is consistent");
        let self_mem = expand(&catalog::corussell_self_membership());
        assert!(semantics::eval(m, &self_mem, &semantics::Env::new()).unwrap());
    }

    #[test]
    fn corussell_self_membership_is_independent() {
        let t = catalog::named(&Construction::CoRussell).unwrap();
        let phi = catalog::corussell_self_membership();
        match independence(&t, &phi, &SearchBudget::default(), &RefuteBounds::default()) {
            IndependenceVerdict::Independent(mp, mn) => {
                assert_eq!(mp.size(), 1);
                assert_eq!(mn.size(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asserted_axiom_is_decided_positive() {
        let t = catalog::named(&Construction::CoRussell).unwrap();
        let phi = t.axioms[0].formula.clone();
        match independence(&t, &phi, &SearchBudget::default(), &RefuteBounds::default()) {
            IndependenceVerdict::DecidedPositive(_) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_theory_reported_with_certificate() {
        let t = catalog::named(&Construction::Russell).unwrap();
        let phi = catalog::corussell_self_membership();
        match independence(&t, &phi, &SearchBudget::default(), &RefuteBounds::default()) {
            IndependenceVerdict::TheoryInconsistent(c) => {
                assert_eq!(c.propositional_status, "unsat");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn size_neq_one_negative_side_has_model() {
        // BST + size_neq(1) + "the witness is not self-membered".
        let t = catalog::named(&Construction::SizeNeq(1)).unwrap();
        let shape = crate::syntax::classify_uc(&t.axioms[0].formula).unwrap();
        let pos = t.with_axiom(
            "self",
            crate::syntax::exists(
                "y",
                crate::syntax::and(
                    crate::syntax::forall(
                        "x",
                        crate::syntax::iff(
                            crate::syntax::mem(
                                crate::syntax::Term::var("x"),
                                crate::syntax::Term::var("y"),
                            ),
                            shape.body.clone(),
                        ),
                    ),
                    crate::syntax::mem(
                        crate::syntax::Term::var("y"),
                        crate::syntax::Term::var("y"),
                    ),
                ),
            ),
        );
        let neg = t.with_axiom(
            "self",
            crate::syntax::exists(
                "y",
                crate::syntax::and(
                    crate::syntax::forall(
                        "x",
                        crate::syntax::iff(
                            crate::syntax::mem(
                                crate::syntax::Term::var("x"),
                                crate::syntax::Term::var("y"),
                            ),
                            shape.body.clone(),
                        ),
                    ),
                    not(crate::syntax::mem(
                        crate::syntax::Term::var("y"),
                        crate::syntax::Term::var("y"),
                    )),
                ),
            ),
        );
        assert!(find_model(&pos, &SearchBudget::default()).found().is_some());
        assert!(find_model(&neg, &SearchBudget::default()).found().is_some());
    }
}
