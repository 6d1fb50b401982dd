//! Tarskian evaluation of expanded formulas in finite membership
//! structures.
//!
//! Two evaluators are provided: a naive recursive one (the reference) and a
//! relational one that computes, bottom-up, the set of satisfying
//! environment tuples per subformula. The relational evaluator exists
//! because formulas like well-foundedness expand to more than ten nested
//! quantifiers, where the naive `n^q` walk is already infeasible at small
//! universe sizes.

use crate::fragment::TheoryFragment;
use crate::model::FiniteModel;
use crate::syntax::{classify_uc, expand, free_vars, Formula, Term};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("constant `{0}` is not interpreted by the model")]
    UnknownConstant(String),
    #[error("formula contains composite terms; expand first")]
    NotExpanded,
}

pub type Env = BTreeMap<String, usize>;

fn term_value(t: &Term, m: &FiniteModel, env: &Env) -> Result<usize, EvalError> {
    match t {
        Term::Var(v) => env
            .get(v)
            .copied()
            .ok_or_else(|| EvalError::UnboundVariable(v.clone())),
        Term::Const(c) => m
            .constant(c)
            .ok_or_else(|| EvalError::UnknownConstant(c.clone())),
        _ => Err(EvalError::NotExpanded),
    }
}

/// Naive recursive reference evaluator.
pub fn eval_naive(m: &FiniteModel, f: &Formula, env: &Env) -> Result<bool, EvalError> {
    let mut env = env.clone();
    eval_naive_inner(m, f, &mut env)
}

fn eval_naive_inner(m: &FiniteModel, f: &Formula, env: &mut Env) -> Result<bool, EvalError> {
    match f {
        Formula::Mem(a, b) => Ok(m.contains(term_value(a, m, env)?, term_value(b, m, env)?)),
        Formula::Eq(a, b) => Ok(term_value(a, m, env)? == term_value(b, m, env)?),
        Formula::Not(g) => Ok(!eval_naive_inner(m, g, env)?),
        Formula::And(a, b) => Ok(eval_naive_inner(m, a, env)? && eval_naive_inner(m, b, env)?),
        Formula::Or(a, b) => Ok(eval_naive_inner(m, a, env)? || eval_naive_inner(m, b, env)?),
        Formula::Implies(a, b) => {
            Ok(!eval_naive_inner(m, a, env)? || eval_naive_inner(m, b, env)?)
        }
        Formula::Iff(a, b) => Ok(eval_naive_inner(m, a, env)? == eval_naive_inner(m, b, env)?),
        Formula::Forall(v, g) => {
            let saved = env.get(v).copied();
            for e in 0..m.size() {
                env.insert(v.clone(), e);
                let r = eval_naive_inner(m, g, env);
                restore(env, v, saved);
                if !r? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Exists(v, g) => {
            let saved = env.get(v).copied();
            for e in 0..m.size() {
                env.insert(v.clone(), e);
                let r = eval_naive_inner(m, g, env);
                restore(env, v, saved);
                if r? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

fn restore(env: &mut Env, v: &str, saved: Option<usize>) {
    match saved {
        Some(x) => {
            env.insert(v.to_string(), x);
        }
        None => {
            env.remove(v);
        }
    }
}

/// Cost accounting for the relational evaluator: the number of environment
/// tuples examined while combining subformula relations.
#[derive(Debug, Default, Clone, Copy)]
pub struct EvalStats {
    pub tuples_touched: u64,
}

/// A set of satisfying environments over a sorted list of variables.
struct Rel {
    vars: Vec<String>,
    rows: BTreeSet<Vec<usize>>,
}

impl Rel {
    fn sentence(truth: bool) -> Rel {
        let mut rows = BTreeSet::new();
        if truth {
            rows.insert(Vec::new());
        }
        Rel {
            vars: Vec::new(),
            rows,
        }
    }
}

/// Relational (set-at-a-time) evaluator.
pub fn eval(m: &FiniteModel, f: &Formula, env: &Env) -> Result<bool, EvalError> {
    eval_with_stats(m, f, env).map(|(b, _)| b)
}

pub fn eval_with_stats(
    m: &FiniteModel,
    f: &Formula,
    env: &Env,
) -> Result<(bool, EvalStats), EvalError> {
    let mut stats = EvalStats::default();
    let rel = eval_rel(m, f, env, &mut stats)?;
    debug_assert!(rel.vars.is_empty());
    Ok((!rel.rows.is_empty(), stats))
}

/// Enumerates all assignments over `vars` (each ranging over the model),
/// calling `keep` to decide membership.
fn build_rel(
    vars: Vec<String>,
    n: usize,
    stats: &mut EvalStats,
    mut keep: impl FnMut(&[usize]) -> bool,
) -> Rel {
    let k = vars.len();
    let mut rows = BTreeSet::new();
    let mut tuple = vec![0usize; k];
    loop {
        stats.tuples_touched += 1;
        if keep(&tuple) {
            rows.insert(tuple.clone());
        }
        // odometer
        let mut i = k;
        loop {
            if i == 0 {
                return Rel { vars, rows };
            }
            i -= 1;
            tuple[i] += 1;
            if tuple[i] < n {
                break;
            }
            tuple[i] = 0;
        }
    }
}

fn lookup(rel: &Rel, vars: &[String], tuple: &[usize]) -> bool {
    // Project `tuple` (over `vars`) onto rel.vars, then probe.
    let key: Vec<usize> = rel
        .vars
        .iter()
        .map(|v| {
            let idx = vars.iter().position(|w| w == v).expect("var set mismatch");
            tuple[idx]
        })
        .collect();
    rel.rows.contains(&key)
}

fn eval_rel(
    m: &FiniteModel,
    f: &Formula,
    env: &Env,
    stats: &mut EvalStats,
) -> Result<Rel, EvalError> {
    let n = m.size();
    let free: Vec<String> = free_vars(f)
        .into_iter()
        .filter(|v| !env.contains_key(v))
        .collect();
    match f {
        Formula::Mem(a, b) | Formula::Eq(a, b) => {
            let is_mem = matches!(f, Formula::Mem(..));
            // Resolve each side to either a fixed element or a column.
            enum Side {
                Fixed(usize),
                Col(usize),
            }
            let resolve = |t: &Term, vars: &[String]| -> Result<Side, EvalError> {
                match t {
                    Term::Var(v) => {
                        if let Some(&e) = env.get(v) {
                            Ok(Side::Fixed(e))
                        } else {
                            Ok(Side::Col(
                                vars.iter().position(|w| w == v).expect("free var missing"),
                            ))
                        }
                    }
                    Term::Const(c) => Ok(Side::Fixed(
                        m.constant(c)
                            .ok_or_else(|| EvalError::UnknownConstant(c.clone()))?,
                    )),
                    _ => Err(EvalError::NotExpanded),
                }
            };
            let sa = resolve(a, &free)?;
            let sb = resolve(b, &free)?;
            Ok(build_rel(free.clone(), n, stats, |tuple| {
                let va = match sa {
                    Side::Fixed(e) => e,
                    Side::Col(i) => tuple[i],
                };
                let vb = match sb {
                    Side::Fixed(e) => e,
                    Side::Col(i) => tuple[i],
                };
                if is_mem {
                    m.contains(va, vb)
                } else {
                    va == vb
                }
            }))
        }
        Formula::Not(g) => {
            let rg = eval_rel(m, g, env, stats)?;
            Ok(build_rel(free.clone(), n, stats, |tuple| {
                !lookup(&rg, &free, tuple)
            }))
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            let ra = eval_rel(m, a, env, stats)?;
            let rb = eval_rel(m, b, env, stats)?;
            let op: fn(bool, bool) -> bool = match f {
                Formula::And(..) => |x, y| x && y,
                Formula::Or(..) => |x, y| x || y,
                Formula::Implies(..) => |x, y| !x || y,
                Formula::Iff(..) => |x, y| x == y,
                _ => unreachable!(),
            };
            Ok(build_rel(free.clone(), n, stats, |tuple| {
                op(lookup(&ra, &free, tuple), lookup(&rb, &free, tuple))
            }))
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let is_forall = matches!(f, Formula::Forall(..));
            // Evaluate the body with v as a column (shadowing any env
            // binding), then aggregate over v.
            let mut inner_env = env.clone();
            inner_env.remove(v);
            let rg = eval_rel(m, g, &inner_env, stats)?;
            let gvars = rg.vars.clone();
            // Column of v in the body relation, if v occurs at all.
            let vpos = gvars.iter().position(|w| w == v);
            Ok(build_rel(free.clone(), n, stats, |tuple| {
                let probe = |e: usize| {
                    let key: Vec<usize> = gvars
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            if Some(i) == vpos {
                                e
                            } else {
                                let idx = free
                                    .iter()
                                    .position(|u| u == w)
                                    .expect("free var of body missing");
                                tuple[idx]
                            }
                        })
                        .collect();
                    rg.rows.contains(&key)
                };
                if is_forall {
                    (0..n).all(probe)
                } else {
                    (0..n).any(probe)
                }
            }))
        }
    }
}

/// Extensionality check: no two distinct elements share an extension.
/// Returns the least offending pair otherwise.
pub fn is_extensional(m: &FiniteModel) -> Result<(), (usize, usize)> {
    for i in 0..m.size() {
        for j in (i + 1)..m.size() {
            if (0..m.size()).all(|a| m.contains(a, i) == m.contains(a, j)) {
                return Err((i, j));
            }
        }
    }
    Ok(())
}

/// Per-axiom evaluation result inside an [`EvalReport`].
#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub label: String,
    pub holds: bool,
    /// Element chosen for the outermost existential, when the axiom is
    /// existential and true.
    pub witness: Option<usize>,
    pub micros: u128,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Extensionality result; `Err` carries the least counterexample pair.
    pub extensional: Result<(), (usize, usize)>,
    pub checks: Vec<AxiomCheck>,
}

impl EvalReport {
    pub fn pass(&self) -> bool {
        self.extensional.is_ok() && self.checks.iter().all(|c| c.holds)
    }

    pub fn failing_labels(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.label.as_str())
            .collect()
    }
}

/// Evaluates extensionality plus every axiom of the fragment. Axioms are
/// expanded before evaluation.
pub fn check_theory(m: &FiniteModel, t: &TheoryFragment) -> Result<EvalReport, EvalError> {
    let mut checks = Vec::new();
    for ax in &t.axioms {
        let started = Instant::now();
        let f = expand(&ax.formula);
        let holds = eval(m, &f, &Env::new())?;
        let witness = if holds {
            outer_existential_witness(m, &f)?
        } else {
            None
        };
        checks.push(AxiomCheck {
            label: ax.label.clone(),
            holds,
            witness,
            micros: started.elapsed().as_micros(),
        });
    }
    Ok(EvalReport {
        extensional: is_extensional(m),
        checks,
    })
}

fn outer_existential_witness(m: &FiniteModel, f: &Formula) -> Result<Option<usize>, EvalError> {
    let Formula::Exists(v, body) = f else {
        return Ok(None);
    };
    for e in 0..m.size() {
        let mut env = Env::new();
        env.insert(v.clone(), e);
        if eval(m, body, &env)? {
            return Ok(Some(e));
        }
    }
    Ok(None)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("formula is not a comprehension instance")]
    NotUc,
    #[error("model is not extensional")]
    NotExtensional,
    #[error("model does not satisfy the instance (no witness)")]
    NoWitness,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The unique element of an extensional model whose extension equals the
/// comprehension body of a satisfied UC instance.
pub fn witness(m: &FiniteModel, u: &Formula) -> Result<usize, WitnessError> {
    let shape = classify_uc(u).ok_or(WitnessError::NotUc)?;
    if is_extensional(m).is_err() {
        return Err(WitnessError::NotExtensional);
    }
    let body = expand(&shape.body);
    // The denoted set: all elements satisfying the body.
    let mut denoted = Vec::new();
    for e in 0..m.size() {
        let mut env = Env::new();
        env.insert(shape.elem_var.clone(), e);
        // A self-referential body mentions the main variable; such
        // instances have no uniform witness semantics here.
        if free_vars(&body)
            .iter()
            .any(|v| *v != shape.elem_var)
        {
            return Err(WitnessError::NotUc);
        }
        if eval(m, &body, &env)? {
            denoted.push(e);
        }
    }
    for b in 0..m.size() {
        if m.extension(b) == denoted {
            return Ok(b);
        }
    }
    Err(WitnessError::NoWitness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::parser::parse;

    fn ex(s: &str) -> Formula {
        expand(&parse(s).unwrap())
    }

    #[test]
    fn extensionality_examples() {
        assert_eq!(is_extensional(&FiniteModel::new(2)), Err((0, 1)));
        assert!(is_extensional(&FiniteModel::from_pairs(2, &[(0, 0)])).is_ok());
        assert!(is_extensional(&FiniteModel::new(1)).is_ok());
        assert!(is_extensional(&FiniteModel::from_pairs(1, &[(0, 0)])).is_ok());
    }

    #[test]
    fn empty_set_instance_on_singleton() {
        let m = FiniteModel::new(1);
        let f = ex("exists y. forall x. (x in y <-> x != x)");
        assert!(eval(&m, &f, &Env::new()).unwrap());
        assert!(eval_naive(&m, &f, &Env::new()).unwrap());
    }

    #[test]
    fn quine_atom_satisfies_corussell_self_membership() {
        let m = FiniteModel::from_pairs(1, &[(0, 0)]);
        let f = ex("forall y. ((forall x. (x in y <-> x in x)) -> y in y)");
        assert!(eval(&m, &f, &Env::new()).unwrap());
        assert!(eval_naive(&m, &f, &Env::new()).unwrap());
        // ... and the empty-set model falsifies it.
        let m0 = FiniteModel::new(1);
        assert!(!eval(&m0, &f, &Env::new()).unwrap());
    }

    mod equivalence {
        use super::*;
        use proptest::prelude::*;

        fn term_strategy() -> impl Strategy<Value = Term> {
            prop_oneof![
                Just(Term::var("x")),
                Just(Term::var("y")),
                Just(Term::var("z")),
            ]
        }

        fn formula_strategy() -> impl Strategy<Value = Formula> {
            let atom = (term_strategy(), term_strategy(), any::<bool>()).prop_map(
                |(a, b, is_mem)| {
                    if is_mem {
                        Formula::Mem(a, b)
                    } else {
                        Formula::Eq(a, b)
                    }
                },
            );
            atom.prop_recursive(5, 64, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Formula::And(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Formula::Or(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Formula::Implies(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Formula::Iff(Box::new(a), Box::new(b))),
                    (prop_oneof![Just("x"), Just("y"), Just("z")], inner.clone())
                        .prop_map(|(v, f)| Formula::Forall(v.into(), Box::new(f))),
                    (prop_oneof![Just("x"), Just("y"), Just("z")], inner)
                        .prop_map(|(v, f)| Formula::Exists(v.into(), Box::new(f))),
                ]
            })
        }

        fn model_strategy() -> impl Strategy<Value = FiniteModel> {
            (1usize..=4).prop_flat_map(|n| {
                proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
                    let pairs: Vec<(usize, usize)> = (0..n * n)
                        .filter(|&i| bits[i])
                        .map(|i| (i / n, i % n))
                        .collect();
                    FiniteModel::from_pairs(n, &pairs)
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1500))]
            #[test]
            fn relational_matches_naive(
                f in formula_strategy(),
                m in model_strategy(),
                ex in 0usize..4,
                ey in 0usize..4,
                ez in 0usize..4,
            ) {
                let mut env = Env::new();
                env.insert("x".into(), ex % m.size());
                env.insert("y".into(), ey % m.size());
                env.insert("z".into(), ez % m.size());
                prop_assert_eq!(
                    eval(&m, &f, &env).unwrap(),
                    eval_naive(&m, &f, &env).unwrap()
                );
            }
        }
    }

    #[test]
    fn witness_of_corussell() {
        let co = parse("exists y. forall x. (x in y <-> x in x)").unwrap();
        let quine = FiniteModel::from_pairs(1, &[(0, 0)]);
        assert_eq!(witness(&quine, &co).unwrap(), 0);
        let empty = FiniteModel::new(1);
        assert_eq!(witness(&empty, &co).unwrap(), 0);
    }

    #[test]
    fn relational_beats_naive_bound_on_well_founded() {
        let m = catalog::mirimanoff_fixture();
        let f = expand(&catalog::well_founded_formula(false));
        fn quantifiers(f: &Formula) -> u32 {
            match f {
                Formula::Mem(..) | Formula::Eq(..) => 0,
                Formula::Not(g) => quantifiers(g),
                Formula::And(a, b)
                | Formula::Or(a, b)
                | Formula::Implies(a, b)
                | Formula::Iff(a, b) => quantifiers(a) + quantifiers(b),
                Formula::Forall(_, g) | Formula::Exists(_, g) => 1 + quantifiers(g),
            }
        }
        let q = quantifiers(&f);
        assert!(q > 10, "well_founded should be deeply quantified, got {q}");
        let mut env = Env::new();
        env.insert("x".to_string(), 4);
        let (truth, stats) = eval_with_stats(&m, &f, &env).unwrap();
        assert!(!truth);
        let naive_bound = (m.size() as u64).pow(q);
        assert!(
            stats.tuples_touched < naive_bound,
            "{} !< {naive_bound}",
            stats.tuples_touched
        );
    }

    #[test]
    fn mirimanoff_fixture_passes_and_m_not_wellfounded() {
        let m = catalog::mirimanoff_fixture();
        for strict in [false, true] {
            let t = catalog::named(&catalog::Construction::Mirimanoff { strict }).unwrap();
            let report = check_theory(&m, &t).unwrap();
            assert!(report.pass(), "strict={strict}: {report:?}");
        }
        // well_founded(M) is false for the element M (index 4).
        let wf = catalog::well_founded_formula(false);
        let mut env = Env::new();
        env.insert("x".to_string(), 4);
        assert!(!eval(&m, &expand(&wf), &env).unwrap());
        // The mirimanoff witness is element 4.
        let t = catalog::named(&catalog::Construction::Mirimanoff { strict: false }).unwrap();
        assert_eq!(witness(&m, &t.axioms[0].formula).unwrap(), 4);
    }
}
