//! Named comprehension instances and the constructions built from them:
//! the classical paradoxical sets, the paradoxical-group generator,
//! curryization, and the fixed-point constructor.

use crate::fragment::TheoryFragment;
use crate::model::FiniteModel;
use crate::parser::parse;
use crate::syntax::{
    and, classify_uc, eq, exists, expand, forall, free_vars, fresh_name, iff, implies,
    mark_constants, mem, not, or, substitute, Formula, Term,
};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("unknown construction `{0}`")]
    UnknownName(String),
    #[error("construction `{0}` requires parameter {1}")]
    MissingParam(String, &'static str),
    #[error("parameter must be a sentence (free variables: {0:?})")]
    NotSentence(Vec<String>),
    #[error("base formula is not a comprehension instance")]
    NotUc,
    #[error("base instance is self-referential (body mentions the main set)")]
    SelfReferential,
    #[error("paradoxical group size must be positive")]
    EmptyGroup,
    #[error("formula may only have `x` and `y` free (found `{0}`)")]
    BadFixedPointBody(String),
}

/// A named construction, together with its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Construction {
    Russell,
    CoRussell,
    /// Curry-like set for a sentence phi.
    Curry(Formula),
    Universal,
    Empty,
    Mirimanoff {
        /// Use the corrected minimal-element clause (`--wf-strict`).
        strict: bool,
    },
    SizeEq(usize),
    SizeNeq(usize),
    Pair,
    Extract,
    InstanceA,
    InstanceB,
    ZSepar,
    DPlus,
    DMinus,
    BetaCorussell,
}

/// Construction names accepted by `catalog emit`, with parameter notes.
pub fn list() -> Vec<(&'static str, &'static str)> {
    vec![
        ("russell", "the Russell set {x : x notin x}"),
        ("co_russell", "the co-Russell set {x : x in x}"),
        ("curry", "Curry-like set {x : x in x -> phi}; needs a sentence"),
        ("universal", "the universal set {x : x = x}"),
        ("empty", "the empty set {x : x != x}"),
        ("mirimanoff", "the set of well-founded sets; flag: strict"),
        ("size_eq", "{x : |x| = n}; needs n"),
        ("size_neq", "{x : |x| != n}; needs n"),
        ("pair", "pairing, universally closed"),
        ("extract", "extraction a[a], universally closed"),
        ("A", "constant A with x in A <-> exists v,w: x=<v,w> and (w in w or w=v[v])"),
        ("B", "constant B with x in B <-> exists v,w: x=<v,w> and (w in w and w!=v[v])"),
        ("z_separ", "constant Z with x in Z <-> exists v,w: x=<v,w> and w notin v[v]"),
        ("d_plus", "constant D+ with x in D+ <-> (x in x and psi) or x = D+"),
        ("d_minus", "constant D- with x in D- <-> (x in x and psi) and x != D-"),
        ("beta_corussell", "the instance forcing co-Russell self-membership"),
        ("sec4", "combined fragment {pair, extract, A, B, H+, H-}"),
        ("group", "paradoxical group; needs n"),
    ]
}

fn p(s: &str) -> Formula {
    parse(s).unwrap_or_else(|e| panic!("catalog formula failed to parse: {s}: {e}"))
}

fn singleton(name: &str, label: &str, f: Formula) -> TheoryFragment {
    let mut t = TheoryFragment::new(name);
    t.push(label, f);
    t
}

fn with_constants(name: &str, constants: &[&str], axioms: &[(&str, Formula)]) -> TheoryFragment {
    let mut t = TheoryFragment::new(name);
    t.constants = constants.iter().map(|s| s.to_string()).collect();
    let set: BTreeSet<String> = t.constants.iter().cloned().collect();
    for (label, f) in axioms {
        t.push(*label, mark_constants(f, &set));
    }
    t
}

/// "The universal set does not exist" — the sentence used by the classical
/// Curry refutation.
pub fn no_universal_set() -> Formula {
    p("not exists u. forall w. (w in u <-> w = w)")
}

/// "The universal set exists" — the psi of the D+/D- constructions.
pub fn universal_set_exists() -> Formula {
    p("exists u. forall w. (w in u <-> w = w)")
}

/// The sentence asserting the self-membership of the co-Russell set.
pub fn corussell_self_membership() -> Formula {
    p("forall y. ((forall x. (x in y <-> x in x)) -> y in y)")
}

pub fn transitive_formula(v: &str) -> Formula {
    p(&format!(
        "forall y. forall z. ((y in z and z in {v}) -> y in {v})"
    ))
}

pub fn well_ordered_formula(v: &str, strict: bool) -> Formula {
    let minimal = if strict {
        "exists m. (m in s and forall z. (z in s -> z notin m))"
    } else {
        "exists m. forall z. ((m in s and z in s) -> z notin m)"
    };
    p(&format!(
        "forall a. (a in {v} -> a notin a) \
         and forall a. forall b. forall c. (((a in {v} and b in {v}) and c in {v}) \
           -> ((a in b and b in c) -> a in c)) \
         and forall a. forall b. ((a in {v} and b in {v}) -> (a != b -> (a in b or b in a))) \
         and forall s. (s sub {v} -> (s != emptyset -> {minimal}))"
    ))
}

/// well-founded(x): some transitive well-ordered set includes x.
pub fn well_founded_formula(strict: bool) -> Formula {
    let t = and(
        transitive_formula("t"),
        and(well_ordered_formula("t", strict), p("x sub t")),
    );
    exists("t", t)
}

/// The first-order cardinality body: |x| = n, with `x` free.
fn size_body(n: usize) -> Formula {
    if n == 0 {
        return p("forall w. w notin x");
    }
    let names: Vec<String> = (1..=n).map(|i| format!("e{i}")).collect();
    let mut parts: Vec<Formula> = names
        .iter()
        .map(|e| mem(Term::var(e), Term::var("x")))
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            parts.push(not(eq(Term::var(&names[i]), Term::var(&names[j]))));
        }
    }
    let cover = forall(
        "w",
        implies(
            mem(Term::var("w"), Term::var("x")),
            crate::syntax::disj(
                names
                    .iter()
                    .map(|e| eq(Term::var("w"), Term::var(e)))
                    .collect(),
            ),
        ),
    );
    parts.push(cover);
    let body = crate::syntax::conj(parts);
    names
        .iter()
        .rev()
        .fold(body, |acc, e| exists(e.clone(), acc))
}

fn uc(body: Formula) -> Formula {
    exists("y", forall("x", iff(mem(Term::var("x"), Term::var("y")), body)))
}

/// Builds the fragment for a named construction.
pub fn named(c: &Construction) -> Result<TheoryFragment, CatalogError> {
    Ok(match c {
        Construction::Russell => singleton("russell", "russell", p(RUSSELL)),
        Construction::CoRussell => singleton("co_russell", "co_russell", p(CO_RUSSELL)),
        Construction::Curry(phi) => {
            let fv: Vec<String> = free_vars(phi).into_iter().collect();
            if !fv.is_empty() {
                return Err(CatalogError::NotSentence(fv));
            }
            singleton(
                "curry",
                "curry",
                uc(implies(mem(Term::var("x"), Term::var("x")), phi.clone())),
            )
        }
        Construction::Universal => singleton("universal", "universal", p(UNIVERSAL)),
        Construction::Empty => singleton("empty", "empty", p(EMPTY)),
        Construction::Mirimanoff { strict } => singleton(
            "mirimanoff",
            "mirimanoff",
            uc(well_founded_formula(*strict)),
        ),
        Construction::SizeEq(n) => singleton(
            &format!("size_eq_{n}"),
            &format!("size_eq_{n}"),
            uc(size_body(*n)),
        ),
        Construction::SizeNeq(n) => singleton(
            &format!("size_neq_{n}"),
            &format!("size_neq_{n}"),
            uc(not(size_body(*n))),
        ),
        Construction::Pair => singleton("pair", "pair", p(PAIR)),
        Construction::Extract => singleton("extract", "extract", p(EXTRACT)),
        Construction::InstanceA => with_constants("A", &["A"], &[("A", p(INSTANCE_A))]),
        Construction::InstanceB => with_constants("B", &["B"], &[("B", p(INSTANCE_B))]),
        Construction::ZSepar => with_constants("z_separ", &["Z"], &[("z_separ", p(Z_SEPAR))]),
        Construction::DPlus => with_constants("d_plus", &["D+"], &[("d_plus", d_def("D+", true))]),
        Construction::DMinus => {
            with_constants("d_minus", &["D-"], &[("d_minus", d_def("D-", false))])
        }
        Construction::BetaCorussell => {
            let phi = corussell_self_membership();
            let body = and(
                implies(phi.clone(), p("x in x")),
                implies(not(phi), p("x notin x")),
            );
            singleton("beta_corussell", "beta_corussell", uc(body))
        }
    })
}

const RUSSELL: &str = "exists y. forall x. (x in y <-> x notin x)";
const CO_RUSSELL: &str = "exists y. forall x. (x in y <-> x in x)";
const UNIVERSAL: &str = "exists y. forall x. (x in y <-> x = x)";
const EMPTY: &str = "exists y. forall x. (x in y <-> x != x)";
const PAIR: &str = "forall a. forall b. exists y. forall x. (x in y <-> (x = a or x = b))";
const EXTRACT: &str =
    "forall a. exists y. forall x. (x in y <-> exists z. (z = opair(a,x) and z in a))";
const INSTANCE_A: &str =
    "forall x. (x in A <-> exists v. exists w. (x = opair(v,w) and (w in w or w = extr(v))))";
const INSTANCE_B: &str =
    "forall x. (x in B <-> exists v. exists w. (x = opair(v,w) and (w in w and w != extr(v))))";
const Z_SEPAR: &str =
    "forall x. (x in Z <-> exists v. exists w. (x = opair(v,w) and w notin extr(v)))";

fn d_def(name: &str, plus: bool) -> Formula {
    let base = and(p("x in x"), universal_set_exists());
    let tail = if plus {
        eq(Term::var("x"), Term::var(name))
    } else {
        not(eq(Term::var("x"), Term::var(name)))
    };
    let body = if plus { or(base, tail) } else { and(base, tail) };
    forall("x", iff(mem(Term::var("x"), Term::var(name)), body))
}

/// The combined fragment behind the co-Russell paradox: pairing,
/// extraction, the instances A and B, and the constants H+ = A[A] and
/// H- = B[B].
pub fn sec4() -> TheoryFragment {
    let mut t = with_constants(
        "sec4",
        &["A", "B", "H+", "H-"],
        &[
            ("A", p(INSTANCE_A)),
            ("B", p(INSTANCE_B)),
            ("hplus_def", p("H+ = extr(A)")),
            ("hminus_def", p("H- = extr(B)")),
        ],
    );
    t.axioms.insert(0, crate::fragment::Axiom {
        label: "pair".into(),
        formula: p(PAIR),
    });
    t.axioms.insert(1, crate::fragment::Axiom {
        label: "extract".into(),
        formula: p(EXTRACT),
    });
    t
}

/// Removes the initial existential of a comprehension instance and reads
/// it as a predicate of `var`: `forall z. (z in var <-> body(z))`.
fn open_instance(alpha: &Formula, var: &str) -> Formula {
    let shape = classify_uc(alpha).expect("group members are comprehension instances");
    let mut used = alpha.all_vars();
    used.insert(var.to_string());
    let z = fresh_name("z", &used);
    let body = substitute(&shape.body, &shape.elem_var, &Term::var(&z));
    forall(
        z.clone(),
        iff(mem(Term::var(&z), Term::var(var)), body),
    )
}

/// The size-n paradoxical group: alpha_0 .. alpha_{n-2} assert the
/// ordinals 0..n-2 (or, failing that, the universal set), and beta asserts
/// the Russell set conditional on all of them.
pub fn paradoxical_group(n: usize) -> Result<TheoryFragment, CatalogError> {
    if n == 0 {
        return Err(CatalogError::EmptyGroup);
    }
    if n == 1 {
        let mut t = singleton("group1", "russell", p(RUSSELL));
        t.name = "group1".into();
        return Ok(t);
    }
    let mut alphas: Vec<Formula> = vec![p(EMPTY)];
    for _k in 1..=(n - 2) {
        let guard = crate::syntax::conj(alphas.clone());
        let cases = crate::syntax::disj(
            alphas.iter().map(|a| open_instance(a, "x")).collect(),
        );
        alphas.push(uc(implies(guard, cases)));
    }
    let guard = crate::syntax::conj(alphas.clone());
    let beta = uc(implies(guard, p("x notin x")));
    let mut t = TheoryFragment::new(format!("group{n}"));
    for (k, a) in alphas.into_iter().enumerate() {
        t.push(format!("alpha{k}"), a);
    }
    t.push("beta", beta);
    Ok(t)
}

/// The curryized instance of a base comprehension instance under a
/// sentence psi: `{x : (psi -> phi(x)) and (not psi -> x notin x)}`.
pub fn curryize(psi: &Formula, base: &Formula) -> Result<Formula, CatalogError> {
    let fv: Vec<String> = free_vars(psi).into_iter().collect();
    if !fv.is_empty() {
        return Err(CatalogError::NotSentence(fv));
    }
    let shape = classify_uc(base).ok_or(CatalogError::NotUc)?;
    if shape.self_referential {
        return Err(CatalogError::SelfReferential);
    }
    let x = shape.elem_var.clone();
    let body = and(
        implies(psi.clone(), shape.body.clone()),
        implies(
            not(psi.clone()),
            not(mem(Term::var(&x), Term::var(&x))),
        ),
    );
    Ok(exists(
        shape.main_var.clone(),
        forall(
            x.clone(),
            iff(mem(Term::var(&x), Term::var(&shape.main_var)), body),
        ),
    ))
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub fragment: TheoryFragment,
    /// The constant denoting the fixed point (A_phi2 = A_phi[A_phi]).
    pub fixpoint_constant: String,
    /// psi(x) := x in A_phi2; y is not free in psi.
    pub psi: Formula,
    /// forall x. (x in A_phi2 <-> phi(x, A_phi2))
    pub equivalence: Formula,
}

/// The fixed-point construction for a formula phi(x, y): builds the
/// phi-separation instance, names its main set A_phi, and extracts
/// A_phi2 = A_phi[A_phi], which satisfies x in A_phi2 <-> phi(x, A_phi2).
pub fn fixed_point(phi: &Formula) -> Result<FixedPointResult, CatalogError> {
    for v in free_vars(phi) {
        if v != "x" && v != "y" {
            return Err(CatalogError::BadFixedPointBody(v));
        }
    }
    let mut used = phi.all_vars();
    used.insert("x".into());
    let v = fresh_name("v", &used);
    used.insert(v.clone());
    let w = fresh_name("w", &used);
    // phi(w, v[v])
    let inst = substitute(
        &substitute(phi, "x", &Term::var(&w)),
        "y",
        &Term::Extr(Box::new(Term::var(&v))),
    );
    let separ = forall(
        "x",
        iff(
            mem(Term::var("x"), Term::var("A_phi")),
            exists(
                v.clone(),
                exists(
                    w.clone(),
                    and(
                        eq(
                            Term::var("x"),
                            Term::Opair(Box::new(Term::var(&v)), Box::new(Term::var(&w))),
                        ),
                        inst,
                    ),
                ),
            ),
        ),
    );
    let a2_def = expand(&eq(
        Term::var("A_phi2"),
        Term::Extr(Box::new(Term::var("A_phi"))),
    ));
    let fragment = {
        let mut t = with_constants(
            "fixed_point",
            &["A_phi", "A_phi2"],
            &[("separ", separ), ("a2_def", a2_def)],
        );
        t.axioms.insert(0, crate::fragment::Axiom {
            label: "pair".into(),
            formula: p(PAIR),
        });
        t.axioms.insert(1, crate::fragment::Axiom {
            label: "extract".into(),
            formula: p(EXTRACT),
        });
        t
    };
    let a2 = Term::cons("A_phi2");
    let psi = mem(Term::var("x"), a2.clone());
    let equivalence = forall(
        "x",
        iff(
            mem(Term::var("x"), a2.clone()),
            mark_constants(
                &substitute(phi, "y", &Term::var("A_phi2")),
                &["A_phi", "A_phi2"].iter().map(|s| s.to_string()).collect(),
            ),
        ),
    );
    Ok(FixedPointResult {
        fragment,
        fixpoint_constant: "A_phi2".into(),
        psi,
        equivalence,
    })
}

/// The five-element structure from the Mirimanoff non-paradoxicality
/// argument: 0 = {}, 1 = {0}, 2 = {0,1}, 3 = {1}, 4 = M = {0,1,2,3}.
pub fn mirimanoff_fixture() -> FiniteModel {
    let mut m = FiniteModel::from_pairs(
        5,
        &[(0, 1), (0, 2), (1, 2), (1, 3), (0, 4), (1, 4), (2, 4), (3, 4)],
    );
    m.constants.insert("M".into(), 4);
    m
}

/// The one-element model whose single element is a Quine atom.
pub fn quine_atom_model() -> FiniteModel {
    FiniteModel::from_pairs(1, &[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::alpha_eq;

    #[test]
    fn golden_instances() {
        assert_eq!(
            named(&Construction::Russell).unwrap().axioms[0]
                .formula
                .to_string(),
            "exists y. forall x. (x in y <-> not x in x)"
        );
        assert_eq!(
            named(&Construction::Pair).unwrap().axioms[0]
                .formula
                .to_string(),
            "forall a. forall b. exists y. forall x. (x in y <-> (x = a or x = b))"
        );
    }

    #[test]
    fn every_fragment_validates_and_expands() {
        let mut all = vec![
            named(&Construction::Russell).unwrap(),
            named(&Construction::CoRussell).unwrap(),
            named(&Construction::Curry(no_universal_set())).unwrap(),
            named(&Construction::Universal).unwrap(),
            named(&Construction::Empty).unwrap(),
            named(&Construction::Mirimanoff { strict: false }).unwrap(),
            named(&Construction::Mirimanoff { strict: true }).unwrap(),
            named(&Construction::SizeEq(0)).unwrap(),
            named(&Construction::SizeEq(2)).unwrap(),
            named(&Construction::SizeNeq(1)).unwrap(),
            named(&Construction::Pair).unwrap(),
            named(&Construction::Extract).unwrap(),
            named(&Construction::InstanceA).unwrap(),
            named(&Construction::InstanceB).unwrap(),
            named(&Construction::ZSepar).unwrap(),
            named(&Construction::DPlus).unwrap(),
            named(&Construction::DMinus).unwrap(),
            named(&Construction::BetaCorussell).unwrap(),
            sec4(),
        ];
        for n in 1..=3 {
            all.push(paradoxical_group(n).unwrap());
        }
        all.push(fixed_point(&p("x notin y")).unwrap().fragment);
        for t in &all {
            t.validate().unwrap_or_else(|e| panic!("{}: {e}", t.name));
            for ax in &t.axioms {
                let e = expand(&ax.formula);
                assert!(e.is_expanded(), "{}/{}", t.name, ax.label);
                // Round-trip through the printer.
                let back = parse(&ax.formula.to_string()).unwrap();
                let set: BTreeSet<String> = t.constants.iter().cloned().collect();
                assert_eq!(mark_constants(&back, &set), ax.formula);
            }
        }
    }

    #[test]
    fn uc_axioms_classify() {
        for c in [
            Construction::Russell,
            Construction::CoRussell,
            Construction::Universal,
            Construction::Empty,
            Construction::SizeEq(1),
            Construction::BetaCorussell,
        ] {
            let t = named(&c).unwrap();
            assert_eq!(t.uc_instances().len(), 1, "{:?}", c);
        }
        let g = paradoxical_group(3).unwrap();
        assert_eq!(g.uc_instances().len(), 3);
    }

    #[test]
    fn group_two_matches_paper_shape() {
        let g = paradoxical_group(2).unwrap();
        assert_eq!(g.axioms.len(), 2);
        assert_eq!(g.axioms[0].label, "alpha0");
        assert_eq!(g.axioms[1].label, "beta");
        assert_eq!(
            g.axioms[1].formula.to_string(),
            "exists y. forall x. (x in y <-> \
             ((exists y. forall x. (x in y <-> not x = x)) -> not x in x))"
        );
    }

    #[test]
    fn curryize_shape() {
        let base = p(EMPTY);
        let out = curryize(&p("forall a. a = a"), &base).unwrap();
        assert_eq!(
            out.to_string(),
            "exists y. forall x. (x in y <-> \
             (((forall a. a = a) -> not x = x) and (not (forall a. a = a) -> not x in x)))"
        );
        assert!(curryize(&p("a = a"), &base).is_err());
        assert!(curryize(&p("forall a. a = a"), &p("a in b")).is_err());
    }

    #[test]
    fn sec4_is_union_of_fixed_points() {
        // Compare at the variable level (constants rendered back to
        // identifiers) after renaming the fixed-point constants.
        fn norm(f: &Formula, renames: &[(&str, &str)]) -> Formula {
            let mut g = parse(&f.to_string()).unwrap();
            for (from, to) in renames {
                g = substitute(&g, from, &Term::var(*to));
            }
            expand(&g)
        }
        let plus = fixed_point(&p("x in x or x = y")).unwrap();
        let minus = fixed_point(&p("x in x and x != y")).unwrap();
        let s4 = sec4();
        for (fp, inst, def, cname, hname) in [
            (&plus, "A", "hplus_def", "A", "H+"),
            (&minus, "B", "hminus_def", "B", "H-"),
        ] {
            let renames = [("A_phi", cname), ("A_phi2", hname)];
            assert!(alpha_eq(
                &norm(&fp.fragment.axiom("separ").unwrap().formula, &renames),
                &norm(&s4.axiom(inst).unwrap().formula, &[]),
            ));
            assert!(alpha_eq(
                &norm(&fp.fragment.axiom("a2_def").unwrap().formula, &renames),
                &norm(&s4.axiom(def).unwrap().formula, &[]),
            ));
            assert!(alpha_eq(
                &norm(&fp.fragment.axiom("pair").unwrap().formula, &[]),
                &norm(&s4.axiom("pair").unwrap().formula, &[]),
            ));
        }
    }

    #[test]
    fn fixed_point_equivalence_instantiates() {
        let fp = fixed_point(&p("x in x or x = y")).unwrap();
        assert_eq!(
            fp.equivalence.to_string(),
            "forall x. (x in A_phi2 <-> (x in x or x = A_phi2))"
        );
        assert_eq!(fp.psi.to_string(), "x in A_phi2");
        assert_eq!(free_vars(&fp.psi), ["x".to_string()].into_iter().collect());
        assert!(fixed_point(&p("x in z")).is_err());
    }

    #[test]
    fn group_zero_rejected() {
        assert!(paradoxical_group(0).is_err());
        assert_eq!(paradoxical_group(1).unwrap().axioms[0].label, "russell");
    }
}
