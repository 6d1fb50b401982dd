//! Clausification: negation normal form, miniscoping, Skolemization and
//! distribution to CNF, over expanded (composite-free) sentences.

use super::{Clause, ClauseSet, FTerm, GAtom, Lit, SkolemEntry};
use crate::fragment::TheoryFragment;
use crate::syntax::{expand, fresh_name, Formula, Term};
use std::collections::{BTreeMap, BTreeSet};

/// Quantified negation normal form over first-order terms.
enum Nnf {
    Lit(Lit),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    Forall(String, Box<Nnf>),
    Exists(String, Box<Nnf>),
}

fn fterm(t: &Term, bound: &BTreeMap<String, String>) -> FTerm {
    match t {
        Term::Var(v) => match bound.get(v) {
            Some(name) => FTerm::Var(name.clone()),
            // A free identifier at this point is a constant by construction
            // (fragments are validated to be sentences over their signature).
            None => FTerm::Fun(v.clone(), Vec::new()),
        },
        Term::Const(c) => FTerm::Fun(c.clone(), Vec::new()),
        _ => panic!("clausify requires expanded formulas"),
    }
}

/// Builds NNF while renaming binders apart. `bound` maps source binder
/// names to their unique replacements.
fn nnf(
    f: &Formula,
    pol: bool,
    bound: &mut BTreeMap<String, String>,
    used: &mut BTreeSet<String>,
) -> Nnf {
    match f {
        Formula::Mem(a, b) => Nnf::Lit(Lit {
            pos: pol,
            atom: GAtom::Mem(fterm(a, bound), fterm(b, bound)),
        }),
        Formula::Eq(a, b) => Nnf::Lit(Lit {
            pos: pol,
            atom: GAtom::Eq(fterm(a, bound), fterm(b, bound)),
        }),
        Formula::Not(g) => nnf(g, !pol, bound, used),
        Formula::And(a, b) => {
            let xs = vec![nnf(a, pol, bound, used), nnf(b, pol, bound, used)];
            if pol {
                Nnf::And(xs)
            } else {
                Nnf::Or(xs)
            }
        }
        Formula::Or(a, b) => {
            let xs = vec![nnf(a, pol, bound, used), nnf(b, pol, bound, used)];
            if pol {
                Nnf::Or(xs)
            } else {
                Nnf::And(xs)
            }
        }
        Formula::Implies(a, b) => {
            let xs = vec![nnf(a, !pol, bound, used), nnf(b, pol, bound, used)];
            if pol {
                Nnf::Or(xs)
            } else {
                // not (a -> b) = a and not b
                Nnf::And(xs)
            }
        }
        Formula::Iff(a, b) => {
            // pol:  (!a or b) and (a or !b); !pol: (a or b) and (!a or !b)
            let pos = Nnf::Or(vec![nnf(a, !pol, bound, used), nnf(b, true, bound, used)]);
            let neg = Nnf::Or(vec![nnf(a, pol, bound, used), nnf(b, false, bound, used)]);
            Nnf::And(vec![pos, neg])
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            let fresh = fresh_name(v, used);
            used.insert(fresh.clone());
            let saved = bound.insert(v.clone(), fresh.clone());
            let body = nnf(g, pol, bound, used);
            match saved {
                Some(s) => {
                    bound.insert(v.clone(), s);
                }
                None => {
                    bound.remove(v);
                }
            }
            let is_forall = matches!(f, Formula::Forall(..)) == pol;
            if is_forall {
                Nnf::Forall(fresh, Box::new(body))
            } else {
                Nnf::Exists(fresh, Box::new(body))
            }
        }
    }
}

fn term_has_var(t: &FTerm, v: &str) -> bool {
    match t {
        FTerm::Var(x) => x == v,
        FTerm::Fun(_, args) => args.iter().any(|a| term_has_var(a, v)),
    }
}

fn has_var(n: &Nnf, v: &str) -> bool {
    match n {
        Nnf::Lit(l) => match &l.atom {
            GAtom::Mem(a, b) | GAtom::Eq(a, b) => term_has_var(a, v) || term_has_var(b, v),
            GAtom::Prop(_) => false,
        },
        Nnf::And(xs) | Nnf::Or(xs) => xs.iter().any(|x| has_var(x, v)),
        Nnf::Forall(w, b) | Nnf::Exists(w, b) => w != v && has_var(b, v),
    }
}

/// Pushes quantifiers inward: across matching junctions, and onto the
/// juncts that actually mention the variable otherwise.
fn miniscope(n: Nnf) -> Nnf {
    match n {
        Nnf::Lit(_) => n,
        Nnf::And(xs) => Nnf::And(xs.into_iter().map(miniscope).collect()),
        Nnf::Or(xs) => Nnf::Or(xs.into_iter().map(miniscope).collect()),
        q @ (Nnf::Forall(..) | Nnf::Exists(..)) => {
            let (is_forall, v, b) = match q {
                Nnf::Forall(v, b) => (true, v, b),
                Nnf::Exists(v, b) => (false, v, b),
                _ => unreachable!(),
            };
            let body = miniscope(*b);
            let wrap = |x: Nnf| {
                if is_forall {
                    Nnf::Forall(v.clone(), Box::new(x))
                } else {
                    Nnf::Exists(v.clone(), Box::new(x))
                }
            };
            if !has_var(&body, &v) {
                return body;
            }
            match body {
                // forall distributes over and, exists over or.
                Nnf::And(xs) if is_forall => {
                    Nnf::And(xs.into_iter().map(|x| miniscope(wrap(x))).collect())
                }
                Nnf::Or(xs) if !is_forall => {
                    Nnf::Or(xs.into_iter().map(|x| miniscope(wrap(x))).collect())
                }
                // Otherwise confine the quantifier to the juncts that
                // mention the variable. Only exists-over-and and
                // forall-over-or reach this point, so the junction kind is
                // determined by the quantifier.
                Nnf::And(xs) | Nnf::Or(xs) => {
                    let conj = !is_forall;
                    let (with, without): (Vec<Nnf>, Vec<Nnf>) =
                        xs.into_iter().partition(|x| has_var(x, &v));
                    if without.is_empty() {
                        let inner = if conj { Nnf::And(with) } else { Nnf::Or(with) };
                        wrap(inner)
                    } else {
                        let inner = if with.len() == 1 {
                            with.into_iter().next().unwrap()
                        } else if conj {
                            Nnf::And(with)
                        } else {
                            Nnf::Or(with)
                        };
                        let mut parts = vec![miniscope(wrap(inner))];
                        parts.extend(without);
                        if conj {
                            Nnf::And(parts)
                        } else {
                            Nnf::Or(parts)
                        }
                    }
                }
                other => wrap(other),
            }
        }
    }
}

fn subst_term(t: &FTerm, v: &str, r: &FTerm) -> FTerm {
    match t {
        FTerm::Var(x) if x == v => r.clone(),
        FTerm::Var(_) => t.clone(),
        FTerm::Fun(f, args) => FTerm::Fun(
            f.clone(),
            args.iter().map(|a| subst_term(a, v, r)).collect(),
        ),
    }
}

fn subst_nnf(n: &mut Nnf, v: &str, r: &FTerm) {
    match n {
        Nnf::Lit(l) => match &mut l.atom {
            GAtom::Mem(a, b) | GAtom::Eq(a, b) => {
                *a = subst_term(a, v, r);
                *b = subst_term(b, v, r);
            }
            GAtom::Prop(_) => {}
        },
        Nnf::And(xs) | Nnf::Or(xs) => xs.iter_mut().for_each(|x| subst_nnf(x, v, r)),
        Nnf::Forall(w, b) | Nnf::Exists(w, b) => {
            if w != v {
                subst_nnf(b, v, r);
            }
        }
    }
}

struct Skolemizer<'a> {
    label: String,
    counter: usize,
    map: &'a mut BTreeMap<String, SkolemEntry>,
}

impl Skolemizer<'_> {
    fn fresh(&mut self, source_var: &str, args: &[String]) -> String {
        let base: String = self
            .label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        loop {
            let name = format!("sk_{base}_{}", self.counter);
            self.counter += 1;
            if !self.map.contains_key(&name) {
                self.map.insert(
                    name.clone(),
                    SkolemEntry {
                        arity: args.len(),
                        source: format!("{}: exists {source_var}", self.label),
                    },
                );
                return name;
            }
        }
    }

    /// Replaces existentials by Skolem applications of the in-scope
    /// universals that occur in the body, and drops universal binders.
    fn run(&mut self, n: Nnf, univ: &mut Vec<String>) -> Nnf {
        match n {
            Nnf::Lit(_) => n,
            Nnf::And(xs) => Nnf::And(xs.into_iter().map(|x| self.run(x, univ)).collect()),
            Nnf::Or(xs) => Nnf::Or(xs.into_iter().map(|x| self.run(x, univ)).collect()),
            Nnf::Forall(v, b) => {
                univ.push(v.clone());
                let body = self.run(*b, univ);
                univ.pop();
                Nnf::Forall(v, Box::new(body))
            }
            Nnf::Exists(v, b) => {
                let mut body = *b;
                let deps: Vec<String> =
                    univ.iter().filter(|u| has_var(&body, u)).cloned().collect();
                let name = self.fresh(&v, &deps);
                let app = FTerm::Fun(name, deps.into_iter().map(FTerm::Var).collect());
                subst_nnf(&mut body, &v, &app);
                self.run(body, univ)
            }
        }
    }
}

/// CNF distribution over a Skolemized matrix (universals still present as
/// binders; they are simply stripped).
fn cnf(n: &Nnf, out: &mut Vec<Vec<Lit>>) {
    fn clauses(n: &Nnf) -> Vec<Vec<Lit>> {
        match n {
            Nnf::Lit(l) => vec![vec![l.clone()]],
            Nnf::Forall(_, b) | Nnf::Exists(_, b) => clauses(b),
            Nnf::And(xs) => xs.iter().flat_map(clauses).collect(),
            Nnf::Or(xs) => {
                let mut acc: Vec<Vec<Lit>> = vec![Vec::new()];
                for x in xs {
                    let cx = clauses(x);
                    let mut next = Vec::with_capacity(acc.len() * cx.len());
                    for a in &acc {
                        for c in &cx {
                            let mut merged = a.clone();
                            merged.extend(c.iter().cloned());
                            next.push(merged);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }
    out.extend(clauses(n));
}

fn literal_vars(lits: &[Lit], out: &mut BTreeSet<String>) {
    fn term_vars(t: &FTerm, out: &mut BTreeSet<String>) {
        match t {
            FTerm::Var(v) => {
                out.insert(v.clone());
            }
            FTerm::Fun(_, args) => args.iter().for_each(|a| term_vars(a, out)),
        }
    }
    for l in lits {
        match &l.atom {
            GAtom::Mem(a, b) | GAtom::Eq(a, b) => {
                term_vars(a, out);
                term_vars(b, out);
            }
            GAtom::Prop(_) => {}
        }
    }
}

/// Groups a clause's literals into variable-connected components (all
/// ground literals form one component). Components can be quantified
/// independently, so keeping them in one clause only multiplies the
/// grounding cost.
fn components(lits: &[Lit]) -> Vec<Vec<Lit>> {
    let vars_of = |l: &Lit| {
        let mut vs = BTreeSet::new();
        literal_vars(std::slice::from_ref(l), &mut vs);
        vs
    };
    let mut groups: Vec<(BTreeSet<String>, Vec<Lit>)> = Vec::new();
    let mut ground: Vec<Lit> = Vec::new();
    for l in lits {
        let vs = vars_of(l);
        if vs.is_empty() {
            ground.push(l.clone());
            continue;
        }
        let mut merged: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(_, (gv, _))| !gv.is_disjoint(&vs))
            .map(|(i, _)| i)
            .collect();
        match merged.first().copied() {
            None => groups.push((vs, vec![l.clone()])),
            Some(first) => {
                groups[first].0.extend(vs);
                groups[first].1.push(l.clone());
                // Merge any later groups this literal connects.
                while merged.len() > 1 {
                    let i = merged.pop().unwrap();
                    let (gv, gl) = groups.remove(i);
                    groups[first].0.extend(gv);
                    groups[first].1.extend(gl);
                }
            }
        }
    }
    let mut out: Vec<Vec<Lit>> = Vec::new();
    if !ground.is_empty() {
        out.push(ground);
    }
    out.extend(groups.into_iter().map(|(_, g)| g));
    out
}

fn occurs(v: &str, t: &FTerm) -> bool {
    match t {
        FTerm::Var(n) => n == v,
        FTerm::Fun(_, args) => args.iter().any(|a| occurs(v, a)),
    }
}

/// Applies destructive equality resolution until fixpoint, keeping the
/// literal list deduplicated. Returns `None` when the clause becomes a
/// tautology.
fn equality_resolve(mut lits: Vec<Lit>) -> Option<Vec<Lit>> {
    loop {
        let mut target: Option<(usize, String, FTerm)> = None;
        for (i, l) in lits.iter().enumerate() {
            if l.pos {
                continue;
            }
            if let GAtom::Eq(a, b) = &l.atom {
                if let FTerm::Var(v) = a {
                    if !occurs(v, b) {
                        target = Some((i, v.clone(), b.clone()));
                        break;
                    }
                }
                if let FTerm::Var(v) = b {
                    if !occurs(v, a) {
                        target = Some((i, v.clone(), a.clone()));
                        break;
                    }
                }
                // `x != x` is false and can simply be dropped.
                if a == b {
                    target = Some((i, String::new(), a.clone()));
                    break;
                }
            }
        }
        let (i, v, r) = match target {
            Some(t) => t,
            None => return Some(lits),
        };
        lits.remove(i);
        if !v.is_empty() {
            for l in &mut lits {
                l.atom = match &l.atom {
                    GAtom::Mem(a, b) => GAtom::Mem(subst_term(a, &v, &r), subst_term(b, &v, &r)),
                    GAtom::Eq(a, b) => GAtom::Eq(subst_term(a, &v, &r), subst_term(b, &v, &r)),
                    p @ GAtom::Prop(_) => p.clone(),
                };
            }
        }
        // Re-deduplicate and re-check for tautology after substitution.
        let mut seen: Vec<Lit> = Vec::new();
        for l in lits {
            if seen.iter().any(|s| s.pos != l.pos && s.atom == l.atom) {
                return None;
            }
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        lits = seen;
    }
}

/// Clausifies one labelled axiom, appending to the clause set.
fn clausify_axiom(label: &str, f: &Formula, set: &mut ClauseSet, template: bool) {
    let g = expand(f);
    let mut bound = BTreeMap::new();
    // Binders keep their names unless they clash with a constant or an
    // earlier binder; later duplicates are renamed apart.
    let mut used: BTreeSet<String> = g.constants();
    let n = nnf(&g, true, &mut bound, &mut used);
    let n = miniscope(n);
    let mut sk = Skolemizer {
        label: label.to_string(),
        counter: 0,
        map: &mut set.skolem_map,
    };
    let n = sk.run(n, &mut Vec::new());
    let mut raw = Vec::new();
    cnf(&n, &mut raw);
    let mut k = 0;
    let mut sp_counter = 0usize;
    for lits in raw {
        // Deduplicate literals; drop tautological clauses.
        let mut seen: Vec<Lit> = Vec::new();
        let mut taut = false;
        for l in lits {
            if seen.iter().any(|s| s.pos != l.pos && s.atom == l.atom) {
                taut = true;
                break;
            }
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        if taut {
            continue;
        }
        // Destructive equality resolution: a literal `x != t` with `x` a
        // variable not occurring in `t` is resolved away by substituting
        // `x := t` in the rest of the clause (equivalent modulo the
        // equality axioms, which the grounding engine supplies).
        let seen = match equality_resolve(seen) {
            Some(s) => s,
            None => continue, // became tautological
        };
        // Split variable-disjoint components apart, linked by a chain of
        // fresh propositional atoms: forall(C1 v C2) with disjoint
        // variables is forall(C1) v forall(C2), which is equivalent to
        // (C1 v p) and (C2 v -p).
        let mut parts = components(&seen);
        let total_vars = {
            let mut vs = BTreeSet::new();
            literal_vars(&seen, &mut vs);
            vs.len()
        };
        if parts.len() < 2 || total_vars < 2 {
            parts = vec![seen];
        }
        let n_parts = parts.len();
        for (i, mut lits) in parts.into_iter().enumerate() {
            if i > 0 {
                lits.push(Lit {
                    pos: false,
                    atom: GAtom::Prop(format!("sp_{label}_{}", sp_counter + i - 1)),
                });
            }
            if i + 1 < n_parts {
                lits.push(Lit {
                    pos: true,
                    atom: GAtom::Prop(format!("sp_{label}_{}", sp_counter + i)),
                });
            }
            let mut vars = BTreeSet::new();
            literal_vars(&lits, &mut vars);
            set.clauses.push(Clause {
                label: format!("{label}#{k}"),
                axiom: label.to_string(),
                lits,
                vars: vars.into_iter().collect(),
                template,
            });
            k += 1;
        }
        sp_counter += n_parts - 1;
    }
}

const EXTEN: &str = "forall y. forall z. ((forall x. (x in y <-> x in z)) -> y = z)";

fn v(n: &str) -> FTerm {
    FTerm::Var(n.to_string())
}

/// The equality templates: reflexivity, symmetry, transitivity, the two
/// membership congruences, and one congruence per Skolem function. These
/// are instantiated lazily by the grounding engine but are ordinary
/// clauses for certificate purposes.
fn equality_templates(set: &mut ClauseSet) {
    let mk = |label: &str, lits: Vec<Lit>| {
        let mut vars = BTreeSet::new();
        literal_vars(&lits, &mut vars);
        Clause {
            label: format!("{label}#0"),
            axiom: label.to_string(),
            lits,
            vars: vars.into_iter().collect(),
            template: true,
        }
    };
    let pos = |atom: GAtom| Lit { pos: true, atom };
    let neg = |atom: GAtom| Lit { pos: false, atom };
    set.clauses.push(mk("eq_refl", vec![pos(GAtom::Eq(v("x"), v("x")))]));
    set.clauses.push(mk(
        "eq_symm",
        vec![neg(GAtom::Eq(v("x"), v("y"))), pos(GAtom::Eq(v("y"), v("x")))],
    ));
    set.clauses.push(mk(
        "eq_trans",
        vec![
            neg(GAtom::Eq(v("x"), v("y"))),
            neg(GAtom::Eq(v("y"), v("z"))),
            pos(GAtom::Eq(v("x"), v("z"))),
        ],
    ));
    set.clauses.push(mk(
        "eq_meml",
        vec![
            neg(GAtom::Eq(v("x"), v("y"))),
            neg(GAtom::Mem(v("x"), v("z"))),
            pos(GAtom::Mem(v("y"), v("z"))),
        ],
    ));
    set.clauses.push(mk(
        "eq_memr",
        vec![
            neg(GAtom::Eq(v("x"), v("y"))),
            neg(GAtom::Mem(v("z"), v("x"))),
            pos(GAtom::Mem(v("z"), v("y"))),
        ],
    ));
    // Function congruence for every Skolem function of positive arity.
    let fns: Vec<(String, usize)> = set
        .skolem_map
        .iter()
        .filter(|(_, e)| e.arity > 0)
        .map(|(n, e)| (n.clone(), e.arity))
        .collect();
    for (name, arity) in fns {
        let xs: Vec<FTerm> = (0..arity).map(|i| v(&format!("x{i}"))).collect();
        let ys: Vec<FTerm> = (0..arity).map(|i| v(&format!("y{i}"))).collect();
        let mut lits: Vec<Lit> = (0..arity)
            .map(|i| neg(GAtom::Eq(xs[i].clone(), ys[i].clone())))
            .collect();
        lits.push(pos(GAtom::Eq(
            FTerm::Fun(name.clone(), xs),
            FTerm::Fun(name.clone(), ys),
        )));
        set.clauses.push(mk(&format!("eq_fn_{name}"), lits));
    }
}

/// Clausifies the fragment together with the implicit basic-set-theory
/// axioms: extensionality and the equality templates.
pub fn clausify(t: &TheoryFragment) -> ClauseSet {
    let mut set = ClauseSet {
        clauses: Vec::new(),
        skolem_map: BTreeMap::new(),
        constants: t.constants.clone(),
    };
    for ax in &t.axioms {
        clausify_axiom(&ax.label, &ax.formula, &mut set, false);
    }
    clausify_axiom(
        "exten",
        &crate::parser::parse(EXTEN).unwrap(),
        &mut set,
        false,
    );
    equality_templates(&mut set);
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Construction};

    #[test]
    fn russell_clauses_match_hand_cnf() {
        let t = catalog::named(&Construction::Russell).unwrap();
        let set = clausify(&t);
        let rs: Vec<&Clause> = set.clauses.iter().filter(|c| c.axiom == "russell").collect();
        assert_eq!(rs.len(), 2);
        let rendered: Vec<String> = rs.iter().map(|c| c.render()).collect();
        assert_eq!(
            rendered,
            vec![
                "-(x in sk_russell_0) | -(x in x)",
                "x in sk_russell_0 | x in x",
            ]
        );
        assert_eq!(set.skolem_map["sk_russell_0"].arity, 0);
    }

    #[test]
    fn trivial_equality_axiom() {
        let mut t = TheoryFragment::new("t");
        t.push("refl", crate::parser::parse("forall x. x = x").unwrap());
        let set = clausify(&t);
        let c = set.clauses.iter().find(|c| c.axiom == "refl").unwrap();
        assert_eq!(c.render(), "x = x");
        assert_eq!(c.vars, vec!["x"]);
    }

    #[test]
    fn pair_produces_skolem_function() {
        let t = catalog::named(&Construction::Pair).unwrap();
        let set = clausify(&t);
        assert_eq!(set.skolem_map["sk_pair_0"].arity, 2);
        let ps: Vec<&Clause> = set.clauses.iter().filter(|c| c.axiom == "pair").collect();
        assert_eq!(ps.len(), 3);
        // Congruence template generated for the new function.
        assert!(set.clauses.iter().any(|c| c.axiom == "eq_fn_sk_pair_0"));
    }

    #[test]
    fn exten_clauses() {
        let t = TheoryFragment::new("bst");
        let set = clausify(&t);
        let es: Vec<String> = set
            .clauses
            .iter()
            .filter(|c| c.axiom == "exten")
            .map(|c| c.render())
            .collect();
        assert_eq!(
            es,
            vec![
                "sk_exten_0(y,z) in y | sk_exten_0(y,z) in z | y = z",
                "-(sk_exten_0(y,z) in y) | -(sk_exten_0(y,z) in z) | y = z",
            ]
        );
    }
}
