//! Abstract syntax for first-order formulas over membership and equality.
//!
//! Terms are variables, constants, or composite sugar (`upair`, `opair`,
//! `extr`). Composites are eliminated by [`expand`] before any semantic or
//! proof-theoretic use; a formula with no composites is called *expanded*.

use std::collections::BTreeSet;
use std::fmt;

/// A term of the surface language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    /// Unordered pair `{a,b}`.
    Upair(Box<Term>, Box<Term>),
    /// Ordered pair `<a,b>`, defined through unordered pairs.
    Opair(Box<Term>, Box<Term>),
    /// Extraction `a[a]`: the set of all x with `<a,x> in a`.
    Extr(Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn cons(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    pub fn is_composite(&self) -> bool {
        matches!(self, Term::Upair(..) | Term::Opair(..) | Term::Extr(..))
    }

    pub fn has_composite(&self) -> bool {
        match self {
            Term::Var(_) | Term::Const(_) => false,
            Term::Upair(..) | Term::Opair(..) | Term::Extr(..) => true,
        }
    }

    /// Variables occurring anywhere in the term.
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::Upair(a, b) | Term::Opair(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Term::Extr(a) => a.vars(out),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(n) | Term::Const(n) => write!(f, "{n}"),
            Term::Upair(a, b) => write!(f, "upair({a},{b})"),
            Term::Opair(a, b) => write!(f, "opair({a},{b})"),
            Term::Extr(a) => write!(f, "extr({a})"),
        }
    }
}

/// First-order formulas over the predicates `in` and `=`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Mem(Term, Term),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

pub fn mem(a: Term, b: Term) -> Formula {
    Formula::Mem(a, b)
}
pub fn eq(a: Term, b: Term) -> Formula {
    Formula::Eq(a, b)
}
pub fn not(f: Formula) -> Formula {
    Formula::Not(Box::new(f))
}
pub fn and(a: Formula, b: Formula) -> Formula {
    Formula::And(Box::new(a), Box::new(b))
}
pub fn or(a: Formula, b: Formula) -> Formula {
    Formula::Or(Box::new(a), Box::new(b))
}
pub fn implies(a: Formula, b: Formula) -> Formula {
    Formula::Implies(Box::new(a), Box::new(b))
}
pub fn iff(a: Formula, b: Formula) -> Formula {
    Formula::Iff(Box::new(a), Box::new(b))
}
pub fn forall(v: impl Into<String>, f: Formula) -> Formula {
    Formula::Forall(v.into(), Box::new(f))
}
pub fn exists(v: impl Into<String>, f: Formula) -> Formula {
    Formula::Exists(v.into(), Box::new(f))
}

/// Left-associated conjunction of a non-empty list.
pub fn conj(mut fs: Vec<Formula>) -> Formula {
    let mut acc = fs.remove(0);
    for f in fs {
        acc = and(acc, f);
    }
    acc
}

/// Left-associated disjunction of a non-empty list.
pub fn disj(mut fs: Vec<Formula>) -> Formula {
    let mut acc = fs.remove(0);
    for f in fs {
        acc = or(acc, f);
    }
    acc
}

impl Formula {
    pub fn is_atom(&self) -> bool {
        matches!(self, Formula::Mem(..) | Formula::Eq(..))
    }

    fn is_binary(&self) -> bool {
        matches!(
            self,
            Formula::And(..) | Formula::Or(..) | Formula::Implies(..) | Formula::Iff(..)
        )
    }

    fn is_quantifier(&self) -> bool {
        matches!(self, Formula::Forall(..) | Formula::Exists(..))
    }

    /// True when no composite term occurs anywhere in the formula.
    pub fn is_expanded(&self) -> bool {
        match self {
            Formula::Mem(a, b) | Formula::Eq(a, b) => !a.has_composite() && !b.has_composite(),
            Formula::Not(f) => f.is_expanded(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => a.is_expanded() && b.is_expanded(),
            Formula::Forall(_, f) | Formula::Exists(_, f) => f.is_expanded(),
        }
    }

    /// All variable names occurring in the formula, bound or free.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_all_vars(&mut out);
        out
    }

    fn collect_all_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Mem(a, b) | Formula::Eq(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Formula::Not(f) => f.collect_all_vars(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                a.collect_all_vars(out);
                b.collect_all_vars(out);
            }
            Formula::Forall(v, f) | Formula::Exists(v, f) => {
                out.insert(v.clone());
                f.collect_all_vars(out);
            }
        }
    }

    /// Constant names occurring in the formula.
    pub fn constants(&self) -> BTreeSet<String> {
        fn term(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Var(_) => {}
                Term::Const(c) => {
                    out.insert(c.clone());
                }
                Term::Upair(a, b) | Term::Opair(a, b) => {
                    term(a, out);
                    term(b, out);
                }
                Term::Extr(a) => term(a, out),
            }
        }
        fn go(f: &Formula, out: &mut BTreeSet<String>) {
            match f {
                Formula::Mem(a, b) | Formula::Eq(a, b) => {
                    term(a, out);
                    term(b, out);
                }
                Formula::Not(g) => go(g, out),
                Formula::And(a, b)
                | Formula::Or(a, b)
                | Formula::Implies(a, b)
                | Formula::Iff(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Formula::Forall(_, g) | Formula::Exists(_, g) => go(g, out),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }
}

/// Free variables of a formula.
pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::Mem(a, b) | Formula::Eq(a, b) => {
                let mut vs = BTreeSet::new();
                a.vars(&mut vs);
                b.vars(&mut vs);
                for v in vs {
                    if !bound.iter().any(|b| *b == v) {
                        out.insert(v);
                    }
                }
            }
            Formula::Not(g) => go(g, bound, out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::Forall(v, g) | Formula::Exists(v, g) => {
                bound.push(v.clone());
                go(g, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// Picks a name based on `base` that is not in `used`: `base`, then
/// `base0`, `base1`, ...
pub fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    if !used.contains(base) {
        return base.to_string();
    }
    let mut i = 0usize;
    loop {
        let cand = format!("{base}{i}");
        if !used.contains(&cand) {
            return cand;
        }
        i += 1;
    }
}

fn subst_in_term(t: &Term, v: &str, repl: &Term) -> Term {
    match t {
        Term::Var(name) if name == v => repl.clone(),
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::Upair(a, b) => Term::Upair(
            Box::new(subst_in_term(a, v, repl)),
            Box::new(subst_in_term(b, v, repl)),
        ),
        Term::Opair(a, b) => Term::Opair(
            Box::new(subst_in_term(a, v, repl)),
            Box::new(subst_in_term(b, v, repl)),
        ),
        Term::Extr(a) => Term::Extr(Box::new(subst_in_term(a, v, repl))),
    }
}

/// Capture-avoiding substitution of `t` for free occurrences of `v`.
///
/// Bound variables that would capture a variable of `t` are renamed with
/// fresh names (`x` becomes `x0`, `x1`, ...).
pub fn substitute(f: &Formula, v: &str, t: &Term) -> Formula {
    let mut tvars = BTreeSet::new();
    t.vars(&mut tvars);
    subst_go(f, v, t, &tvars)
}

fn subst_go(f: &Formula, v: &str, t: &Term, tvars: &BTreeSet<String>) -> Formula {
    match f {
        Formula::Mem(a, b) => Formula::Mem(subst_in_term(a, v, t), subst_in_term(b, v, t)),
        Formula::Eq(a, b) => Formula::Eq(subst_in_term(a, v, t), subst_in_term(b, v, t)),
        Formula::Not(g) => not(subst_go(g, v, t, tvars)),
        Formula::And(a, b) => and(subst_go(a, v, t, tvars), subst_go(b, v, t, tvars)),
        Formula::Or(a, b) => or(subst_go(a, v, t, tvars), subst_go(b, v, t, tvars)),
        Formula::Implies(a, b) => implies(subst_go(a, v, t, tvars), subst_go(b, v, t, tvars)),
        Formula::Iff(a, b) => iff(subst_go(a, v, t, tvars), subst_go(b, v, t, tvars)),
        Formula::Forall(x, g) | Formula::Exists(x, g) => {
            let is_forall = matches!(f, Formula::Forall(..));
            let rebuild = |x: String, g: Formula| {
                if is_forall {
                    forall(x, g)
                } else {
                    exists(x, g)
                }
            };
            if x == v {
                // v is shadowed below this binder.
                return rebuild(x.clone(), (**g).clone());
            }
            if tvars.contains(x) && free_vars(g).contains(v) {
                // Binder would capture a variable of t: rename it first.
                let mut used = g.all_vars();
                used.extend(tvars.iter().cloned());
                used.insert(v.to_string());
                let nx = fresh_name(x, &used);
                let renamed = subst_go(g, x, &Term::Var(nx.clone()), &BTreeSet::new());
                rebuild(nx, subst_go(&renamed, v, t, tvars))
            } else {
                rebuild(x.clone(), subst_go(g, v, t, tvars))
            }
        }
    }
}

/// Replaces every occurrence of the term `target` in `t` by `repl`.
fn replace_term(t: &Term, target: &Term, repl: &Term) -> Term {
    if t == target {
        return repl.clone();
    }
    match t {
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::Upair(a, b) => Term::Upair(
            Box::new(replace_term(a, target, repl)),
            Box::new(replace_term(b, target, repl)),
        ),
        Term::Opair(a, b) => Term::Opair(
            Box::new(replace_term(a, target, repl)),
            Box::new(replace_term(b, target, repl)),
        ),
        Term::Extr(a) => Term::Extr(Box::new(replace_term(a, target, repl))),
    }
}

/// Finds the leftmost innermost composite in a term, if any.
fn innermost_composite(t: &Term) -> Option<Term> {
    match t {
        Term::Var(_) | Term::Const(_) => None,
        Term::Upair(a, b) | Term::Opair(a, b) => innermost_composite(a)
            .or_else(|| innermost_composite(b))
            .or_else(|| Some(t.clone())),
        Term::Extr(a) => innermost_composite(a).or_else(|| Some(t.clone())),
    }
}

/// Eliminates all composite terms, rewriting innermost-first, leftmost.
///
/// Each elimination wraps the atom containing the composite `c` as
/// `exists y. (def(y) and atom[c := y])` where `def` is the defining
/// property of the composite. Ordered pairs expand through unordered
/// pairs; extraction expands through ordered pairs.
pub fn expand(f: &Formula) -> Formula {
    let mut cur = f.clone();
    loop {
        match expand_step(&cur) {
            Some(next) => cur = next,
            None => return cur,
        }
    }
}

fn expand_step(f: &Formula) -> Option<Formula> {
    match f {
        Formula::Mem(a, b) | Formula::Eq(a, b) => {
            let c = innermost_composite(a).or_else(|| innermost_composite(b))?;
            Some(eliminate_in_atom(f, &c))
        }
        Formula::Not(g) => expand_step(g).map(not),
        Formula::And(a, b) => binary_step(a, b, f, and),
        Formula::Or(a, b) => binary_step(a, b, f, or),
        Formula::Implies(a, b) => binary_step(a, b, f, implies),
        Formula::Iff(a, b) => binary_step(a, b, f, iff),
        Formula::Forall(v, g) => expand_step(g).map(|g| forall(v.clone(), g)),
        Formula::Exists(v, g) => expand_step(g).map(|g| exists(v.clone(), g)),
    }
}

fn binary_step(
    a: &Formula,
    b: &Formula,
    _f: &Formula,
    mk: fn(Formula, Formula) -> Formula,
) -> Option<Formula> {
    if let Some(na) = expand_step(a) {
        return Some(mk(na, b.clone()));
    }
    expand_step(b).map(|nb| mk(a.clone(), nb))
}

/// Wraps `atom` (which contains composite `c`) with the defining property
/// of `c` and replaces all occurrences of `c` in the atom by the fresh
/// set variable.
fn eliminate_in_atom(atom: &Formula, c: &Term) -> Formula {
    let mut used = atom.all_vars();
    // Avoid clashes with constants too: a constant and a variable sharing a
    // name would be confusing in rendered output.
    used.extend(atom.constants());
    let y = fresh_name("y", &used);
    used.insert(y.clone());
    let x = fresh_name("x", &used);
    used.insert(x.clone());
    let yv = Term::var(&y);
    let xv = Term::var(&x);
    let def = match c {
        Term::Upair(a, b) => forall(
            &x,
            iff(
                mem(xv.clone(), yv.clone()),
                or(eq(xv.clone(), (**a).clone()), eq(xv.clone(), (**b).clone())),
            ),
        ),
        Term::Opair(a, b) => forall(
            &x,
            iff(
                mem(xv.clone(), yv.clone()),
                or(
                    eq(
                        xv.clone(),
                        Term::Upair(Box::new((**a).clone()), Box::new((**a).clone())),
                    ),
                    eq(
                        xv.clone(),
                        Term::Upair(Box::new((**a).clone()), Box::new((**b).clone())),
                    ),
                ),
            ),
        ),
        Term::Extr(a) => {
            let z = fresh_name("z", &used);
            let zv = Term::var(&z);
            forall(
                &x,
                iff(
                    mem(xv.clone(), yv.clone()),
                    exists(
                        &z,
                        and(
                            eq(
                                zv.clone(),
                                Term::Opair(Box::new((**a).clone()), Box::new(xv.clone())),
                            ),
                            mem(zv, (**a).clone()),
                        ),
                    ),
                ),
            )
        }
        _ => unreachable!("eliminate_in_atom called on a non-composite"),
    };
    let rewritten = match atom {
        Formula::Mem(a, b) => mem(replace_term(a, c, &yv), replace_term(b, c, &yv)),
        Formula::Eq(a, b) => eq(replace_term(a, c, &yv), replace_term(b, c, &yv)),
        _ => unreachable!("eliminate_in_atom on a non-atom"),
    };
    exists(&y, and(def, rewritten))
}

/// The shape of an unrestricted-comprehension instance
/// `exists y. forall x. (x in y <-> body)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcShape {
    /// The existentially bound variable naming the main set.
    pub main_var: String,
    /// The universally bound element variable.
    pub elem_var: String,
    /// The comprehension body, with `elem_var` free.
    pub body: Formula,
    /// True iff the main variable occurs free in the body (which violates
    /// the side condition of the comprehension schema).
    pub self_referential: bool,
}

impl UcShape {
    /// Rebuilds the comprehension instance this shape was taken from.
    pub fn reconstruct(&self) -> Formula {
        exists(
            &self.main_var,
            forall(
                &self.elem_var,
                iff(
                    mem(Term::var(&self.elem_var), Term::var(&self.main_var)),
                    self.body.clone(),
                ),
            ),
        )
    }
}

/// Classifies a sentence as a comprehension instance, if it has the shape
/// `exists y. forall x. (x in y <-> body)` with distinct variables `x`, `y`.
pub fn classify_uc(f: &Formula) -> Option<UcShape> {
    let Formula::Exists(y, inner) = f else {
        return None;
    };
    let Formula::Forall(x, body) = &**inner else {
        return None;
    };
    if x == y {
        return None;
    }
    let Formula::Iff(head, phi) = &**body else {
        return None;
    };
    let Formula::Mem(Term::Var(ex), Term::Var(my)) = &**head else {
        return None;
    };
    if ex != x || my != y {
        return None;
    }
    let self_referential = free_vars(phi).contains(y);
    Some(UcShape {
        main_var: y.clone(),
        elem_var: x.clone(),
        body: (**phi).clone(),
        self_referential,
    })
}

/// Alpha-equivalence of formulas (used by tests and structural checks;
/// plain equality elsewhere is strictly syntactic).
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    fn term_eq(a: &Term, b: &Term, map: &[(String, String)]) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                for (l, r) in map.iter().rev() {
                    if l == x || r == y {
                        return l == x && r == y;
                    }
                }
                x == y
            }
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Upair(a1, a2), Term::Upair(b1, b2))
            | (Term::Opair(a1, a2), Term::Opair(b1, b2)) => {
                term_eq(a1, b1, map) && term_eq(a2, b2, map)
            }
            (Term::Extr(a1), Term::Extr(b1)) => term_eq(a1, b1, map),
            _ => false,
        }
    }
    fn go(a: &Formula, b: &Formula, map: &mut Vec<(String, String)>) -> bool {
        match (a, b) {
            (Formula::Mem(a1, a2), Formula::Mem(b1, b2))
            | (Formula::Eq(a1, a2), Formula::Eq(b1, b2)) => {
                term_eq(a1, b1, map) && term_eq(a2, b2, map)
            }
            (Formula::Not(x), Formula::Not(y)) => go(x, y, map),
            (Formula::And(x1, x2), Formula::And(y1, y2))
            | (Formula::Or(x1, x2), Formula::Or(y1, y2))
            | (Formula::Implies(x1, x2), Formula::Implies(y1, y2))
            | (Formula::Iff(x1, x2), Formula::Iff(y1, y2)) => {
                go(x1, y1, map) && go(x2, y2, map)
            }
            (Formula::Forall(vx, x), Formula::Forall(vy, y))
            | (Formula::Exists(vx, x), Formula::Exists(vy, y)) => {
                map.push((vx.clone(), vy.clone()));
                let r = go(x, y, map);
                map.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// Converts free occurrences of the named constants (parsed as variables)
/// into constant terms. The parser cannot tell the two namespaces apart;
/// the enclosing fragment's signature decides.
pub fn mark_constants(f: &Formula, constants: &BTreeSet<String>) -> Formula {
    fn term(t: &Term, consts: &BTreeSet<String>, bound: &[String]) -> Term {
        match t {
            Term::Var(v) if consts.contains(v) && !bound.iter().any(|b| b == v) => {
                Term::Const(v.clone())
            }
            Term::Var(_) | Term::Const(_) => t.clone(),
            Term::Upair(a, b) => Term::Upair(
                Box::new(term(a, consts, bound)),
                Box::new(term(b, consts, bound)),
            ),
            Term::Opair(a, b) => Term::Opair(
                Box::new(term(a, consts, bound)),
                Box::new(term(b, consts, bound)),
            ),
            Term::Extr(a) => Term::Extr(Box::new(term(a, consts, bound))),
        }
    }
    fn go(f: &Formula, consts: &BTreeSet<String>, bound: &mut Vec<String>) -> Formula {
        match f {
            Formula::Mem(a, b) => Formula::Mem(term(a, consts, bound), term(b, consts, bound)),
            Formula::Eq(a, b) => Formula::Eq(term(a, consts, bound), term(b, consts, bound)),
            Formula::Not(g) => not(go(g, consts, bound)),
            Formula::And(a, b) => and(go(a, consts, bound), go(b, consts, bound)),
            Formula::Or(a, b) => or(go(a, consts, bound), go(b, consts, bound)),
            Formula::Implies(a, b) => implies(go(a, consts, bound), go(b, consts, bound)),
            Formula::Iff(a, b) => iff(go(a, consts, bound), go(b, consts, bound)),
            Formula::Forall(v, g) => {
                bound.push(v.clone());
                let r = forall(v.clone(), go(g, consts, bound));
                bound.pop();
                r
            }
            Formula::Exists(v, g) => {
                bound.push(v.clone());
                let r = exists(v.clone(), go(g, consts, bound));
                bound.pop();
                r
            }
        }
    }
    go(f, constants, &mut Vec::new())
}

// Rendering. Parenthesization rules: binary operands are parenthesized when
// they are themselves binary; a quantifier needs parentheses only as the
// *left* operand of a binary connective (its scope extends maximally right
// otherwise); a quantifier body is parenthesized when it is binary; the
// operand of `not` is parenthesized when binary or quantified.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self, f)
    }
}

fn render(fm: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    fn operand(fm: &Formula, left: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if fm.is_binary() || (left && fm.is_quantifier()) {
            write!(f, "(")?;
            render(fm, f)?;
            write!(f, ")")
        } else {
            render(fm, f)
        }
    }
    fn body(fm: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if fm.is_binary() {
            write!(f, "(")?;
            render(fm, f)?;
            write!(f, ")")
        } else {
            render(fm, f)
        }
    }
    match fm {
        Formula::Mem(a, b) => write!(f, "{a} in {b}"),
        Formula::Eq(a, b) => write!(f, "{a} = {b}"),
        Formula::Not(g) => {
            write!(f, "not ")?;
            if g.is_binary() || g.is_quantifier() {
                write!(f, "(")?;
                render(g, f)?;
                write!(f, ")")
            } else {
                render(g, f)
            }
        }
        Formula::And(a, b) => {
            operand(a, true, f)?;
            write!(f, " and ")?;
            operand(b, false, f)
        }
        Formula::Or(a, b) => {
            operand(a, true, f)?;
            write!(f, " or ")?;
            operand(b, false, f)
        }
        Formula::Implies(a, b) => {
            operand(a, true, f)?;
            write!(f, " -> ")?;
            operand(b, false, f)
        }
        Formula::Iff(a, b) => {
            operand(a, true, f)?;
            write!(f, " <-> ")?;
            operand(b, false, f)
        }
        Formula::Forall(v, g) => {
            write!(f, "forall {v}. ")?;
            body(g, f)
        }
        Formula::Exists(v, g) => {
            write!(f, "exists {v}. ")?;
            body(g, f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn p(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn render_smallest_sentence() {
        let f = forall("x", eq(Term::var("x"), Term::var("x")));
        assert_eq!(f.to_string(), "forall x. x = x");
    }

    #[test]
    fn render_russell() {
        let f = exists(
            "y",
            forall(
                "x",
                iff(
                    mem(Term::var("x"), Term::var("y")),
                    not(mem(Term::var("x"), Term::var("x"))),
                ),
            ),
        );
        assert_eq!(
            f.to_string(),
            "exists y. forall x. (x in y <-> not x in x)"
        );
    }

    #[test]
    fn free_vars_examples() {
        let f = p("forall x. x in y");
        assert_eq!(free_vars(&f), ["y".to_string()].into_iter().collect());
        let russell = p("exists y. forall x. (x in y <-> not x in x)");
        assert!(free_vars(&russell).is_empty());
        // A fixed-point style body with the main variable free.
        let f = p("x in x or x = y");
        assert!(free_vars(&f).contains("y"));
    }

    #[test]
    fn substitute_simple() {
        let f = p("x in y");
        let g = substitute(&f, "y", &Term::cons("c"));
        assert_eq!(g, mem(Term::var("x"), Term::cons("c")));
    }

    #[test]
    fn substitute_capture_avoidance() {
        let f = p("forall x. x in y");
        let g = substitute(&f, "y", &Term::var("x"));
        assert_eq!(g.to_string(), "forall x0. x0 in x");
    }

    #[test]
    fn expand_upair_golden() {
        let f = p("c in upair(a,b)");
        assert_eq!(
            expand(&f).to_string(),
            "exists y. ((forall x. (x in y <-> (x = a or x = b))) and c in y)"
        );
    }

    #[test]
    fn expand_extr_golden_first_step() {
        let f = p("w = extr(v)");
        let step = expand_step(&f).unwrap();
        assert_eq!(
            step.to_string(),
            "exists y. ((forall x. (x in y <-> exists z. (z = opair(v,x) and z in v))) and w = y)"
        );
        // Full expansion is composite-free and idempotent.
        let full = expand(&f);
        assert!(full.is_expanded());
        assert_eq!(expand(&full), full);
    }

    #[test]
    fn expand_identity_on_composite_free() {
        let f = p("exists y. forall x. (x in y <-> not x in x)");
        assert_eq!(expand(&f), f);
    }

    #[test]
    fn classify_uc_russell() {
        let f = p("exists y. forall x. (x in y <-> x notin x)");
        let shape = classify_uc(&f).unwrap();
        assert_eq!(shape.body, p("not x in x"));
        assert!(!shape.self_referential);
        assert!(alpha_eq(&shape.reconstruct(), &f));
    }

    #[test]
    fn classify_uc_rejects_wrong_shape() {
        assert!(classify_uc(&p("forall x. x in x")).is_none());
        // Constant-form definition is not a UC sentence.
        let f = p("forall x. (x in D <-> x = D)");
        assert!(classify_uc(&f).is_none());
    }

    #[test]
    fn alpha_eq_basics() {
        assert!(alpha_eq(&p("forall x. x = x"), &p("forall y. y = y")));
        assert!(!alpha_eq(&p("forall x. x = x"), &p("forall y. y in y")));
    }
}
