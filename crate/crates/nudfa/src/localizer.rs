//! (α,β)-minimal sets, their traces, and minimal sets through a given element.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::algebra::{unary_polynomial_clone, FiniteAlgebra, UnaryFn, DEFAULT_CLONE_BUDGET};
use crate::congruence::{principal_congruence, Congruence};
use crate::error::{refuse, Error, Result};

#[derive(Clone, Debug)]
pub struct MinimalSet {
    pub universe_subset: Vec<usize>,
    pub witness: UnaryFn,
    pub idempotent: Option<UnaryFn>,
}

/// Serializable view (witness circuits are omitted).
#[derive(Clone, Debug, Serialize)]
pub struct MinimalSetView {
    pub set: Vec<usize>,
    pub witness: Vec<usize>,
    pub idempotent: Option<Vec<usize>>,
    pub traces: Vec<Vec<usize>>,
}

/// Does `f` keep some β-pair apart modulo α?
fn separates(f: &UnaryFn, alpha: &Congruence, beta: &Congruence) -> bool {
    beta.pairs()
        .iter()
        .any(|&(x, y)| !alpha.related(f.apply(x), f.apply(y)))
}

fn is_prime_quotient(alpha: &Congruence, beta: &Congruence) -> bool {
    alpha.le(beta) && alpha != beta
}

pub fn minimal_sets(
    alg: &FiniteAlgebra,
    alpha: &Congruence,
    beta: &Congruence,
) -> Result<Vec<MinimalSet>> {
    let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET)?;
    minimal_sets_in(&clone, alpha, beta)
}

pub fn minimal_sets_in(
    clone: &[UnaryFn],
    alpha: &Congruence,
    beta: &Congruence,
) -> Result<Vec<MinimalSet>> {
    if !is_prime_quotient(alpha, beta) {
        return refuse(format!(
            "{} is not strictly below {}",
            alpha.label(),
            beta.label()
        ));
    }
    let good: Vec<&UnaryFn> = clone.iter().filter(|f| separates(f, alpha, beta)).collect();
    let mut ranges: Vec<(BTreeSet<usize>, &UnaryFn)> = Vec::new();
    for f in &good {
        let r: BTreeSet<usize> = f.range().into_iter().collect();
        if !ranges.iter().any(|(s, _)| *s == r) {
            ranges.push((r, f));
        }
    }
    let mut out = Vec::new();
    for (r, f) in &ranges {
        if ranges
            .iter()
            .any(|(s, _)| s.len() < r.len() && s.is_subset(r))
        {
            continue;
        }
        let set: Vec<usize> = r.iter().copied().collect();
        let idempotent = idempotent_for(f, &set).or_else(|| {
            clone
                .iter()
                .find(|g| g.is_idempotent() && g.range() == set)
                .cloned()
        });
        out.push(MinimalSet {
            universe_subset: set,
            witness: (*f).clone(),
            idempotent,
        });
    }
    out.sort_by(|a, b| a.universe_subset.cmp(&b.universe_subset));
    Ok(out)
}

/// A power of `f` idempotent on its range `u`, if one exists.
fn idempotent_for(f: &UnaryFn, u: &[usize]) -> Option<UnaryFn> {
    let mut g = f.clone();
    for _ in 0..=f.values.len() * f.values.len() {
        if g.is_idempotent() && g.range() == u {
            return Some(g);
        }
        g = g.compose(f);
    }
    None
}

/// β|U-classes that are not α|U-classes.
pub fn traces(u: &MinimalSet, alpha: &Congruence, beta: &Congruence) -> Vec<Vec<usize>> {
    let set = &u.universe_subset;
    let mut out: BTreeSet<Vec<usize>> = BTreeSet::new();
    for &x in set {
        let bx: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&y| beta.related(x, y))
            .collect();
        let ax: Vec<usize> = set
            .iter()
            .copied()
            .filter(|&y| alpha.related(x, y))
            .collect();
        if ax != bx {
            out.insert(bx);
        }
    }
    out.into_iter().collect()
}

/// A (δ,θ)-minimal set containing `e`: translate a minimal set `V` along a
/// unary polynomial sending a separated pair of `V` to a pair at `e`.
pub fn minimal_set_through(
    alg: &FiniteAlgebra,
    delta: &Congruence,
    theta: &Congruence,
    e: usize,
) -> Result<MinimalSet> {
    let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET)?;
    minimal_set_through_in(alg, &clone, delta, theta, e)
}

pub fn minimal_set_through_in(
    alg: &FiniteAlgebra,
    clone: &[UnaryFn],
    delta: &Congruence,
    theta: &Congruence,
    e: usize,
) -> Result<MinimalSet> {
    let mins = minimal_sets_in(clone, delta, theta)?;
    let Some(v) = mins.first() else {
        return refuse("no minimal set exists");
    };
    if v.universe_subset.contains(&e) {
        return Ok(v.clone());
    }
    let set = &v.universe_subset;
    let (c, d) = set
        .iter()
        .flat_map(|&c| set.iter().map(move |&d| (c, d)))
        .find(|&(c, d)| theta.related(c, d) && !delta.related(c, d))
        .ok_or_else(|| Error::Verification("minimal set has no θ-pair outside δ".into()))?;
    let cg = principal_congruence(alg, c, d);
    let ev = v.idempotent.clone().unwrap_or_else(|| v.witness.clone());
    for f in clone {
        if f.apply(c) != e {
            continue;
        }
        let a = f.apply(d);
        if !cg.related(e, a) || delta.related(e, a) {
            continue;
        }
        let image: BTreeSet<usize> = set.iter().map(|&x| f.apply(x)).collect();
        let image: Vec<usize> = image.into_iter().collect();
        if let Some(m) = mins.iter().find(|m| m.universe_subset == image) {
            let witness = f.compose(&ev);
            return Ok(MinimalSet {
                universe_subset: image,
                witness,
                idempotent: m.idempotent.clone(),
            });
        }
        return Err(Error::Verification(format!(
            "image {image:?} of a minimal set is not minimal"
        )));
    }
    refuse(format!(
        "no unary polynomial maps ({c}, {d}) onto a separated pair at {e}"
    ))
}

pub fn view(u: &MinimalSet, alpha: &Congruence, beta: &Congruence) -> MinimalSetView {
    MinimalSetView {
        set: u.universe_subset.clone(),
        witness: u.witness.values.clone(),
        idempotent: u.idempotent.as_ref().map(|g| g.values.clone()),
        traces: traces(u, alpha, beta),
    }
}
