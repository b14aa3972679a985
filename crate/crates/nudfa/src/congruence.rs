//! Congruence lattices, the term-condition commutator and the derived
//! structure used by the compiler: characteristics, PUPIs, supernilpotent
//! rank and the congruences sigma, kappa, sigma_p.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::algebra::FiniteAlgebra;
use crate::arith;
use crate::error::{refuse, Error, Result};

pub const DEFAULT_CON_BOUND: usize = 10;
/// Cap on the number of 2x2 matrices generated for one commutator.
pub const MATRIX_BUDGET: usize = 200_000;

/// A partition of `0..n`, stored as "least member of my class".
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Congruence {
    classes: Vec<usize>,
}

impl Congruence {
    pub fn identity(n: usize) -> Self {
        Congruence {
            classes: (0..n).collect(),
        }
    }

    pub fn total(n: usize) -> Self {
        Congruence {
            classes: vec![0; n],
        }
    }

    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Self {
        let mut uf = UnionFind::new(n);
        for b in blocks {
            for w in b.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        uf.to_congruence()
    }

    /// From any labelling: elements with equal labels share a class.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut first: BTreeMap<usize, usize> = BTreeMap::new();
        let classes = labels
            .iter()
            .enumerate()
            .map(|(i, l)| *first.entry(*l).or_insert(i))
            .collect();
        Congruence { classes }
    }

    pub fn size(&self) -> usize {
        self.classes.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.classes
    }

    #[inline]
    pub fn class_of(&self, x: usize) -> usize {
        self.classes[x]
    }

    #[inline]
    pub fn related(&self, a: usize, b: usize) -> bool {
        self.classes[a] == self.classes[b]
    }

    /// Least members of the classes, increasing.
    pub fn representatives(&self) -> Vec<usize> {
        (0..self.size()).filter(|&i| self.classes[i] == i).collect()
    }

    /// Map element -> index of its class among `representatives()`.
    pub fn class_indices(&self) -> Vec<usize> {
        let mut idx = vec![usize::MAX; self.size()];
        let mut next = 0;
        for i in 0..self.size() {
            if self.classes[i] == i {
                idx[i] = next;
                next += 1;
            }
        }
        (0..self.size()).map(|i| idx[self.classes[i]]).collect()
    }

    pub fn num_classes(&self) -> usize {
        (0..self.size()).filter(|&i| self.classes[i] == i).count()
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let reps = self.representatives();
        let idx = self.class_indices();
        let mut out = vec![Vec::new(); reps.len()];
        for x in 0..self.size() {
            out[idx[x]].push(x);
        }
        out
    }

    pub fn class_members(&self, x: usize) -> Vec<usize> {
        (0..self.size()).filter(|&y| self.related(x, y)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.classes.iter().enumerate().all(|(i, &c)| i == c)
    }

    pub fn is_total(&self) -> bool {
        self.classes.iter().all(|&c| c == 0)
    }

    pub fn le(&self, other: &Congruence) -> bool {
        (0..self.size()).all(|x| other.related(x, self.classes[x]))
    }

    pub fn meet(&self, other: &Congruence) -> Congruence {
        let labels: Vec<usize> = (0..self.size())
            .map(|x| self.classes[x] * self.size() + other.classes[x])
            .collect();
        Congruence::from_labels(&labels)
    }

    pub fn join(&self, other: &Congruence) -> Congruence {
        let mut uf = UnionFind::new(self.size());
        for x in 0..self.size() {
            uf.union(x, self.classes[x]);
            uf.union(x, other.classes[x]);
        }
        uf.to_congruence()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.size();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.related(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Compatibility: every basic translation preserves the partition.
    pub fn is_compatible(&self, alg: &FiniteAlgebra) -> bool {
        let n = alg.size;
        if self.size() != n {
            return false;
        }
        let mut args = Vec::new();
        for op in &alg.ops {
            let r = op.arity;
            if r == 0 {
                continue;
            }
            let others = n.pow(r as u32 - 1);
            for pos in 0..r {
                for x in 0..n {
                    let y = self.classes[x];
                    if x == y {
                        continue;
                    }
                    for o in 0..others {
                        args.clear();
                        let mut rest = o;
                        let mut tail = Vec::with_capacity(r - 1);
                        for _ in 0..r - 1 {
                            tail.push(rest % n);
                            rest /= n;
                        }
                        args.extend_from_slice(&tail[..pos]);
                        args.push(x);
                        args.extend_from_slice(&tail[pos..]);
                        let fx = op.apply(n, &args);
                        args[pos] = y;
                        let fy = op.apply(n, &args);
                        if !self.related(fx, fy) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Compact text form, e.g. `0,3|1,4|2,5`.
    pub fn label(&self) -> String {
        if self.is_identity() {
            return "0".into();
        }
        if self.is_total() {
            return "1".into();
        }
        self.blocks()
            .iter()
            .map(|b| {
                b.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when two classes were merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the smaller root so classes are labelled by least member
        if ra < rb {
            self.parent[rb] = ra;
        } else {
            self.parent[ra] = rb;
        }
        true
    }

    pub fn to_congruence(&mut self) -> Congruence {
        let n = self.parent.len();
        let mut least = vec![usize::MAX; n];
        let roots: Vec<usize> = (0..n).map(|x| self.find(x)).collect();
        for x in 0..n {
            least[roots[x]] = least[roots[x]].min(x);
        }
        Congruence {
            classes: (0..n).map(|x| least[roots[x]]).collect(),
        }
    }
}

/// Least congruence containing the given pairs: close under basic
/// translations (which generate all unary polynomials) and transitivity.
pub fn cg(alg: &FiniteAlgebra, pairs: &[(usize, usize)]) -> Congruence {
    let n = alg.size;
    let mut uf = UnionFind::new(n);
    let mut work: VecDeque<(usize, usize)> = VecDeque::new();
    for &(a, b) in pairs {
        if uf.union(a, b) {
            work.push_back((a, b));
        }
    }
    let mut args = Vec::new();
    while let Some((a, b)) = work.pop_front() {
        for op in &alg.ops {
            let r = op.arity;
            if r == 0 {
                continue;
            }
            let others = n.pow(r as u32 - 1);
            for pos in 0..r {
                for o in 0..others {
                    args.clear();
                    let mut rest = o;
                    for i in 0..r {
                        if i == pos {
                            args.push(a);
                        } else {
                            args.push(rest % n);
                            rest /= n;
                        }
                    }
                    let fa = op.apply(n, &args);
                    args[pos] = b;
                    let fb = op.apply(n, &args);
                    if uf.union(fa, fb) {
                        work.push_back((fa, fb));
                    }
                }
            }
        }
    }
    uf.to_congruence()
}

pub fn principal_congruence(alg: &FiniteAlgebra, a: usize, b: usize) -> Congruence {
    cg(alg, &[(a, b)])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CharInfo {
    pub lower: Congruence,
    pub upper: Congruence,
    pub characteristic: u64,
    pub coset_size: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CongruenceLattice {
    pub elements: Vec<Congruence>,
    /// `leq[i][j]` iff elements[i] <= elements[j].
    pub leq: Vec<Vec<bool>>,
    /// Pairs (i, j) with elements[i] covered by elements[j].
    pub covers: Vec<(usize, usize)>,
    pub atoms: Vec<usize>,
    pub meet_irreducibles: Vec<usize>,
    pub join_irreducibles: Vec<usize>,
    /// alpha+ for meet-irreducible alpha.
    pub unique_cover: BTreeMap<usize, usize>,
    /// alpha- for join-irreducible alpha.
    pub unique_subcover: BTreeMap<usize, usize>,
    pub modular: bool,
    /// Characteristic of each cover, aligned with `covers`; `None` when the
    /// cover is not abelian or its coset sizes are not a uniform prime power.
    pub cover_chars: Vec<Option<CharInfo>>,
}

impl CongruenceLattice {
    pub fn bottom(&self) -> usize {
        0
    }

    pub fn top(&self) -> usize {
        self.elements.len() - 1
    }

    pub fn index_of(&self, c: &Congruence) -> Option<usize> {
        self.elements.iter().position(|e| e == c)
    }

    pub fn idx(&self, c: &Congruence) -> Result<usize> {
        self.index_of(c)
            .ok_or_else(|| Error::Refused(format!("{} is not a congruence", c.label())))
    }

    pub fn is_cover(&self, i: usize, j: usize) -> bool {
        self.covers.contains(&(i, j))
    }

    pub fn cover_char(&self, i: usize, j: usize) -> Option<&CharInfo> {
        self.covers
            .iter()
            .position(|&c| c == (i, j))
            .and_then(|k| self.cover_chars[k].as_ref())
    }

    pub fn interval(&self, lo: usize, hi: usize) -> Vec<usize> {
        (0..self.elements.len())
            .filter(|&k| self.leq[lo][k] && self.leq[k][hi])
            .collect()
    }

    pub fn join_idx(&self, i: usize, j: usize) -> usize {
        self.index_of(&self.elements[i].join(&self.elements[j]))
            .expect("lattice closed under join")
    }

    pub fn meet_idx(&self, i: usize, j: usize) -> usize {
        self.index_of(&self.elements[i].meet(&self.elements[j]))
            .expect("lattice closed under meet")
    }

    /// Maximal chains from `hi` down to `lo`, each listed top-down.
    pub fn maximal_chains(&self, lo: usize, hi: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![hi];
        self.chains_rec(lo, hi, &mut path, &mut out);
        out
    }

    fn chains_rec(&self, lo: usize, cur: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur == lo {
            out.push(path.clone());
            return;
        }
        for &(a, b) in &self.covers {
            if b == cur && self.leq[lo][a] {
                path.push(a);
                self.chains_rec(lo, a, path, out);
                path.pop();
            }
        }
    }
}

/// All congruences, closed under join, with lattice structure.
pub fn all_congruences(alg: &FiniteAlgebra) -> Result<CongruenceLattice> {
    all_congruences_bounded(alg, DEFAULT_CON_BOUND)
}

pub fn all_congruences_bounded(alg: &FiniteAlgebra, bound: usize) -> Result<CongruenceLattice> {
    let n = alg.size;
    if n > bound {
        return Err(Error::Budget(format!(
            "|A| = {n} exceeds congruence bound {bound}"
        )));
    }
    let mut set: HashSet<Congruence> = HashSet::new();
    set.insert(Congruence::identity(n));
    for a in 0..n {
        for b in a + 1..n {
            set.insert(principal_congruence(alg, a, b));
        }
    }
    loop {
        let cur: Vec<Congruence> = set.iter().cloned().collect();
        let mut grew = false;
        for i in 0..cur.len() {
            for j in i + 1..cur.len() {
                if set.insert(cur[i].join(&cur[j])) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    let mut elements: Vec<Congruence> = set.into_iter().collect();
    elements.sort_by(|a, b| b.num_classes().cmp(&a.num_classes()).then_with(|| a.cmp(b)));
    Ok(build_lattice(alg, elements))
}

fn build_lattice(alg: &FiniteAlgebra, elements: Vec<Congruence>) -> CongruenceLattice {
    let k = elements.len();
    let leq: Vec<Vec<bool>> = (0..k)
        .map(|i| (0..k).map(|j| elements[i].le(&elements[j])).collect())
        .collect();
    let mut covers = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i != j && leq[i][j] && !(0..k).any(|m| m != i && m != j && leq[i][m] && leq[m][j]) {
                covers.push((i, j));
            }
        }
    }
    let bottom = 0;
    let top = k - 1;
    let atoms = covers
        .iter()
        .filter(|c| c.0 == bottom)
        .map(|c| c.1)
        .collect();
    let mut meet_irreducibles = Vec::new();
    let mut join_irreducibles = Vec::new();
    let mut unique_cover = BTreeMap::new();
    let mut unique_subcover = BTreeMap::new();
    for i in 0..k {
        let ups: Vec<usize> = covers.iter().filter(|c| c.0 == i).map(|c| c.1).collect();
        let downs: Vec<usize> = covers.iter().filter(|c| c.1 == i).map(|c| c.0).collect();
        if i != top && ups.len() == 1 {
            meet_irreducibles.push(i);
            unique_cover.insert(i, ups[0]);
        }
        if i != bottom && downs.len() == 1 {
            join_irreducibles.push(i);
            unique_subcover.insert(i, downs[0]);
        }
    }
    let mut modular = true;
    'outer: for a in 0..k {
        for b in 0..k {
            if a == b || !leq[a][b] {
                continue;
            }
            for c in 0..k {
                let ac = elements[a].meet(&elements[c]);
                let bc = elements[b].meet(&elements[c]);
                let ajc = elements[a].join(&elements[c]);
                let bjc = elements[b].join(&elements[c]);
                if ac == bc && ajc == bjc {
                    modular = false;
                    break 'outer;
                }
            }
        }
    }
    let cover_chars = covers
        .iter()
        .map(|&(i, j)| characteristic(alg, &elements[i], &elements[j]).ok())
        .collect();
    CongruenceLattice {
        elements,
        leq,
        covers,
        atoms,
        meet_irreducibles,
        join_irreducibles,
        unique_cover,
        unique_subcover,
        modular,
        cover_chars,
    }
}

/// The subalgebra M(alpha, beta) of A^4, each element a 2x2 matrix
/// `[[m11, m12], [m21, m22]]` encoded as a 4-tuple in that order.
pub fn matrix_algebra(
    alg: &FiniteAlgebra,
    alpha: &Congruence,
    beta: &Congruence,
    budget: usize,
) -> Result<Vec<[usize; 4]>> {
    let n = alg.size;
    let enc = |m: [usize; 4]| ((m[0] * n + m[1]) * n + m[2]) * n + m[3];
    let mut seen = vec![false; n.pow(4)];
    let mut elems: Vec<[usize; 4]> = Vec::new();
    for (a, b) in alpha.pairs() {
        let m = [a, a, b, b];
        if !seen[enc(m)] {
            seen[enc(m)] = true;
            elems.push(m);
        }
    }
    for (u, v) in beta.pairs() {
        let m = [u, v, u, v];
        if !seen[enc(m)] {
            seen[enc(m)] = true;
            elems.push(m);
        }
    }
    let mut old = 0;
    loop {
        let cur = elems.len();
        for op in &alg.ops {
            let r = op.arity;
            if r == 0 {
                continue;
            }
            let mut tuple = vec![0usize; r];
            'tuples: loop {
                if tuple.iter().any(|&t| t >= old) {
                    let mut m = [0usize; 4];
                    for (c, slot) in m.iter_mut().enumerate() {
                        let mut idx = 0;
                        for &t in &tuple {
                            idx = idx * n + elems[t][c];
                        }
                        *slot = op.table[idx];
                    }
                    let e = enc(m);
                    if !seen[e] {
                        seen[e] = true;
                        elems.push(m);
                        if elems.len() > budget {
                            return Err(Error::Budget(format!("matrix algebra exceeded {budget}")));
                        }
                    }
                }
                let mut i = r;
                loop {
                    if i == 0 {
                        break 'tuples;
                    }
                    i -= 1;
                    tuple[i] += 1;
                    if tuple[i] < cur {
                        break;
                    }
                    tuple[i] = 0;
                }
            }
        }
        if elems.len() == cur {
            break;
        }
        old = cur;
    }
    Ok(elems)
}

type CommutatorKey = (u64, Congruence, Congruence);

/// Memo of computed commutators, keyed by a fingerprint of the operation tables.
fn commutator_cache() -> &'static Mutex<HashMap<CommutatorKey, Congruence>> {
    static CACHE: OnceLock<Mutex<HashMap<CommutatorKey, Congruence>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const COMMUTATOR_CACHE_CAP: usize = 4096;

fn fingerprint(alg: &FiniteAlgebra) -> u64 {
    let mut h = DefaultHasher::new();
    alg.size.hash(&mut h);
    for op in &alg.ops {
        op.arity.hash(&mut h);
        op.table.hash(&mut h);
    }
    h.finish()
}

/// Term-condition commutator: least delta such that every matrix of
/// M(alpha, beta) with top row in delta has bottom row in delta.
pub fn commutator(
    alg: &FiniteAlgebra,
    alpha: &Congruence,
    beta: &Congruence,
) -> Result<Congruence> {
    let key = (fingerprint(alg), alpha.clone(), beta.clone());
    if let Some(c) = commutator_cache().lock().expect("unpoisoned").get(&key) {
        return Ok(c.clone());
    }
    let c = commutator_uncached(alg, alpha, beta)?;
    let mut cache = commutator_cache().lock().expect("unpoisoned");
    if cache.len() >= COMMUTATOR_CACHE_CAP {
        cache.clear();
    }
    cache.insert(key, c.clone());
    Ok(c)
}

fn commutator_uncached(
    alg: &FiniteAlgebra,
    alpha: &Congruence,
    beta: &Congruence,
) -> Result<Congruence> {
    let mats = matrix_algebra(alg, alpha, beta, MATRIX_BUDGET)?;
    let n = alg.size;
    let mut delta = Congruence::identity(n);
    for _ in 0..=n * n {
        let pairs: Vec<(usize, usize)> = mats
            .iter()
            .filter(|m| delta.related(m[0], m[1]) && !delta.related(m[2], m[3]))
            .map(|m| (m[2], m[3]))
            .collect();
        if pairs.is_empty() {
            return Ok(delta);
        }
        let mut seed: Vec<(usize, usize)> = (0..n).map(|x| (x, delta.class_of(x))).collect();
        seed.extend(pairs);
        delta = cg(alg, &seed);
    }
    unreachable!("delta grows strictly and is bounded by the total relation")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "class", content = "k")]
pub enum Solvability {
    Abelian,
    Nilpotent(usize),
    Solvable(usize),
    NonSolvable,
}

impl Solvability {
    pub fn is_nilpotent(&self) -> bool {
        matches!(self, Solvability::Abelian | Solvability::Nilpotent(_))
    }
}

pub fn solvability_class(alg: &FiniteAlgebra, alpha: &Congruence) -> Result<Solvability> {
    let n = alg.size;
    let zero = Congruence::identity(n);
    if alpha.is_identity() || commutator(alg, alpha, alpha)?.is_identity() {
        return Ok(Solvability::Abelian);
    }
    // lower central chain
    let mut g = alpha.clone();
    let mut k = 1;
    loop {
        let next = commutator(alg, &g, alpha)?;
        if next == zero {
            return Ok(Solvability::Nilpotent(k));
        }
        if next == g {
            break;
        }
        g = next;
        k += 1;
    }
    let mut d = alpha.clone();
    let mut k = 1;
    loop {
        let next = commutator(alg, &d, &d)?;
        if next == zero {
            return Ok(Solvability::Solvable(k));
        }
        if next == d {
            return Ok(Solvability::NonSolvable);
        }
        d = next;
        k += 1;
    }
}

/// Common number of alpha-classes inside each beta-class, required to be a
/// prime power, on an abelian cover alpha < beta.
pub fn characteristic(
    alg: &FiniteAlgebra,
    alpha: &Congruence,
    beta: &Congruence,
) -> Result<CharInfo> {
    if !alpha.le(beta) || alpha == beta {
        return refuse(format!("{} is not below {}", alpha.label(), beta.label()));
    }
    let bb = commutator(alg, beta, beta)?;
    if !bb.le(alpha) {
        return refuse(format!(
            "cover ({}, {}) is not abelian",
            alpha.label(),
            beta.label()
        ));
    }
    let mut sizes = BTreeMap::new();
    for x in 0..alpha.size() {
        sizes
            .entry(beta.class_of(x))
            .or_insert_with(HashSet::new)
            .insert(alpha.class_of(x));
    }
    let counts: HashSet<usize> = sizes.values().map(|s| s.len()).collect();
    if counts.len() != 1 {
        return refuse(format!(
            "cover ({}, {}) has unequal coset sizes {:?}",
            alpha.label(),
            beta.label(),
            counts
        ));
    }
    let size = *counts.iter().next().unwrap();
    match arith::prime_power(size as u64) {
        Some((p, _)) => Ok(CharInfo {
            lower: alpha.clone(),
            upper: beta.clone(),
            characteristic: p,
            coset_size: size,
        }),
        None => refuse(format!("coset size {size} is not a prime power")),
    }
}

/// Characteristics of all covers inside the interval [lo, hi].
pub fn charr_set(lat: &CongruenceLattice, lo: usize, hi: usize) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for (k, &(a, b)) in lat.covers.iter().enumerate() {
        if lat.leq[lo][a] && lat.leq[b][hi] {
            match &lat.cover_chars[k] {
                Some(c) => out.push(c.characteristic),
                None => {
                    return refuse(format!(
                        "cover ({}, {}) has no characteristic",
                        lat.elements[a].label(),
                        lat.elements[b].label()
                    ))
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Search for a PUPI witness {alpha_i} of [lo, hi]; smallest families first.
pub fn is_pupi(lat: &CongruenceLattice, lo: usize, hi: usize) -> Option<Vec<usize>> {
    if lo == hi || !lat.leq[lo][hi] {
        return None;
    }
    let interval = lat.interval(lo, hi);
    let cands: Vec<usize> = interval
        .iter()
        .copied()
        .filter(|&g| g != lo && charr_set(lat, lo, g).map_or(false, |c| c.len() == 1))
        .collect();
    let atoms = interval.iter().filter(|&&g| lat.is_cover(lo, g)).count();
    for size in 1..=atoms.max(1) {
        let mut pick = Vec::new();
        if let Some(w) = pupi_search(lat, lo, hi, &cands, 0, size, &mut pick) {
            return Some(w);
        }
    }
    None
}

fn pupi_search(
    lat: &CongruenceLattice,
    lo: usize,
    hi: usize,
    cands: &[usize],
    from: usize,
    size: usize,
    pick: &mut Vec<usize>,
) -> Option<Vec<usize>> {
    if pick.len() == size {
        return if pupi_family_ok(lat, lo, hi, pick) {
            Some(pick.clone())
        } else {
            None
        };
    }
    for i in from..cands.len() {
        let c = cands[i];
        if pick.iter().any(|&p| lat.leq[p][c] || lat.leq[c][p]) {
            continue;
        }
        pick.push(c);
        if let Some(w) = pupi_search(lat, lo, hi, cands, i + 1, size, pick) {
            return Some(w);
        }
        pick.pop();
    }
    None
}

fn pupi_family_ok(lat: &CongruenceLattice, lo: usize, hi: usize, fam: &[usize]) -> bool {
    let join = fam.iter().fold(lo, |acc, &x| lat.join_idx(acc, x));
    if join != hi {
        return false;
    }
    (0..fam.len()).all(|i| {
        let rest = fam
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(lo, |acc, (_, &x)| lat.join_idx(acc, x));
        lat.meet_idx(fam[i], rest) == lo
    })
}

fn require_nilpotent(alg: &FiniteAlgebra) -> Result<()> {
    let one = Congruence::total(alg.size);
    let s = solvability_class(alg, &one)?;
    if !s.is_nilpotent() {
        return refuse(format!("{} is not nilpotent ({s:?})", alg.name));
    }
    Ok(())
}

/// Length of the shortest PUPI chain from 0 to 1.
pub fn supernilpotent_rank(alg: &FiniteAlgebra, lat: &CongruenceLattice) -> Result<usize> {
    require_nilpotent(alg)?;
    let (bot, top) = (lat.bottom(), lat.top());
    if bot == top {
        return Ok(0);
    }
    let k = lat.elements.len();
    let mut dist = vec![usize::MAX; k];
    dist[bot] = 0;
    let mut q = VecDeque::from([bot]);
    while let Some(a) = q.pop_front() {
        for b in 0..k {
            if dist[b] == usize::MAX && a != b && lat.leq[a][b] && is_pupi(lat, a, b).is_some() {
                dist[b] = dist[a] + 1;
                if b == top {
                    return Ok(dist[b]);
                }
                q.push_back(b);
            }
        }
    }
    refuse("no PUPI chain from 0 to 1")
}

#[derive(Clone, Debug, Serialize)]
pub struct Distinguished {
    pub sigma: Congruence,
    pub kappa: Congruence,
    pub sigma_p: BTreeMap<u64, Congruence>,
}

fn unique_extremum(
    lat: &CongruenceLattice,
    cands: &[usize],
    max: bool,
    what: &str,
) -> Result<usize> {
    let ext: Vec<usize> = cands
        .iter()
        .copied()
        .filter(|&c| {
            cands
                .iter()
                .all(|&d| if max { lat.leq[d][c] } else { lat.leq[c][d] })
        })
        .collect();
    match ext.as_slice() {
        [one] => Ok(*one),
        _ => refuse(format!(
            "{what} is not unique; candidates {:?}",
            cands
                .iter()
                .map(|&c| lat.elements[c].label())
                .collect::<Vec<_>>()
        )),
    }
}

pub fn distinguished_congruences(
    alg: &FiniteAlgebra,
    lat: &CongruenceLattice,
) -> Result<Distinguished> {
    require_nilpotent(alg)?;
    let (bot, top) = (lat.bottom(), lat.top());
    let k = lat.elements.len();
    let below: Vec<usize> = (0..k)
        .filter(|&b| b == bot || is_pupi(lat, bot, b).is_some())
        .collect();
    let sigma = unique_extremum(lat, &below, true, "sigma")?;
    let above: Vec<usize> = (0..k)
        .filter(|&b| b == top || is_pupi(lat, b, top).is_some())
        .collect();
    let kappa = unique_extremum(lat, &above, false, "kappa")?;
    let mut sigma_p = BTreeMap::new();
    for p in arith::prime_divisors(alg.size as u64) {
        let cands: Vec<usize> = below
            .iter()
            .copied()
            .filter(|&b| {
                lat.elements[b]
                    .blocks()
                    .iter()
                    .all(|bl| arith::is_power_of(bl.len() as u64, p))
            })
            .collect();
        let s = unique_extremum(lat, &cands, true, &format!("sigma_{p}"))?;
        sigma_p.insert(p, lat.elements[s].clone());
    }
    Ok(Distinguished {
        sigma: lat.elements[sigma].clone(),
        kappa: lat.elements[kappa].clone(),
        sigma_p,
    })
}
