//! Finite algebras, polynomial closure, Malcev search and direct decompositions.

use rustc_hash::FxHashMap;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::arith;
use crate::circuit::{AlgCircuit, CircuitRepr};
use crate::congruence::{Congruence, CongruenceLattice};
use crate::error::{malformed, Error, Result};

pub const DEFAULT_CLONE_BUDGET: usize = 100_000;
pub const DEFAULT_MALCEV_DEPTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub name: String,
    pub arity: usize,
    pub table: Vec<usize>,
}

impl Operation {
    pub fn new(name: &str, arity: usize, table: Vec<usize>) -> Self {
        Operation {
            name: name.to_string(),
            arity,
            table,
        }
    }

    /// Build a table from a closure over argument tuples.
    pub fn from_fn(name: &str, arity: usize, n: usize, f: impl Fn(&[usize]) -> usize) -> Self {
        let len = n.pow(arity as u32);
        let mut table = Vec::with_capacity(len);
        let mut args = vec![0; arity];
        for idx in 0..len {
            let mut r = idx;
            for i in (0..arity).rev() {
                args[i] = r % n;
                r /= n;
            }
            table.push(f(&args));
        }
        Operation::new(name, arity, table)
    }

    /// Row-major lookup: index = sum args[i] * n^(arity-1-i).
    #[inline]
    pub fn apply(&self, n: usize, args: &[usize]) -> usize {
        let mut idx = 0;
        for &a in args {
            idx = idx * n + a;
        }
        self.table[idx]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteAlgebra {
    pub name: String,
    pub size: usize,
    pub ops: Vec<Operation>,
}

impl FiniteAlgebra {
    pub fn new(name: &str, size: usize, ops: Vec<Operation>) -> Result<Self> {
        let a = FiniteAlgebra {
            name: name.to_string(),
            size,
            ops,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return malformed("algebra must have at least one element");
        }
        for (i, op) in self.ops.iter().enumerate() {
            if self.ops[..i].iter().any(|o| o.name == op.name) {
                return malformed(format!("duplicate operation name `{}`", op.name));
            }
            let len = self
                .size
                .checked_pow(op.arity as u32)
                .ok_or_else(|| Error::Malformed("table too large".into()))?;
            if op.table.len() != len {
                return malformed(format!(
                    "operation `{}` has table length {}, expected {}",
                    op.name,
                    op.table.len(),
                    len
                ));
            }
            if let Some(&v) = op.table.iter().find(|&&v| v >= self.size) {
                return Err(Error::OutOfRange(v));
            }
        }
        Ok(())
    }

    pub fn op_index(&self, name: &str) -> Result<usize> {
        self.ops
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| Error::UnknownOp(name.to_string()))
    }

    pub fn eval_op(&self, op_name: &str, args: &[usize]) -> Result<usize> {
        let op = &self.ops[self.op_index(op_name)?];
        if args.len() != op.arity {
            return Err(Error::Arity {
                expected: op.arity,
                got: args.len(),
            });
        }
        if let Some(&a) = args.iter().find(|&&a| a >= self.size) {
            return Err(Error::OutOfRange(a));
        }
        Ok(op.apply(self.size, args))
    }

    pub fn max_arity(&self) -> usize {
        self.ops.iter().map(|o| o.arity).max().unwrap_or(0)
    }
}

/// On-disk algebra format; an optional Malcev circuit may ride along.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraFile {
    pub name: String,
    pub size: usize,
    pub ops: Vec<Operation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub malcev: Option<CircuitRepr>,
}

impl AlgebraFile {
    pub fn into_parts(self) -> Result<(FiniteAlgebra, Option<AlgCircuit>)> {
        let alg = FiniteAlgebra::new(&self.name, self.size, self.ops)?;
        let d = match &self.malcev {
            Some(r) => {
                let d = AlgCircuit::from_repr(r, &alg)?;
                if d.k != 3 || !is_malcev(&alg, &d) {
                    return malformed("supplied malcev circuit fails d(y,x,x)=d(x,x,y)=y");
                }
                Some(d)
            }
            None => None,
        };
        Ok((alg, d))
    }

    pub fn from_parts(alg: &FiniteAlgebra, d: Option<&AlgCircuit>) -> Self {
        AlgebraFile {
            name: alg.name.clone(),
            size: alg.size,
            ops: alg.ops.clone(),
            malcev: d.map(|d| d.to_repr(alg)),
        }
    }
}

#[derive(Clone, Debug)]
enum Recipe {
    Var(usize),
    Const(usize),
    Op(usize, Vec<usize>),
}

/// Polynomial functions `A^k -> A` reachable from projections and constants.
///
/// Functions are stored as value tables over `A^k` (row-major); each keeps a
/// recipe so that a witness circuit can be rebuilt.
#[derive(Clone, Debug)]
pub struct PolyClosure {
    pub k: usize,
    pub fns: Vec<Vec<usize>>,
    /// Round (circuit depth) at which each function first appeared.
    pub depth: Vec<usize>,
    recipe: Vec<Recipe>,
    index: FxHashMap<Vec<usize>, usize>,
    frontier: usize,
    rounds: usize,
    complete: bool,
}

impl PolyClosure {
    pub fn new(alg: &FiniteAlgebra, k: usize) -> Self {
        let n = alg.size;
        let pts = n.pow(k as u32);
        let mut c = PolyClosure {
            k,
            fns: Vec::new(),
            depth: Vec::new(),
            recipe: Vec::new(),
            index: FxHashMap::default(),
            frontier: 0,
            rounds: 0,
            complete: false,
        };
        for v in 0..k {
            let table = (0..pts)
                .map(|i| (i / n.pow((k - 1 - v) as u32)) % n)
                .collect();
            c.insert(table, Recipe::Var(v));
        }
        for a in 0..n {
            c.insert(vec![a; pts], Recipe::Const(a));
        }
        c
    }

    fn insert(&mut self, table: Vec<usize>, r: Recipe) -> bool {
        if self.index.contains_key(&table) {
            return false;
        }
        self.index.insert(table.clone(), self.fns.len());
        self.fns.push(table);
        self.recipe.push(r);
        self.depth.push(self.rounds);
        true
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn find(&self, table: &[usize]) -> Option<usize> {
        self.index.get(table).copied()
    }

    /// One semi-naive round: apply every basic operation to tuples that use
    /// at least one function discovered in the previous round. Returns the
    /// number of new functions.
    pub fn step(&mut self, alg: &FiniteAlgebra, budget: usize) -> Result<usize> {
        self.step_until(alg, budget, &|_| false)
            .map(|(added, _)| added)
    }

    /// Like `step`, but stops as soon as a new function satisfies `stop`.
    pub fn step_until(
        &mut self,
        alg: &FiniteAlgebra,
        budget: usize,
        stop: &dyn Fn(&[usize]) -> bool,
    ) -> Result<(usize, Option<usize>)> {
        if self.complete {
            return Ok((0, None));
        }
        let old = self.frontier;
        let cur = self.fns.len();
        self.frontier = cur;
        self.rounds += 1;
        let n = alg.size;
        let pts = self.fns.first().map_or(0, |f| f.len());
        let mut added = 0;
        let mut scratch = Vec::with_capacity(pts);
        for (oi, op) in alg.ops.iter().enumerate() {
            let r = op.arity;
            if r == 0 {
                continue;
            }
            let mut tuple = vec![0usize; r];
            'tuples: loop {
                if tuple.iter().any(|&t| t >= old) {
                    scratch.clear();
                    for p in 0..pts {
                        let mut idx = 0;
                        for &t in &tuple {
                            idx = idx * n + self.fns[t][p];
                        }
                        scratch.push(op.table[idx]);
                    }
                    if !self.index.contains_key(scratch.as_slice())
                        && self.insert(scratch.clone(), Recipe::Op(oi, tuple.clone()))
                    {
                        added += 1;
                        let last = self.fns.len() - 1;
                        if stop(&self.fns[last]) {
                            return Ok((added, Some(last)));
                        }
                        if self.fns.len() > budget {
                            return Err(Error::Budget(format!(
                                "polynomial closure exceeded {budget} functions ({} found)",
                                self.fns.len()
                            )));
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
        if added == 0 {
            self.complete = true;
        }
        Ok((added, None))
    }

    pub fn close(&mut self, alg: &FiniteAlgebra, budget: usize) -> Result<()> {
        while !self.complete {
            self.step(alg, budget)?;
        }
        Ok(())
    }

    /// Witness circuit for function `i`.
    pub fn witness(&self, i: usize) -> AlgCircuit {
        let mut c = AlgCircuit::new(self.k);
        let mut memo: HashMap<usize, usize> = HashMap::new();
        let out = self.build(i, &mut c, &mut memo);
        c.with_output(out)
    }

    fn build(&self, i: usize, c: &mut AlgCircuit, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&id) = memo.get(&i) {
            return id;
        }
        let id = match &self.recipe[i] {
            Recipe::Var(v) => c.var(*v),
            Recipe::Const(a) => c.constant(*a),
            Recipe::Op(op, ch) => {
                let args = ch.iter().map(|&j| self.build(j, c, memo)).collect();
                c.gate(*op, args)
            }
        };
        memo.insert(i, id);
        id
    }
}

#[derive(Clone, Debug)]
pub struct UnaryFn {
    pub values: Vec<usize>,
    pub witness: Option<AlgCircuit>,
}

impl UnaryFn {
    pub fn apply(&self, x: usize) -> usize {
        self.values[x]
    }

    pub fn range(&self) -> Vec<usize> {
        let mut r = self.values.clone();
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn compose(&self, inner: &UnaryFn) -> UnaryFn {
        let values = inner.values.iter().map(|&x| self.values[x]).collect();
        let witness = match (&self.witness, &inner.witness) {
            (Some(o), Some(i)) => Some(o.compose(std::slice::from_ref(i))),
            _ => None,
        };
        UnaryFn { values, witness }
    }

    pub fn is_idempotent(&self) -> bool {
        self.values.iter().all(|&y| self.values[y] == y)
    }
}

/// The unary polynomial clone, in discovery order (identity, constants, then by depth).
pub fn unary_polynomial_clone(alg: &FiniteAlgebra, budget: usize) -> Result<Vec<UnaryFn>> {
    let cl = unary_closure(alg, budget)?;
    Ok((0..cl.len())
        .map(|i| UnaryFn {
            values: cl.fns[i].clone(),
            witness: Some(cl.witness(i)),
        })
        .collect())
}

pub fn unary_closure(alg: &FiniteAlgebra, budget: usize) -> Result<PolyClosure> {
    let mut cl = PolyClosure::new(alg, 1);
    cl.close(alg, budget)?;
    Ok(cl)
}

pub fn is_malcev(alg: &FiniteAlgebra, d: &AlgCircuit) -> bool {
    let n = alg.size;
    (0..n).all(|x| {
        (0..n).all(|y| {
            d.eval_all(alg, &[y, x, x])[d.output] == y && d.eval_all(alg, &[x, x, y])[d.output] == y
        })
    })
}

/// Iterative deepening over ternary polynomials (depth = rounds of operation
/// application), deduplicated by function table.
pub fn find_malcev_polynomial(alg: &FiniteAlgebra, depth_bound: usize) -> Option<AlgCircuit> {
    find_malcev_with_budget(alg, depth_bound, DEFAULT_CLONE_BUDGET * 4)
}

pub fn find_malcev_with_budget(
    alg: &FiniteAlgebra,
    depth_bound: usize,
    budget: usize,
) -> Option<AlgCircuit> {
    let n = alg.size;
    let check = |t: &[usize]| {
        (0..n).all(|x| (0..n).all(|y| t[(y * n + x) * n + x] == y && t[(x * n + x) * n + y] == y))
    };
    let mut cl = PolyClosure::new(alg, 3);
    if let Some(i) = (0..cl.len()).find(|&i| check(&cl.fns[i])) {
        return Some(cl.witness(i));
    }
    for _ in 0..depth_bound {
        match cl.step_until(alg, budget, &check) {
            Ok((_, Some(i))) => return Some(cl.witness(i)),
            Ok(_) if cl.is_complete() => return None,
            Ok(_) => {}
            Err(_) => return None,
        }
    }
    None
}

/// Quotient by a congruence; classes are indexed in order of their least member.
pub fn quotient_algebra(
    alg: &FiniteAlgebra,
    theta: &Congruence,
) -> Result<(FiniteAlgebra, Vec<usize>)> {
    if theta.size() != alg.size {
        return malformed("partition size does not match the algebra");
    }
    if !theta.is_compatible(alg) {
        return Err(Error::Refused(
            "partition is not compatible with the operations".into(),
        ));
    }
    let proj = theta.class_indices();
    let reps = theta.representatives();
    let m = reps.len();
    let ops = alg
        .ops
        .iter()
        .map(|op| {
            Operation::from_fn(&op.name, op.arity, m, |cls| {
                let args: Vec<usize> = cls.iter().map(|&c| reps[c]).collect();
                proj[op.apply(alg.size, &args)]
            })
        })
        .collect();
    let q = FiniteAlgebra::new(&format!("{}/{}", alg.name, theta.label()), m, ops)?;
    Ok((q, proj))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub factors: Vec<Congruence>,
    pub factor_sizes: Vec<usize>,
}

impl Decomposition {
    /// Check the product-decomposition invariants.
    pub fn is_valid(&self, n: usize) -> bool {
        if self.factors.is_empty() {
            return n == 1;
        }
        let meet_all = self
            .factors
            .iter()
            .skip(1)
            .fold(self.factors[0].clone(), |a, b| a.meet(b));
        if !meet_all.is_identity() {
            return false;
        }
        for i in 0..self.factors.len() {
            let others = self
                .factors
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(Congruence::total(n), |a, (_, b)| a.meet(b));
            if !self.factors[i].join(&others).is_total() {
                return false;
            }
        }
        self.factor_sizes.iter().product::<usize>() == n
    }
}

/// Fewest-factor decomposition into prime-power quotients, one per prime of |A|.
pub fn prime_power_decomposition(
    alg: &FiniteAlgebra,
    lat: &CongruenceLattice,
) -> Option<Decomposition> {
    let n = alg.size;
    if n == 1 {
        return Some(Decomposition {
            factors: vec![],
            factor_sizes: vec![],
        });
    }
    if arith::prime_power(n as u64).is_some() {
        return Some(Decomposition {
            factors: vec![Congruence::identity(n)],
            factor_sizes: vec![n],
        });
    }
    let primes = arith::prime_divisors(n as u64);
    let mut by_prime: Vec<Vec<usize>> = vec![Vec::new(); primes.len()];
    for (i, c) in lat.elements.iter().enumerate() {
        let q = c.num_classes() as u64;
        if let Some((p, _)) = arith::prime_power(q) {
            if let Some(pi) = primes.iter().position(|&x| x == p) {
                by_prime[pi].push(i);
            }
        }
    }
    let mut choice = vec![0usize; primes.len()];
    if by_prime.iter().any(|v| v.is_empty()) {
        return None;
    }
    loop {
        let factors: Vec<Congruence> = choice
            .iter()
            .enumerate()
            .map(|(pi, &j)| lat.elements[by_prime[pi][j]].clone())
            .collect();
        let factor_sizes = factors.iter().map(|c| c.num_classes()).collect();
        let d = Decomposition {
            factors,
            factor_sizes,
        };
        if d.is_valid(n) {
            return Some(d);
        }
        let mut i = primes.len();
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < by_prime[i].len() {
                break;
            }
            choice[i] = 0;
        }
    }
}
