//! Decision procedures for ProgCSat, CSat and CEqv, and the reductions
//! between them.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{is_malcev, quotient_algebra, FiniteAlgebra};
use crate::circuit::{AlgCircuit, Node};
use crate::congruence::{solvability_class, Congruence, CongruenceLattice};
use crate::error::{refuse, Error, Result};
use crate::program::{relabel_constants, word, AlgProgram, Instruction};

pub const PROGCSAT_MAX_N: usize = 24;
pub const EQUATION_SCAN_LIMIT: u64 = 10_000_000;

/// Below this many inputs a scan stays on the calling thread.
const PARALLEL_THRESHOLD: u64 = 1 << 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Status {
    /// A witness: a boolean word (as 0/1) for programs, an assignment for equations.
    Sat {
        witness: Vec<usize>,
    },
    /// `certain` is false for sampled searches.
    Unsat {
        certain: bool,
    },
    Holds,
    Fails {
        counterexample: Vec<usize>,
    },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Stats {
    pub inputs_tried: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Kept out of JSON so identical runs print identical bytes.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    #[serde(flatten)]
    pub status: Status,
    pub stats: Stats,
}

impl SolveResult {
    pub fn is_positive(&self) -> bool {
        matches!(self.status, Status::Sat { .. } | Status::Holds)
    }
}

/// `lhs(x̄) = rhs(x̄)`; both sides read the same `k` variables.
#[derive(Clone, Debug)]
pub struct Equation {
    pub lhs: AlgCircuit,
    pub rhs: AlgCircuit,
}

impl Equation {
    pub fn new(lhs: AlgCircuit, rhs: AlgCircuit) -> Result<Self> {
        if lhs.k != rhs.k {
            return Err(Error::Arity {
                expected: lhs.k,
                got: rhs.k,
            });
        }
        Ok(Equation { lhs, rhs })
    }

    /// `t(x̄) = e`.
    pub fn against_constant(t: AlgCircuit, e: usize) -> Self {
        let mut rhs = AlgCircuit::new(t.k);
        let c = rhs.constant(e);
        Equation {
            lhs: t,
            rhs: rhs.with_output(c),
        }
    }

    pub fn vars(&self) -> usize {
        self.lhs.k
    }

    pub fn holds_at(&self, alg: &FiniteAlgebra, x: &[usize]) -> bool {
        self.lhs.eval_all(alg, x)[self.lhs.output] == self.rhs.eval_all(alg, x)[self.rhs.output]
    }

    fn constant_rhs(&self) -> Option<usize> {
        match self.rhs.nodes.get(self.rhs.output) {
            Some(Node::Const(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn validate(&self, alg: &FiniteAlgebra) -> Result<()> {
        self.lhs.validate(alg)?;
        self.rhs.validate(alg)
    }
}

/// First index in `0..total` satisfying `hit`, scanning in parallel chunks
/// and keeping the least hit.
fn first_hit(total: u64, hit: impl Fn(u64) -> bool + Sync) -> Option<u64> {
    if total < PARALLEL_THRESHOLD {
        return (0..total).find(|&i| hit(i));
    }
    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(8) as u64;
    let chunk = total.div_ceil(workers);
    let best = std::sync::atomic::AtomicU64::new(u64::MAX);
    std::thread::scope(|sc| {
        for w in 0..workers {
            let (hit, best) = (&hit, &best);
            sc.spawn(move || {
                let (lo, hi) = (w * chunk, ((w + 1) * chunk).min(total));
                for i in lo..hi {
                    if i > best.load(std::sync::atomic::Ordering::Relaxed) {
                        return;
                    }
                    if hit(i) {
                        best.fetch_min(i, std::sync::atomic::Ordering::Relaxed);
                        return;
                    }
                }
            });
        }
    });
    let b = best.into_inner();
    (b != u64::MAX).then_some(b)
}

fn bits(b: &[bool]) -> Vec<usize> {
    b.iter().map(|&x| x as usize).collect()
}

fn accepts(alg: &FiniteAlgebra, p: &AlgProgram, b: &[bool]) -> bool {
    let v = p.node_values(alg, b)[p.circuit.output];
    p.accepting.binary_search(&v).is_ok()
}

/// Scan `{0,1}^n` in index order (bit 0 least significant).
pub fn progcsat_exhaustive(alg: &FiniteAlgebra, p: &AlgProgram) -> Result<SolveResult> {
    if p.n > PROGCSAT_MAX_N {
        return Err(Error::Budget(format!(
            "n = {} exceeds {PROGCSAT_MAX_N}",
            p.n
        )));
    }
    p.validate(alg)?;
    let start = Instant::now();
    let total = 1u64 << p.n;
    let found = first_hit(total, |i| accepts(alg, p, &word(i as usize, p.n)));
    let status = match found {
        Some(i) => {
            let w = word(i as usize, p.n);
            debug_assert!(p.eval(alg, &w)?.1);
            Status::Sat { witness: bits(&w) }
        }
        None => Status::Unsat { certain: true },
    };
    let inputs_tried = found.map_or(total, |i| i + 1);
    Ok(SolveResult {
        status,
        stats: Stats {
            inputs_tried,
            elapsed: start.elapsed(),
            ..Stats::default()
        },
    })
}

/// Trials used when none are given: 4·size(P)².
pub fn default_trials(p: &AlgProgram) -> u64 {
    let s = p.size().max(1) as u64;
    4 * s * s
}

/// Uniform random words from a seeded generator. A negative answer is never certain.
pub fn progcsat_sample(
    alg: &FiniteAlgebra,
    p: &AlgProgram,
    trials: u64,
    seed: u64,
) -> Result<SolveResult> {
    if trials == 0 {
        return Err(Error::Malformed("trials must be at least 1".into()));
    }
    p.validate(alg)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut status = Status::Unsat { certain: false };
    let mut tried = 0;
    for _ in 0..trials {
        tried += 1;
        let w: Vec<bool> = (0..p.n).map(|_| rng.gen()).collect();
        if accepts(alg, p, &w) {
            status = Status::Sat { witness: bits(&w) };
            break;
        }
    }
    let stats = Stats {
        inputs_tried: tried,
        trials: Some(trials),
        seed: Some(seed),
        elapsed: start.elapsed(),
    };
    Ok(SolveResult { status, stats })
}

/// `t' = d(s, t, e)`; in a nilpotent Malcev algebra `t' = e` iff `s = t`.
pub fn normalize_equation(
    d: &AlgCircuit,
    s: &AlgCircuit,
    t: &AlgCircuit,
    e: usize,
) -> Result<AlgCircuit> {
    if s.k != t.k {
        return Err(Error::Arity {
            expected: s.k,
            got: t.k,
        });
    }
    let mut c = AlgCircuit::new(s.k);
    let vars: Vec<usize> = (0..s.k).map(|i| c.var(i)).collect();
    let so = s.embed(&mut c, &vars);
    let to = t.embed(&mut c, &vars);
    let eo = c.constant(e);
    let out = d.embed(&mut c, &[so, to, eo]);
    Ok(c.with_output(out))
}

fn check_reduction_hypotheses(alg: &FiniteAlgebra, d: &AlgCircuit) -> Result<()> {
    let malcev = is_malcev(alg, d);
    let nilpotent = solvability_class(alg, &Congruence::total(alg.size))?.is_nilpotent();
    match (malcev, nilpotent) {
        (true, true) => Ok(()),
        (false, true) => refuse("the given circuit is not a Malcev polynomial"),
        (true, false) => refuse("the algebra is not nilpotent"),
        (false, false) => {
            refuse("the algebra is not nilpotent and the given circuit is not a Malcev polynomial")
        }
    }
}

/// `t(x̄) = e` as a circuit and its constant, normalizing at `e = 0` when
/// the right side is not already a constant.
fn as_constant_equation(d: &AlgCircuit, eq: &Equation) -> Result<(AlgCircuit, usize)> {
    match eq.constant_rhs() {
        Some(e) => Ok((eq.lhs.clone(), e)),
        None => Ok((normalize_equation(d, &eq.lhs, &eq.rhs, 0)?, 0)),
    }
}

/// Each variable becomes `k = |A| − 1` bits feeding the chain
/// `f = d(…d(d(y₁,a₀,y₂),a₀,y₃)…,a₀,y_k)` with `y_j ∈ {a₀, a_j}`, a₀ = 0.
fn equation_program(
    alg: &FiniteAlgebra,
    d: &AlgCircuit,
    eq: &Equation,
    complement: bool,
) -> Result<AlgProgram> {
    check_reduction_hypotheses(alg, d)?;
    eq.validate(alg)?;
    let (t, e) = as_constant_equation(d, eq)?;
    let (vars, k, a0) = (t.k, alg.size - 1, 0);
    let mut c = AlgCircuit::new(vars * k);
    let mut instructions = Vec::with_capacity(vars * k);
    let mut chains = Vec::with_capacity(vars);
    for i in 0..vars {
        let ys: Vec<usize> = (0..k).map(|j| c.var(i * k + j)).collect();
        for (j, _) in ys.iter().enumerate() {
            instructions.push(Instruction {
                var: i * k + j,
                bit: i * k + j,
                a0,
                a1: j + 1,
            });
        }
        let z = c.constant(a0);
        let mut acc = ys.first().copied().unwrap_or(z);
        for &y in ys.iter().skip(1) {
            acc = d.embed(&mut c, &[acc, z, y]);
        }
        chains.push(acc);
    }
    let out = t.embed(&mut c, &chains);
    let accepting = if complement {
        (0..alg.size).filter(|&x| x != e).collect()
    } else {
        vec![e]
    };
    AlgProgram::new(c.with_output(out), vars * k, instructions, accepting)
}

/// A program accepting some word iff `eq` has a solution in `alg`.
pub fn csat_to_progcsat(alg: &FiniteAlgebra, d: &AlgCircuit, eq: &Equation) -> Result<AlgProgram> {
    equation_program(alg, d, eq, false)
}

/// A program accepting no word iff `eq` is an identity of `alg`.
pub fn ceqv_to_progcsat(alg: &FiniteAlgebra, d: &AlgCircuit, eq: &Equation) -> Result<AlgProgram> {
    equation_program(alg, d, eq, true)
}

/// Assignment number `i` in base |A|, variable 0 least significant.
fn assignment(i: u64, n: usize, vars: usize) -> Vec<usize> {
    let mut i = i;
    (0..vars)
        .map(|_| {
            let x = (i % n as u64) as usize;
            i /= n as u64;
            x
        })
        .collect()
}

fn scan_size(alg: &FiniteAlgebra, vars: usize, limit: u64) -> Result<u64> {
    let total = (alg.size as u64)
        .checked_pow(vars as u32)
        .filter(|&t| t <= limit);
    total.ok_or_else(|| Error::Budget(format!("{}^{vars} assignments exceed {limit}", alg.size)))
}

pub fn csat_exhaustive(alg: &FiniteAlgebra, eq: &Equation, limit: u64) -> Result<SolveResult> {
    eq.validate(alg)?;
    let start = Instant::now();
    let total = scan_size(alg, eq.vars(), limit)?;
    let found = first_hit(total, |i| {
        eq.holds_at(alg, &assignment(i, alg.size, eq.vars()))
    });
    let status = match found {
        Some(i) => Status::Sat {
            witness: assignment(i, alg.size, eq.vars()),
        },
        None => Status::Unsat { certain: true },
    };
    let inputs_tried = found.map_or(total, |i| i + 1);
    Ok(SolveResult {
        status,
        stats: Stats {
            inputs_tried,
            elapsed: start.elapsed(),
            ..Stats::default()
        },
    })
}

pub fn ceqv_exhaustive(alg: &FiniteAlgebra, eq: &Equation, limit: u64) -> Result<SolveResult> {
    eq.validate(alg)?;
    let start = Instant::now();
    let total = scan_size(alg, eq.vars(), limit)?;
    let found = first_hit(total, |i| {
        !eq.holds_at(alg, &assignment(i, alg.size, eq.vars()))
    });
    let status = match found {
        Some(i) => Status::Fails {
            counterexample: assignment(i, alg.size, eq.vars()),
        },
        None => Status::Holds,
    };
    let inputs_tried = found.map_or(total, |i| i + 1);
    Ok(SolveResult {
        status,
        stats: Stats {
            inputs_tried,
            elapsed: start.elapsed(),
            ..Stats::default()
        },
    })
}

/// Translate a ProgCSat answer for an equation program back to the equation:
/// a word is decoded through the variable chains.
pub fn decode_assignment(
    alg: &FiniteAlgebra,
    d: &AlgCircuit,
    vars: usize,
    word_bits: &[usize],
) -> Vec<usize> {
    let k = alg.size - 1;
    (0..vars)
        .map(|i| {
            let ys: Vec<usize> = (0..k)
                .map(|j| if word_bits[i * k + j] == 1 { j + 1 } else { 0 })
                .collect();
            let mut acc = ys.first().copied().unwrap_or(0);
            for &y in ys.iter().skip(1) {
                acc = d.eval_all(alg, &[acc, 0, y])[d.output];
            }
            acc
        })
        .collect()
}

/// Check the identity in every quotient by a meet-irreducible congruence;
/// a failure is pulled back along class representatives.
pub fn ceqv_via_meet_irreducibles(
    alg: &FiniteAlgebra,
    lat: &CongruenceLattice,
    eq: &Equation,
    limit: u64,
) -> Result<SolveResult> {
    eq.validate(alg)?;
    let start = Instant::now();
    let mut tried = 0;
    for &m in &lat.meet_irreducibles {
        let theta = &lat.elements[m];
        let (q, proj) = quotient_algebra(alg, theta)?;
        let qeq = Equation {
            lhs: relabel_constants(&eq.lhs, &proj),
            rhs: relabel_constants(&eq.rhs, &proj),
        };
        let r = ceqv_exhaustive(&q, &qeq, limit)?;
        tried += r.stats.inputs_tried;
        if let Status::Fails { counterexample } = r.status {
            let reps = theta.representatives();
            let x: Vec<usize> = counterexample.iter().map(|&c| reps[c]).collect();
            if eq.holds_at(alg, &x) {
                return Err(Error::Verification(format!(
                    "pulled-back counterexample {x:?} satisfies the equation"
                )));
            }
            let stats = Stats {
                inputs_tried: tried,
                elapsed: start.elapsed(),
                ..Stats::default()
            };
            return Ok(SolveResult {
                status: Status::Fails { counterexample: x },
                stats,
            });
        }
    }
    Ok(SolveResult {
        status: Status::Holds,
        stats: Stats {
            inputs_tried: tried,
            elapsed: start.elapsed(),
            ..Stats::default()
        },
    })
}

/// Lift a program over `A/θ` to one over `A`: constants and instructions go
/// to class representatives, the accepting set to the union of its classes.
pub fn quotient_reduce_progcsat(
    alg: &FiniteAlgebra,
    theta: &Congruence,
    p: &AlgProgram,
) -> Result<AlgProgram> {
    let (q, proj) = quotient_algebra(alg, theta)?;
    p.validate(&q)?;
    let reps = theta.representatives();
    let circuit = relabel_constants(&p.circuit, &reps);
    let instructions = p
        .instructions
        .iter()
        .map(|i| Instruction {
            var: i.var,
            bit: i.bit,
            a0: reps[i.a0],
            a1: reps[i.a1],
        })
        .collect();
    let accepting = (0..alg.size)
        .filter(|&x| p.accepting.contains(&proj[x]))
        .collect();
    AlgProgram::new(circuit, p.n, instructions, accepting)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::all_congruences;
    use crate::fixtures;
    use crate::program::sum_program;

    fn var(k: usize, i: usize) -> AlgCircuit {
        let mut c = AlgCircuit::new(k);
        let v = c.var(i);
        c.with_output(v)
    }

    /// `x_i + ... + x_j (+ c)` over op 0.
    fn sum(k: usize, vars: &[usize], c: Option<usize>) -> AlgCircuit {
        let mut circ = AlgCircuit::new(k);
        let mut terms: Vec<usize> = vars.iter().map(|&i| circ.var(i)).collect();
        if let Some(c) = c {
            terms.push(circ.constant(c));
        }
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = circ.gate(0, vec![acc, t]);
        }
        circ.with_output(acc)
    }

    fn parity(k: usize, inner: &AlgCircuit) -> AlgCircuit {
        let mut c = AlgCircuit::new(k);
        let vars: Vec<usize> = (0..k).map(|i| c.var(i)).collect();
        let x = inner.embed(&mut c, &vars);
        let o = c.gate(1, vec![x]);
        c.with_output(o)
    }

    fn and2_z6mod2() -> (FiniteAlgebra, AlgProgram) {
        // bits read as 1 or 3; the sum is 0 only when both read 3
        let alg = fixtures::z6mod2();
        let c = sum(2, &[0, 1], None);
        let ins = vec![
            Instruction {
                var: 0,
                bit: 0,
                a0: 1,
                a1: 3,
            },
            Instruction {
                var: 1,
                bit: 1,
                a0: 1,
                a1: 3,
            },
        ];
        (alg, AlgProgram::new(c, 2, ins, vec![0]).unwrap())
    }

    #[test]
    fn and2_is_sat_at_one_one() {
        let (alg, p) = and2_z6mod2();
        assert_eq!(
            p.truth_table(&alg).unwrap(),
            vec![false, false, false, true]
        );
        let r = progcsat_exhaustive(&alg, &p).unwrap();
        assert_eq!(
            r.status,
            Status::Sat {
                witness: vec![1, 1]
            }
        );
        assert_eq!(r.stats.inputs_tried, 4);
        let none = progcsat_exhaustive(&alg, &p.with_accepting(vec![])).unwrap();
        assert_eq!(none.status, Status::Unsat { certain: true });
    }

    #[test]
    fn sampler_basics() {
        let (alg, p) = and2_z6mod2();
        let hits = (0..100)
            .filter(|&s| progcsat_sample(&alg, &p, 64, s).unwrap().is_positive())
            .count();
        assert!(hits >= 95);
        let all = p.with_accepting((0..6).collect());
        assert!(progcsat_sample(&alg, &all, 1, 7).unwrap().is_positive());
        let none = p.with_accepting(vec![]);
        for s in 0..20 {
            assert_eq!(
                progcsat_sample(&alg, &none, 50, s).unwrap().status,
                Status::Unsat { certain: false }
            );
        }
        assert!(progcsat_sample(&alg, &p, 0, 1).is_err());
    }

    #[test]
    fn normalized_equation_over_z6() {
        let z6 = fixtures::load("Z6").unwrap();
        let d = z6.malcev.unwrap();
        let t = normalize_equation(&d, &var(2, 0), &sum(2, &[1], Some(3)), 0).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                let v = t.eval(&z6.algebra, &[x, y]).unwrap();
                assert_eq!(v, (x + 12 - y - 3) % 6);
                assert_eq!(v == 0, x == (y + 3) % 6);
            }
        }
        let same = normalize_equation(&d, &var(1, 0), &var(1, 0), 0).unwrap();
        assert!((0..6).all(|x| same.eval(&z6.algebra, &[x]).unwrap() == 0));
        let z2 = fixtures::load("Z2").unwrap();
        let t =
            normalize_equation(&z2.malcev.unwrap(), &var(1, 0), &sum(1, &[0], Some(1)), 0).unwrap();
        assert!((0..2).all(|x| t.eval(&z2.algebra, &[x]).unwrap() != 0));
    }

    #[test]
    fn reductions_on_small_equations() {
        let z2 = fixtures::load("Z2").unwrap();
        let d = z2.malcev.clone().unwrap();
        let eq = Equation::against_constant(sum(2, &[0, 1], None), 1);
        let p = csat_to_progcsat(&z2.algebra, &d, &eq).unwrap();
        assert_eq!(p.n, 2);
        let r = progcsat_exhaustive(&z2.algebra, &p).unwrap();
        let Status::Sat { witness } = r.status else {
            panic!("sat expected")
        };
        assert!(eq.holds_at(
            &z2.algebra,
            &decode_assignment(&z2.algebra, &d, 2, &witness)
        ));

        let z6 = fixtures::load("Z6").unwrap();
        let d6 = z6.malcev.clone().unwrap();
        let eq = Equation::against_constant(var(1, 0), 3);
        let p = csat_to_progcsat(&z6.algebra, &d6, &eq).unwrap();
        assert_eq!(p.n, 5);
        assert!(progcsat_exhaustive(&z6.algebra, &p).unwrap().is_positive());

        let m = fixtures::load("Z6mod2").unwrap();
        let dm = m.malcev.clone().unwrap();
        let par = parity(1, &var(1, 0));
        let mut c = AlgCircuit::new(1);
        let x = c.var(0);
        let px = par.embed(&mut c, &[x]);
        let o = c.gate(0, vec![px, px]);
        let eq = Equation::against_constant(c.with_output(o), 1);
        assert_eq!(
            csat_exhaustive(&m.algebra, &eq, EQUATION_SCAN_LIMIT)
                .unwrap()
                .status,
            Status::Unsat { certain: true }
        );
        let p = csat_to_progcsat(&m.algebra, &dm, &eq).unwrap();
        assert!(!progcsat_exhaustive(&m.algebra, &p).unwrap().is_positive());
    }

    #[test]
    fn identity_reductions() {
        let z6 = fixtures::load("Z6").unwrap();
        let d = z6.malcev.clone().unwrap();
        // x − x as x + 5x
        let mut c = AlgCircuit::new(1);
        let x = c.var(0);
        let mut acc = x;
        for _ in 0..5 {
            acc = c.gate(0, vec![acc, x]);
        }
        let eq = Equation::against_constant(c.with_output(acc), 0);
        assert_eq!(
            ceqv_exhaustive(&z6.algebra, &eq, EQUATION_SCAN_LIMIT)
                .unwrap()
                .status,
            Status::Holds
        );
        let p = ceqv_to_progcsat(&z6.algebra, &d, &eq).unwrap();
        assert!(!progcsat_exhaustive(&z6.algebra, &p).unwrap().is_positive());
        let eq = Equation::against_constant(var(1, 0), 0);
        let p = ceqv_to_progcsat(&z6.algebra, &d, &eq).unwrap();
        assert!(progcsat_exhaustive(&z6.algebra, &p).unwrap().is_positive());
    }

    #[test]
    fn reductions_refuse_without_hypotheses() {
        let s3 = fixtures::load("S3").unwrap();
        let d = s3.malcev.clone().unwrap();
        let eq = Equation::against_constant(var(1, 0), 0);
        let err = csat_to_progcsat(&s3.algebra, &d, &eq).unwrap_err();
        assert!(err.to_string().contains("not nilpotent"), "{err}");
        let z6 = fixtures::z6();
        let err = csat_to_progcsat(&z6, &var(3, 0), &eq).unwrap_err();
        assert!(err.to_string().contains("not a Malcev"), "{err}");
    }

    #[test]
    fn exhaustive_examples() {
        let z6 = fixtures::z6();
        let eq = Equation::against_constant(sum(2, &[0, 1], None), 0);
        assert_eq!(
            csat_exhaustive(&z6, &eq, EQUATION_SCAN_LIMIT)
                .unwrap()
                .status,
            Status::Sat {
                witness: vec![0, 0]
            }
        );
        let z2 = fixtures::z2();
        let eq = Equation::against_constant(sum(1, &[0, 0], None), 0);
        assert_eq!(
            ceqv_exhaustive(&z2, &eq, EQUATION_SCAN_LIMIT)
                .unwrap()
                .status,
            Status::Holds
        );
        let m = fixtures::z6mod2();
        let eq = Equation::new(parity(1, &var(1, 0)), var(1, 0)).unwrap();
        assert_eq!(
            ceqv_exhaustive(&m, &eq, EQUATION_SCAN_LIMIT)
                .unwrap()
                .status,
            Status::Fails {
                counterexample: vec![2]
            }
        );
        let big = Equation::against_constant(sum(10, &(0..10).collect::<Vec<_>>(), None), 0);
        assert!(matches!(
            csat_exhaustive(&z6, &big, EQUATION_SCAN_LIMIT),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn meet_irreducible_strategy() {
        let z6 = fixtures::load("Z6").unwrap();
        assert_eq!(z6.lattice.meet_irreducibles.len(), 2);
        // 3x + 3x = 0
        let mut c = AlgCircuit::new(1);
        let x = c.var(0);
        let x2 = c.gate(0, vec![x, x]);
        let x3 = c.gate(0, vec![x2, x]);
        let o = c.gate(0, vec![x3, x3]);
        let eq = Equation::against_constant(c.with_output(o), 0);
        let r =
            ceqv_via_meet_irreducibles(&z6.algebra, &z6.lattice, &eq, EQUATION_SCAN_LIMIT).unwrap();
        assert_eq!(r.status, Status::Holds);
        let eq = Equation::against_constant(sum(1, &[0, 0], None), 0);
        let r =
            ceqv_via_meet_irreducibles(&z6.algebra, &z6.lattice, &eq, EQUATION_SCAN_LIMIT).unwrap();
        let Status::Fails { counterexample } = r.status else {
            panic!("x + x = 0 fails in Z6")
        };
        assert!(!eq.holds_at(&z6.algebra, &counterexample));
        let t = Equation::new(var(2, 1), var(2, 1)).unwrap();
        let r =
            ceqv_via_meet_irreducibles(&z6.algebra, &z6.lattice, &t, EQUATION_SCAN_LIMIT).unwrap();
        assert_eq!(r.status, Status::Holds);
    }

    #[test]
    fn quotient_lift_preserves_tables() {
        let m = fixtures::z6mod2();
        let lat = all_congruences(&m).unwrap();
        let eta3 = Congruence::from_blocks(6, &[vec![0, 2, 4], vec![1, 3, 5]]);
        assert!(lat.index_of(&eta3).is_some());
        let (q, _) = quotient_algebra(&m, &eta3).unwrap();
        let p = sum_program(&q, "+", 3, 0, 1, vec![1]).unwrap();
        let lifted = quotient_reduce_progcsat(&m, &eta3, &p).unwrap();
        assert_eq!(lifted.truth_table(&m).unwrap(), p.truth_table(&q).unwrap());
        assert_eq!(lifted.accepting, vec![1, 3, 5]);
        let all = quotient_reduce_progcsat(&m, &eta3, &p.with_accepting(vec![0, 1])).unwrap();
        assert_eq!(all.accepting, (0..6).collect::<Vec<_>>());
        let none = quotient_reduce_progcsat(&m, &eta3, &p.with_accepting(vec![])).unwrap();
        assert!(none.accepting.is_empty());
    }

    #[test]
    fn results_serialize_without_time() {
        let (alg, p) = and2_z6mod2();
        let r = progcsat_sample(&alg, &p, 10, 3).unwrap();
        let j = serde_json::to_value(&r).unwrap();
        assert!(j["stats"].get("elapsed").is_none());
        assert_eq!(j["stats"]["seed"], 3);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            serde_json::to_string(&progcsat_sample(&alg, &p, 10, 3).unwrap()).unwrap()
        );
    }
}
