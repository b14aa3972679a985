//! Reduction gadgets: CNF to lattice programs, β-interpolation of functions
//! `{c,d}^s -> {e,a}` by polynomials, and the two-prime program assembly.

use serde::Serialize;

use crate::algebra::{
    find_malcev_polynomial, is_malcev, unary_polynomial_clone, FiniteAlgebra, Operation, UnaryFn,
    DEFAULT_CLONE_BUDGET, DEFAULT_MALCEV_DEPTH,
};
use crate::circuit::AlgCircuit;
use crate::congruence::{
    all_congruences_bounded, charr_set, distinguished_congruences, solvability_class,
    supernilpotent_rank, Congruence, CongruenceLattice,
};
use crate::error::{refuse, Error, Result};
use crate::fieldpoly::{crt_exponent, pseudo_and, zpqe_normal_form, Cnf, MultilinearPoly};
use crate::localizer::{minimal_set_through_in, minimal_sets_in, MinimalSet};
use crate::program::{word, AlgProgram, Instruction};

/// Largest arity accepted by `beta_interpolate`.
pub const MAX_INTERPOLATION_ARITY: usize = 6;

/// Programs with at most this many input bits are verified exhaustively on construction.
pub const VERIFY_BITS: usize = 10;

/// Monotone lattice program over `({0,1}; and, or)`: `x_i` reads `b_i`
/// straight, `x'_i` (variable `n + i`) reads it negated; accepting `{1}`.
pub fn cnf_to_lattice_program(phi: &Cnf) -> Result<AlgProgram> {
    let n = phi.n;
    let mut c = AlgCircuit::new(2 * n);
    let (and, or) = (0, 1);
    let mut conj: Option<usize> = None;
    for clause in &phi.clauses {
        let mut disj: Option<usize> = None;
        for lit in clause {
            let v = c.var(if lit.neg { n + lit.var } else { lit.var });
            disj = Some(match disj {
                None => v,
                Some(d) => c.gate(or, vec![d, v]),
            });
        }
        let cl = disj.unwrap_or_else(|| c.constant(0));
        conj = Some(match conj {
            None => cl,
            Some(k) => c.gate(and, vec![k, cl]),
        });
    }
    let out = conj.unwrap_or_else(|| c.constant(1));
    let c = c.with_output(out);
    let mut ins: Vec<Instruction> = (0..n)
        .map(|i| Instruction {
            var: i,
            bit: i,
            a0: 0,
            a1: 1,
        })
        .collect();
    ins.extend((0..n).map(|i| Instruction {
        var: n + i,
        bit: i,
        a0: 1,
        a1: 0,
    }));
    AlgProgram::new(c, n, ins, vec![1])
}

fn embed1(c: &mut AlgCircuit, f: &UnaryFn, x: usize) -> usize {
    f.witness
        .as_ref()
        .expect("clone functions carry witnesses")
        .embed(c, &[x])
}

fn unary_from_circuit(alg: &FiniteAlgebra, w: AlgCircuit) -> UnaryFn {
    let values = (0..alg.size)
        .map(|x| w.eval_all(alg, &[x])[w.output])
        .collect();
    UnaryFn {
        values,
        witness: Some(w),
    }
}

/// Data for β-interpolation: β ≺ α⁻ ≺ α with α join-irreducible and
/// `p = char(β,α⁻) != q = char(α⁻,α)`, plus the polynomials found by the
/// construction.
#[derive(Clone, Debug)]
pub struct BetaIntConfig {
    pub alpha: Congruence,
    pub alpha_minus: Congruence,
    pub beta: Congruence,
    pub c: usize,
    pub d: usize,
    pub e: usize,
    pub a: usize,
    /// Characteristic of (β, α⁻); the field of the interpolated functions.
    pub p: u64,
    /// Characteristic of (α⁻, α); the order of the trace group on `U`.
    pub q: u64,
    pub malcev: AlgCircuit,
    pub u: MinimalSet,
    pub v: MinimalSet,
    pub e_u: UnaryFn,
    pub e_v: UnaryFn,
    pub g: UnaryFn,
    /// c_0 = g(c), c_1 = g(d), c_{j+1} = c_j ⊕ c_1.
    pub cs: Vec<usize>,
    pub h: UnaryFn,
    /// Whether `h` had to be shifted to make its trace sum nonzero.
    pub adjusted: bool,
    pub a_prime: usize,
    pub b: UnaryFn,
    pub g_prime: UnaryFn,
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaIntSummary {
    pub alpha: String,
    pub alpha_minus: String,
    pub beta: String,
    pub c: usize,
    pub d: usize,
    pub e: usize,
    pub a: usize,
    pub p: u64,
    pub q: u64,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub cs: Vec<usize>,
    pub h: Vec<usize>,
    pub adjusted: bool,
    pub a_prime: usize,
}

struct Ops<'a> {
    alg: &'a FiniteAlgebra,
    d: &'a AlgCircuit,
    e_u: &'a UnaryFn,
    e_v: &'a UnaryFn,
    zero_n: usize,
    zero_m: usize,
}

impl Ops<'_> {
    fn dv(&self, x: usize, y: usize, z: usize) -> usize {
        self.d.eval_all(self.alg, &[x, y, z])[self.d.output]
    }

    /// Trace-group sum on U with zero `c_0`.
    fn oplus(&self, x: usize, y: usize) -> usize {
        self.e_u.apply(self.dv(x, self.zero_n, y))
    }

    /// Trace-group sum on V with zero `e`.
    fn plus(&self, x: usize, y: usize) -> usize {
        self.e_v.apply(self.dv(x, self.zero_m, y))
    }

    fn minus(&self, x: usize, y: usize) -> usize {
        self.e_v.apply(self.dv(x, y, self.zero_m))
    }

    fn times(&self, k: u64, x: usize) -> usize {
        (0..k).fold(self.zero_m, |acc, _| self.plus(acc, x))
    }

    fn c_oplus(&self, c: &mut AlgCircuit, x: usize, y: usize) -> usize {
        let z = c.constant(self.zero_n);
        let t = self.d.embed(c, &[x, z, y]);
        embed1(c, self.e_u, t)
    }

    fn c_plus(&self, c: &mut AlgCircuit, x: usize, y: usize) -> usize {
        let z = c.constant(self.zero_m);
        let t = self.d.embed(c, &[x, z, y]);
        embed1(c, self.e_v, t)
    }

    fn c_minus(&self, c: &mut AlgCircuit, x: usize, y: usize) -> usize {
        let z = c.constant(self.zero_m);
        let t = self.d.embed(c, &[x, y, z]);
        embed1(c, self.e_v, t)
    }

    fn c_times_n(&self, c: &mut AlgCircuit, k: u64, x: usize) -> usize {
        let mut acc = c.constant(self.zero_n);
        for _ in 0..k {
            acc = self.c_oplus(c, acc, x);
        }
        acc
    }
}

impl BetaIntConfig {
    /// Validate the hypotheses and run the searches of the construction.
    /// `alpha` and `beta` are lattice indices.
    pub fn new(
        alg: &FiniteAlgebra,
        lat: &CongruenceLattice,
        alpha: usize,
        beta: usize,
        (c, d): (usize, usize),
        (e, a): (usize, usize),
    ) -> Result<Self> {
        let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET)?;
        let malcev = find_malcev_polynomial(alg, DEFAULT_MALCEV_DEPTH)
            .ok_or_else(|| Error::Refused("no Malcev polynomial found".into()))?;
        Self::with_clone(alg, lat, &clone, &malcev, alpha, beta, (c, d), (e, a))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_clone(
        alg: &FiniteAlgebra,
        lat: &CongruenceLattice,
        clone: &[UnaryFn],
        malcev: &AlgCircuit,
        alpha: usize,
        beta: usize,
        (c, d): (usize, usize),
        (e, a): (usize, usize),
    ) -> Result<Self> {
        if !solvability_class(alg, &Congruence::total(alg.size))?.is_nilpotent() {
            return refuse(format!("{} is not nilpotent", alg.name));
        }
        if !is_malcev(alg, malcev) {
            return refuse("the supplied circuit is not a Malcev polynomial");
        }
        let Some(&am) = lat.unique_subcover.get(&alpha) else {
            return refuse(format!(
                "{} is not join-irreducible",
                lat.elements[alpha].label()
            ));
        };
        if !lat.is_cover(beta, am) {
            return refuse("β is not a subcover of α⁻");
        }
        let ch = |lo, hi| {
            lat.cover_char(lo, hi)
                .map(|ci| ci.characteristic)
                .ok_or_else(|| Error::Refused("cover without a characteristic".into()))
        };
        let (p, q) = (ch(beta, am)?, ch(am, alpha)?);
        if p == q {
            return refuse(format!("char(β,α⁻) = char(α⁻,α) = {p}"));
        }
        let (al, alm, be) = (
            lat.elements[alpha].clone(),
            lat.elements[am].clone(),
            lat.elements[beta].clone(),
        );
        if !al.related(c, d) || alm.related(c, d) {
            return refuse(format!("({c}, {d}) is not in α − α⁻"));
        }
        if !alm.related(e, a) || be.related(e, a) {
            return refuse(format!("({e}, {a}) is not in α⁻ − β"));
        }

        // g projects (c,d) into an (α⁻,α)-minimal set U
        let mins_u = minimal_sets_in(clone, &alm, &al)?;
        let (g, u) = clone
            .iter()
            .filter(|f| !alm.related(f.apply(c), f.apply(d)))
            .find_map(|f| {
                let r = f.range();
                mins_u
                    .iter()
                    .find(|m| m.universe_subset == r)
                    .map(|m| (f.clone(), m.clone()))
            })
            .ok_or_else(|| {
                Error::Verification("no unary polynomial projects (c,d) into a minimal set".into())
            })?;
        let e_u = u
            .idempotent
            .clone()
            .ok_or_else(|| Error::Verification("minimal set U has no idempotent".into()))?;
        let v = minimal_set_through_in(alg, clone, &be, &alm, e)?;
        let e_v = v
            .idempotent
            .clone()
            .ok_or_else(|| Error::Verification("minimal set V has no idempotent".into()))?;
        let (c0, c1) = (g.apply(c), g.apply(d));
        let ops = Ops {
            alg,
            d: malcev,
            e_u: &e_u,
            e_v: &e_v,
            zero_n: c0,
            zero_m: e,
        };

        let mut cs = vec![c0, c1];
        for _ in 2..q {
            let last = *cs.last().unwrap();
            cs.push(ops.oplus(last, c1));
        }
        for j in 1..q as usize {
            if alm.related(cs[j], c0) {
                return Err(Error::Verification(format!(
                    "c_{j} collapses onto c_0 modulo α⁻"
                )));
            }
        }
        if !alm.related(ops.oplus(cs[q as usize - 1], c1), c0) {
            return Err(Error::Verification(
                "c_1 does not generate a cyclic group of order q".into(),
            ));
        }
        let u_set = u.universe_subset.clone();
        // the separation bullet is dropped after the shift: it only serves
        // to make the shifted trace sum nontrivial, and fails for q > 2
        let h_ok = |h: &UnaryFn, separating: bool| -> bool {
            be.related(h.apply(c0), e)
                && (!separating
                    || (alm.related(h.apply(c0), h.apply(c1))
                        && !be.related(h.apply(c0), h.apply(c1))))
                && al
                    .pairs()
                    .iter()
                    .all(|&(x, y)| alm.related(h.apply(x), h.apply(y)))
                && u_set.iter().all(|&x| {
                    u_set
                        .iter()
                        .all(|&y| !alm.related(x, y) || be.related(h.apply(x), h.apply(y)))
                })
        };
        let trace_sum = |h: &UnaryFn| cs.iter().fold(e, |acc, &cj| ops.plus(acc, h.apply(cj)));
        let mut h = clone
            .iter()
            .map(|f| e_v.compose(f))
            .find(|h| h_ok(h, true))
            .ok_or_else(|| {
                Error::Verification("no unary polynomial h with the required properties".into())
            })?;
        let mut adjusted = false;
        if be.related(trace_sum(&h), e) {
            // h'(x) = h(x ⊕ c_1) − h(c_1)
            let mut w = AlgCircuit::new(1);
            let x = w.var(0);
            let k1 = w.constant(c1);
            let t = ops.c_oplus(&mut w, x, k1);
            let ht = embed1(&mut w, &h, t);
            let hc1 = w.constant(h.apply(c1));
            let out = ops.c_minus(&mut w, ht, hc1);
            let h2 = unary_from_circuit(alg, w.with_output(out));
            let lhs = trace_sum(&h2);
            let rhs = ops.minus(trace_sum(&h), ops.times(q, h.apply(c1)));
            if !be.related(lhs, rhs) {
                return Err(Error::Verification(format!(
                    "shift identity fails: {lhs} vs {rhs} modulo β"
                )));
            }
            if !h_ok(&h2, false) {
                return Err(Error::Verification(
                    "shifted h loses the required properties".into(),
                ));
            }
            if be.related(lhs, e) {
                return Err(Error::Verification(
                    "shifted h still has a trivial trace sum".into(),
                ));
            }
            h = h2;
            adjusted = true;
        }
        let a_prime = trace_sum(&h);

        // b(x) = a' − Σ_j h(j·x)
        let mut w = AlgCircuit::new(1);
        let x = w.var(0);
        let mut sum = w.constant(e);
        for j in 0..q {
            let jx = ops.c_times_n(&mut w, j, x);
            let hj = embed1(&mut w, &h, jx);
            sum = ops.c_plus(&mut w, sum, hj);
        }
        let ap = w.constant(a_prime);
        let out = ops.c_minus(&mut w, ap, sum);
        let b = unary_from_circuit(alg, w.with_output(out));
        for &x in &u_set {
            let Some(j) = cs.iter().position(|&cj| alm.related(cj, x)) else {
                continue;
            };
            let want = if j == 0 { a_prime } else { e };
            if !be.related(b.apply(x), want) {
                return Err(Error::Verification(format!("b({x}) is not in {want}/β")));
            }
        }
        let g_prime = clone
            .iter()
            .find(|f| f.apply(e) == e && be.related(f.apply(a_prime), a))
            .or_else(|| {
                clone
                    .iter()
                    .find(|f| be.related(f.apply(e), e) && be.related(f.apply(a_prime), a))
            })
            .cloned()
            .ok_or_else(|| {
                Error::Verification("no unary polynomial sends (a', e) into (a/β, e/β)".into())
            })?;
        Ok(BetaIntConfig {
            alpha: al,
            alpha_minus: alm,
            beta: be,
            c,
            d,
            e,
            a,
            p,
            q,
            malcev: malcev.clone(),
            u,
            v,
            e_u,
            e_v,
            g,
            cs,
            h,
            adjusted,
            a_prime,
            b,
            g_prime,
        })
    }

    fn ops<'a>(&'a self, alg: &'a FiniteAlgebra) -> Ops<'a> {
        Ops {
            alg,
            d: &self.malcev,
            e_u: &self.e_u,
            e_v: &self.e_v,
            zero_n: self.cs[0],
            zero_m: self.e,
        }
    }

    /// Is `x` congruent to `y` modulo β?
    pub fn beta_eq(&self, x: usize, y: usize) -> bool {
        self.beta.related(x, y)
    }

    pub fn summary(&self) -> BetaIntSummary {
        BetaIntSummary {
            alpha: self.alpha.label(),
            alpha_minus: self.alpha_minus.label(),
            beta: self.beta.label(),
            c: self.c,
            d: self.d,
            e: self.e,
            a: self.a,
            p: self.p,
            q: self.q,
            u: self.u.universe_subset.clone(),
            v: self.v.universe_subset.clone(),
            cs: self.cs.clone(),
            h: self.h.values.clone(),
            adjusted: self.adjusted,
            a_prime: self.a_prime,
        }
    }
}

/// An s-ary polynomial `p` with `p(x) ≡_β f(x)` on `{c,d}^s`. `f` is indexed
/// by bit masks (bit i set means `x_i = d`); `true` stands for `a`.
pub fn beta_interpolate(
    alg: &FiniteAlgebra,
    cfg: &BetaIntConfig,
    f: &[bool],
) -> Result<AlgCircuit> {
    let s = f.len().trailing_zeros() as usize;
    if f.len() != 1 << s {
        return Err(Error::Malformed(format!(
            "table length {} is not a power of two",
            f.len()
        )));
    }
    if s > MAX_INTERPOLATION_ARITY {
        return Err(Error::Budget(format!(
            "arity {s} exceeds {MAX_INTERPOLATION_ARITY}"
        )));
    }
    let ops = cfg.ops(alg);
    let (q, p) = (cfg.q, cfg.p);
    let mut w = AlgCircuit::new(s);
    let total = if s == 0 {
        w.constant(if f[0] { cfg.a_prime } else { cfg.e })
    } else {
        let pts = (q as usize).pow(s as u32);
        let mut table = vec![0u64; pts];
        for (idx, slot) in table.iter_mut().enumerate() {
            let mut rest = idx;
            let mut mask = 0usize;
            let mut binary = true;
            for i in (0..s).rev() {
                let xi = rest % q as usize;
                rest /= q as usize;
                binary &= xi <= 1;
                mask |= (xi & 1) << i;
            }
            *slot = u64::from(binary && f[mask]);
        }
        let form = zpqe_normal_form(&table, q, p, s)?;
        let gx: Vec<usize> = (0..s)
            .map(|i| {
                let v = w.var(i);
                embed1(&mut w, &cfg.g, v)
            })
            .collect();
        let mut total = w.constant(cfg.e);
        for t in &form.terms {
            let mut z = w.constant(cfg.cs[t.u as usize]);
            for (i, &bi) in t.beta.iter().enumerate() {
                if bi != 0 {
                    let y = ops.c_times_n(&mut w, bi, gx[i]);
                    z = ops.c_oplus(&mut w, z, y);
                }
            }
            let bz = embed1(&mut w, &cfg.b, z);
            for _ in 0..t.mu {
                total = ops.c_plus(&mut w, total, bz);
            }
        }
        total
    };
    let out = embed1(&mut w, &cfg.g_prime, total);
    let w = w.with_output(out);
    for (mask, &fv) in f.iter().enumerate() {
        let x: Vec<usize> = (0..s)
            .map(|i| if mask >> i & 1 == 1 { cfg.d } else { cfg.c })
            .collect();
        let got = w.eval(alg, &x)?;
        let want = if fv { cfg.a } else { cfg.e };
        if !cfg.beta_eq(got, want) {
            return Err(Error::Verification(format!(
                "interpolant gives {got} at {x:?}, expected {want} modulo β"
            )));
        }
    }
    Ok(w)
}

/// A polynomial sending `x ∈ {c,d}^n` to `w(π(x))·a` (modulo β, inside the
/// cyclic group generated by `a` on V), where π(c) = 0, π(d) = 1 and `w` is
/// over GF(p). The result is composed with the idempotent onto V.
pub fn interpolate_gf_poly(
    alg: &FiniteAlgebra,
    cfg: &BetaIntConfig,
    w: &MultilinearPoly,
) -> Result<AlgCircuit> {
    if w.p != cfg.p {
        return refuse(format!(
            "polynomial over GF({}) but char(β,α⁻) = {}",
            w.p, cfg.p
        ));
    }
    let ops = cfg.ops(alg);
    let n = w.n;
    let mut out = AlgCircuit::new(n);
    let vars: Vec<usize> = (0..n).map(|i| out.var(i)).collect();
    let mut by_degree: Vec<Option<AlgCircuit>> = vec![None; n + 1];
    let mut acc = out.constant(cfg.e);
    for (mono, coef) in w.monomials() {
        let k = mono.len();
        let node = if k == 0 {
            out.constant(cfg.a)
        } else {
            if by_degree[k].is_none() {
                let mut and = vec![false; 1 << k];
                and[(1 << k) - 1] = true;
                by_degree[k] = Some(beta_interpolate(alg, cfg, &and)?);
            }
            let map: Vec<usize> = mono.iter().map(|&v| vars[v]).collect();
            by_degree[k].as_ref().unwrap().embed(&mut out, &map)
        };
        for _ in 0..coef {
            acc = ops.c_plus(&mut out, acc, node);
        }
    }
    let fin = embed1(&mut out, &cfg.e_v, acc);
    let out = out.with_output(fin);
    if n <= VERIFY_BITS {
        for mask in 0..1usize << n {
            let x: Vec<usize> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { cfg.d } else { cfg.c })
                .collect();
            let want = ops.times(w.eval_mask(mask as u64), cfg.a);
            let got = out.eval(alg, &x)?;
            if !cfg.beta_eq(got, want) {
                return Err(Error::Verification(format!(
                    "polynomial translation differs at mask {mask:b}"
                )));
            }
        }
    }
    Ok(out)
}

/// Every β-interpolation configuration of `alg` in canonical order
/// (α, then β by lattice index; least pairs (c,d) and (e,a)).
pub fn find_beta_configs(
    alg: &FiniteAlgebra,
    lat: &CongruenceLattice,
    malcev: Option<&AlgCircuit>,
) -> Result<Vec<BetaIntConfig>> {
    let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET)?;
    let found;
    let malcev = match malcev {
        Some(m) => m,
        None => {
            found = find_malcev_polynomial(alg, DEFAULT_MALCEV_DEPTH)
                .ok_or_else(|| Error::Refused("no Malcev polynomial found".into()))?;
            &found
        }
    };
    let mut out = Vec::new();
    for &alpha in &lat.join_irreducibles {
        let Some(&am) = lat.unique_subcover.get(&alpha) else {
            continue;
        };
        for &(beta, hi) in &lat.covers {
            if hi != am {
                continue;
            }
            let (Some(c1), Some(c2)) = (lat.cover_char(beta, am), lat.cover_char(am, alpha)) else {
                continue;
            };
            if c1.characteristic == c2.characteristic {
                continue;
            }
            let (al, alm, be) = (&lat.elements[alpha], &lat.elements[am], &lat.elements[beta]);
            let Some(cd) = al
                .pairs()
                .into_iter()
                .find(|&(x, y)| x < y && !alm.related(x, y))
            else {
                continue;
            };
            let Some(ea) = alm
                .pairs()
                .into_iter()
                .find(|&(x, y)| x < y && !be.related(x, y))
            else {
                continue;
            };
            out.push(BetaIntConfig::with_clone(
                alg, lat, &clone, malcev, alpha, beta, cd, ea,
            )?);
        }
    }
    Ok(out)
}

/// The configuration of congruences, elements and minimal sets used to
/// assemble programs that test satisfiability through two primes.
#[derive(Clone, Debug, Serialize)]
pub struct TwoPrimeWitness {
    pub kappa: usize,
    pub gamma: [usize; 2],
    pub phi: [usize; 2],
    pub phi_plus: [usize; 2],
    pub psi: [usize; 2],
    pub alpha: [usize; 2],
    pub alpha_minus: [usize; 2],
    /// char(φ_i, φ_i⁺), equal to char(γ_i, κ).
    pub q: [u64; 2],
    /// char(φ_i⁺, ψ_i).
    pub p: [u64; 2],
    pub c: [usize; 2],
    pub d: [usize; 2],
    pub e: usize,
    pub a: [usize; 2],
    pub v: [Vec<usize>; 2],
    pub validated: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum WitnessSearch {
    Found(TwoPrimeWitness),
    Failed { fact: String, detail: String },
}

impl WitnessSearch {
    pub fn witness(&self) -> Option<&TwoPrimeWitness> {
        match self {
            WitnessSearch::Found(w) => Some(w),
            WitnessSearch::Failed { .. } => None,
        }
    }
}

fn failed(fact: &str, detail: impl Into<String>) -> WitnessSearch {
    WitnessSearch::Failed {
        fact: fact.into(),
        detail: detail.into(),
    }
}

/// Extremal element of `cands` in index order (maximal if `max`).
fn first_extremal(lat: &CongruenceLattice, cands: &[usize], max: bool) -> Option<usize> {
    cands.iter().copied().find(|&x| {
        cands
            .iter()
            .all(|&y| y == x || if max { !lat.leq[x][y] } else { !lat.leq[y][x] })
    })
}

/// Search `Con(alg)` for the two-prime configuration below and above κ.
pub fn find_two_prime_witness(
    alg: &FiniteAlgebra,
    lat: &CongruenceLattice,
) -> Result<WitnessSearch> {
    if !solvability_class(alg, &Congruence::total(alg.size))?.is_nilpotent() {
        return Ok(failed(
            "precondition: nilpotent",
            format!("{} is not nilpotent", alg.name),
        ));
    }
    let sr = supernilpotent_rank(alg, lat)?;
    if sr != 2 {
        return Ok(failed("precondition: sr = 2", format!("sr = {sr}")));
    }
    let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET)?;
    let kappa = lat.idx(&distinguished_congruences(alg, lat)?.kappa)?;
    let bottom = lat.bottom();
    let mut validated = Vec::new();
    let subcovers: Vec<(usize, u64)> = lat
        .covers
        .iter()
        .filter(|&&(_, hi)| hi == kappa)
        .filter_map(|&(lo, hi)| lat.cover_char(lo, hi).map(|c| (lo, c.characteristic)))
        .collect();
    let pair = subcovers.iter().enumerate().find_map(|(i, &(g0, q0))| {
        subcovers[i + 1..]
            .iter()
            .find(|&&(_, q1)| q1 != q0)
            .map(|&(g1, q1)| ([g0, g1], [q0, q1]))
    });
    let Some((gamma, qs)) = pair else {
        return Ok(failed(
            "two subcovers of κ with distinct characteristics",
            format!(
                "κ = {} has subcovers {:?}",
                lat.elements[kappa].label(),
                subcovers
            ),
        ));
    };
    validated.push("two subcovers of κ with distinct characteristics".to_string());
    if lat.meet_idx(gamma[0], gamma[1]) != bottom {
        return Ok(failed(
            "γ₀ ∧ γ₁ = 0",
            "the subcovers of κ do not meet in 0; pass to the quotient first",
        ));
    }
    validated.push("γ₀ ∧ γ₁ = 0".into());
    let k = lat.elements.len();
    let mut phi = [0; 2];
    let mut phi_plus = [0; 2];
    let mut psi = [0; 2];
    let mut alpha = [0; 2];
    let mut alpha_minus = [0; 2];
    let mut q = [0; 2];
    let mut p = [0; 2];
    for i in 0..2 {
        let cands: Vec<usize> = (0..k)
            .filter(|&t| lat.leq[gamma[i]][t] && !lat.leq[kappa][t])
            .collect();
        let Some(f) = first_extremal(lat, &cands, true) else {
            return Ok(failed(
                "φ_i maximal above γ_i but not above κ",
                format!("i = {i}"),
            ));
        };
        let Some(&fp) = lat.unique_cover.get(&f) else {
            return Ok(failed("φ_i meet-irreducible", lat.elements[f].label()));
        };
        let qi = lat.cover_char(f, fp).map(|c| c.characteristic).unwrap_or(0);
        if qi != qs[i] {
            return Ok(failed(
                "char(φ_i, φ_i⁺) = char(γ_i, κ)",
                format!("{qi} vs {}", qs[i]),
            ));
        }
        let ps = lat
            .covers
            .iter()
            .filter(|&&(lo, _)| lo == fp)
            .find_map(|&(lo, hi)| {
                lat.cover_char(lo, hi)
                    .filter(|c| c.characteristic != qi)
                    .map(|c| (hi, c.characteristic))
            });
        let Some((ps_i, pi)) = ps else {
            return Ok(failed(
                "ψ_i ≻ φ_i⁺ with a second characteristic",
                format!("i = {i}"),
            ));
        };
        let cands: Vec<usize> = (0..k)
            .filter(|&t| lat.leq[t][ps_i] && !lat.leq[t][fp])
            .collect();
        let Some(al) = first_extremal(lat, &cands, false) else {
            return Ok(failed(
                "α_i minimal below ψ_i but not below φ_i⁺",
                format!("i = {i}"),
            ));
        };
        let Some(&am) = lat.unique_subcover.get(&al) else {
            return Ok(failed("α_i join-irreducible", lat.elements[al].label()));
        };
        let fa = lat.meet_idx(f, al);
        if !(lat.is_cover(fa, am) && lat.is_cover(am, al)) {
            return Ok(failed("φ_i ∧ α_i ≺ α_i⁻ ≺ α_i", format!("i = {i}")));
        }
        let c_low = lat.cover_char(fa, am).map(|c| c.characteristic);
        let c_high = lat.cover_char(am, al).map(|c| c.characteristic);
        if c_low != Some(qi) || c_high != Some(pi) {
            return Ok(failed(
                "char(φ_i ∧ α_i, α_i⁻) = q_i ≠ p_i = char(α_i⁻, α_i)",
                format!("{c_low:?}, {c_high:?}"),
            ));
        }
        let case0 = fa == bottom && am == gamma[1 - i];
        let case1 = lat.leq[gamma[i]][fa] && lat.leq[kappa][am];
        if !(case0 || case1) {
            return Ok(failed(
                "(φ_i ∧ α_i = 0 and α_i⁻ = γ_{1-i}) or (φ_i ∧ α_i ≥ γ_i and α_i⁻ ≥ κ)",
                format!("i = {i}"),
            ));
        }
        if lat.leq[gamma[i]][fa] && charr_set(lat, gamma[i], fa)?.contains(&qi) {
            return Ok(failed("q_i ∉ charr(γ_i, φ_i ∧ α_i)", format!("i = {i}")));
        }
        phi[i] = f;
        phi_plus[i] = fp;
        psi[i] = ps_i;
        alpha[i] = al;
        alpha_minus[i] = am;
        q[i] = qi;
        p[i] = pi;
    }
    for fact in [
        "φ_i maximal above γ_i but not above κ",
        "φ_i meet-irreducible",
        "ψ_i ≻ φ_i⁺ with a second characteristic",
        "α_i join-irreducible",
        "φ_i ∧ α_i ≺ α_i⁻ ≺ α_i",
        "char(φ_i ∧ α_i, α_i⁻) = q_i ≠ p_i = char(α_i⁻, α_i)",
        "(φ_i ∧ α_i = 0 and α_i⁻ = γ_{1-i}) or (φ_i ∧ α_i ≥ γ_i and α_i⁻ ≥ κ)",
        "q_i ∉ charr(γ_i, φ_i ∧ α_i)",
    ] {
        validated.push(fact.into());
    }
    let beta: Vec<Congruence> = (0..2)
        .map(|i| lat.elements[phi[i]].meet(&lat.elements[alpha_minus[i]]))
        .collect();
    let mut first_failure: Option<WitnessSearch> = None;
    'elements: for e in 0..alg.size {
        let mut v: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let m =
                minimal_set_through_in(alg, &clone, &beta[i], &lat.elements[alpha_minus[i]], e)?;
            v[i] = m.universe_subset;
        }
        let inter: Vec<usize> = v[0].iter().copied().filter(|x| v[1].contains(x)).collect();
        let mut fail = None;
        if inter != vec![e] {
            fail = Some(failed("V₀ ∩ V₁ = {e}", format!("e = {e}: {inter:?}")));
        }
        for i in 0..2 {
            if fail.is_some() {
                break;
            }
            let am = &lat.elements[alpha_minus[i]];
            let g = &lat.elements[gamma[1 - i]];
            let vi = &v[i];
            let ok = vi
                .iter()
                .all(|&x| vi.iter().all(|&y| !am.related(x, y) || g.related(x, y)))
                && vi
                    .iter()
                    .all(|&x| vi.iter().all(|&y| x == y || !beta[i].related(x, y)));
            if !ok {
                fail = Some(failed(
                    "α_i⁻|V_i ⊆ γ_{1-i} and (φ_i ∧ α_i⁻)|V_i = 0",
                    format!("e = {e}, i = {i}"),
                ));
            }
        }
        if let Some(f) = fail {
            first_failure.get_or_insert(f);
            continue;
        }
        let mut c = [0; 2];
        let mut d = [0; 2];
        let mut a = [0; 2];
        for i in 0..2 {
            let (al, am) = (&lat.elements[alpha[i]], &lat.elements[alpha_minus[i]]);
            let Some((ci, di)) = al
                .pairs()
                .into_iter()
                .find(|&(x, y)| x != y && !am.related(x, y))
            else {
                first_failure.get_or_insert(failed("(c_i, d_i) ∈ α_i − α_i⁻", format!("i = {i}")));
                continue 'elements;
            };
            let Some(&ai) = v[i].iter().find(|&&x| x != e && am.related(x, e)) else {
                first_failure.get_or_insert(failed(
                    "a_i ∈ V_i ∩ e/α_i⁻ − {e}",
                    format!("e = {e}, i = {i}"),
                ));
                continue 'elements;
            };
            c[i] = ci;
            d[i] = di;
            a[i] = ai;
        }
        validated.push("V₀ ∩ V₁ = {e}".into());
        validated.push("α_i⁻|V_i ⊆ γ_{1-i} and (φ_i ∧ α_i⁻)|V_i = 0".into());
        return Ok(WitnessSearch::Found(TwoPrimeWitness {
            kappa,
            gamma,
            phi,
            phi_plus,
            psi,
            alpha,
            alpha_minus,
            q,
            p,
            c,
            d,
            e,
            a,
            v,
            validated,
        }));
    }
    Ok(first_failure.unwrap_or_else(|| failed("V₀ ∩ V₁ = {e}", "no element admits minimal sets")))
}

/// Program over `alg` accepting exactly the assignments satisfying `phi`:
/// `d(p_0(x⁰), p_1(x¹), e)` with accepting set `{e}`.
pub fn build_two_prime_program(
    alg: &FiniteAlgebra,
    lat: &CongruenceLattice,
    w: &TwoPrimeWitness,
    phi: &Cnf,
) -> Result<AlgProgram> {
    let n = phi.n;
    let l = phi.clauses.len();
    let clone = unary_polynomial_clone(alg, DEFAULT_CLONE_BUDGET)?;
    let malcev = find_malcev_polynomial(alg, DEFAULT_MALCEV_DEPTH)
        .ok_or_else(|| Error::Refused("no Malcev polynomial found".into()))?;
    let mut sides = Vec::with_capacity(2);
    for i in 0..2 {
        let beta = lat.idx(&lat.elements[w.phi[i]].meet(&lat.elements[w.alpha_minus[i]]))?;
        let cfg = BetaIntConfig::with_clone(
            alg,
            lat,
            &clone,
            &malcev,
            w.alpha[i],
            beta,
            (w.c[i], w.d[i]),
            (w.e, w.a[i]),
        )?;
        let nu = crt_exponent(cfg.p, l);
        let poly = pseudo_and(phi, cfg.p, nu)?;
        sides.push(interpolate_gf_poly(alg, &cfg, &poly)?);
    }
    let mut c = AlgCircuit::new(2 * n);
    let x0: Vec<usize> = (0..n).map(|j| c.var(j)).collect();
    let x1: Vec<usize> = (0..n).map(|j| c.var(n + j)).collect();
    let r0 = sides[0].embed(&mut c, &x0);
    let r1 = sides[1].embed(&mut c, &x1);
    let e = c.constant(w.e);
    let out = malcev.embed(&mut c, &[r0, r1, e]);
    let c = c.with_output(out);
    let mut ins: Vec<Instruction> = (0..n)
        .map(|j| Instruction {
            var: j,
            bit: j,
            a0: w.c[0],
            a1: w.d[0],
        })
        .collect();
    ins.extend((0..n).map(|j| Instruction {
        var: n + j,
        bit: j,
        a0: w.c[1],
        a1: w.d[1],
    }));
    let prog = AlgProgram::new(c, n, ins, vec![w.e])?;
    if n <= VERIFY_BITS {
        for idx in 0..1usize << n {
            let b = word(idx, n);
            if prog.eval(alg, &b)?.1 != phi.eval(&b) {
                return Err(Error::Verification(format!(
                    "two-prime program disagrees with the formula at {b:?}"
                )));
            }
        }
    }
    Ok(prog)
}

/// The unary-extended cyclic group `(Z_n; +, f)` with `f(x) = t·(x mod r)`.
pub fn unary_extension(n: usize, r: usize, t: usize) -> FiniteAlgebra {
    FiniteAlgebra::new(
        &format!("Z{n}[{t}*(x%{r})]"),
        n,
        vec![
            Operation::from_fn("+", 2, n, |a| (a[0] + a[1]) % n),
            Operation::from_fn(&format!("%{r}"), 1, n, |a| t * (a[0] % r) % n),
        ],
    )
    .expect("valid table")
}

/// `x - y + z` in an algebra whose operation 0 is addition in Z_n.
pub fn cyclic_malcev(n: usize) -> AlgCircuit {
    let mut c = AlgCircuit::new(3);
    let (x, y, z) = (c.var(0), c.var(1), c.var(2));
    let mut acc = x;
    for _ in 1..n {
        acc = c.gate(0, vec![acc, y]);
    }
    let out = c.gate(0, vec![acc, z]);
    c.with_output(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateReport {
    pub name: String,
    pub size: usize,
    pub congruences: usize,
    pub nilpotent: bool,
    pub rank: Option<usize>,
    pub beta_configs: usize,
    /// First unmatched fact of the two-prime configuration, `None` when a witness was found.
    pub two_prime_failure: Option<String>,
    #[serde(skip)]
    pub algebra: FiniteAlgebra,
    #[serde(skip)]
    pub configs: Vec<BetaIntConfig>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixtureSearch {
    pub max_size: usize,
    pub candidates: Vec<CandidateReport>,
}

impl FixtureSearch {
    pub fn with_beta_configs(&self) -> Vec<&str> {
        self.candidates
            .iter()
            .filter(|c| c.beta_configs > 0)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn with_two_prime_witness(&self) -> Vec<&str> {
        self.candidates
            .iter()
            .filter(|c| c.rank == Some(2) && c.two_prime_failure.is_none())
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Least table of `f` under conjugation by the automorphisms `x -> u x` of Z_n.
fn canonical_unary(n: usize, f: &[usize]) -> Vec<usize> {
    (1..n)
        .filter(|&u| crate::arith::gcd(u as u64, n as u64) == 1)
        .map(|u| {
            let ui = crate::arith::inv_mod(u as u64, n as u64).expect("unit") as usize;
            (0..n)
                .map(|x| u * f[ui * x % n] % n)
                .collect::<Vec<usize>>()
        })
        .min()
        .expect("1 is a unit")
}

pub fn examine(alg: &FiniteAlgebra, bound: usize) -> Result<CandidateReport> {
    let lat = all_congruences_bounded(alg, bound)?;
    let mut rep = CandidateReport {
        name: alg.name.clone(),
        size: alg.size,
        congruences: lat.elements.len(),
        nilpotent: false,
        rank: None,
        beta_configs: 0,
        two_prime_failure: None,
        algebra: alg.clone(),
        configs: Vec::new(),
    };
    if !solvability_class(alg, &Congruence::total(alg.size))?.is_nilpotent() {
        rep.two_prime_failure = Some("precondition: nilpotent".into());
        return Ok(rep);
    }
    rep.nilpotent = true;
    let sr = supernilpotent_rank(alg, &lat)?;
    rep.rank = Some(sr);
    rep.configs = find_beta_configs(alg, &lat, Some(&cyclic_malcev(alg.size)))?;
    rep.beta_configs = rep.configs.len();
    // a witness needs two atoms with distinct characteristics (its γ₀, γ₁)
    let chars: std::collections::BTreeSet<u64> = lat
        .atoms
        .iter()
        .filter_map(|&a| lat.cover_char(lat.bottom(), a).map(|c| c.characteristic))
        .collect();
    rep.two_prime_failure = if sr != 2 {
        Some("precondition: sr = 2".into())
    } else if chars.len() < 2 {
        Some("two subcovers of κ with distinct characteristics".into())
    } else {
        match find_two_prime_witness(alg, &lat)? {
            WitnessSearch::Found(_) => None,
            WitnessSearch::Failed { fact, .. } => Some(fact),
        }
    };
    Ok(rep)
}

/// Scan the family `(Z_n; +, t·(x mod r))`, 1 < r < n, r | n, n ≤ `max_size`,
/// up to automorphisms of Z_n, for β-interpolation configurations and
/// two-prime witnesses. Candidates are examined on worker threads; the
/// report lists them in canonical order.
pub fn fixture_search(max_size: usize) -> Result<FixtureSearch> {
    let mut seen = std::collections::HashSet::new();
    let mut algs = Vec::new();
    for n in 2..=max_size {
        for r in (2..n).filter(|r| n % r == 0) {
            for t in 1..n {
                let alg = unary_extension(n, r, t);
                if seen.insert((n, canonical_unary(n, &alg.ops[1].table))) {
                    algs.push(alg);
                }
            }
        }
    }
    let workers = std::thread::available_parallelism()
        .map_or(1, |w| w.get())
        .min(8);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<CandidateReport>>>> =
        algs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    let bound = max_size.max(crate::congruence::DEFAULT_CON_BOUND);
    std::thread::scope(|sc| {
        for _ in 0..workers {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= algs.len() {
                    break;
                }
                let r = examine(&algs[i], bound);
                *slots[i].lock().expect("unpoisoned") = Some(r);
            });
        }
    });
    let mut candidates = Vec::with_capacity(algs.len());
    for s in slots {
        candidates.push(
            s.into_inner()
                .expect("unpoisoned")
                .expect("every slot filled")?,
        );
    }
    Ok(FixtureSearch {
        max_size,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::all_congruences;
    use crate::fieldpoly::Lit;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z6mod2_config() -> (FiniteAlgebra, BetaIntConfig) {
        let alg = fixtures::z6mod2();
        let lat = all_congruences(&alg).unwrap();
        let cfgs = find_beta_configs(&alg, &lat, None).unwrap();
        assert_eq!(cfgs.len(), 1);
        (alg, cfgs.into_iter().next().unwrap())
    }

    fn table(s: usize, f: impl Fn(usize) -> bool) -> Vec<bool> {
        (0..1 << s).map(f).collect()
    }

    #[test]
    fn lattice_gadget_examples() {
        let lat2 = fixtures::lat2();
        let phi = Cnf::new(2, vec![vec![Lit::pos(0), Lit::neg(1)]]).unwrap();
        let p = cnf_to_lattice_program(&phi).unwrap();
        // index bit i = b_{i+1}: (0,0), (1,0), (1,1) accepted
        assert_eq!(p.truth_table(&lat2).unwrap(), vec![true, true, false, true]);
        let empty = cnf_to_lattice_program(&Cnf::new(3, vec![]).unwrap()).unwrap();
        assert!(empty.truth_table(&lat2).unwrap().iter().all(|&x| x));
        let contra = Cnf::new(1, vec![vec![Lit::pos(0)], vec![Lit::neg(0)]]).unwrap();
        assert!(cnf_to_lattice_program(&contra)
            .unwrap()
            .truth_table(&lat2)
            .unwrap()
            .iter()
            .all(|&x| !x));
    }

    #[test]
    fn z6mod2_config_shape() {
        let (_, cfg) = z6mod2_config();
        assert_eq!((cfg.p, cfg.q), (3, 2));
        assert!(cfg.alpha.is_total() && cfg.beta.is_identity());
        assert_eq!(cfg.cs.len(), 2);
        assert!(!cfg.beta_eq(cfg.a_prime, cfg.e));
        assert!(cfg.v.universe_subset.contains(&cfg.e));
    }

    #[test]
    fn interpolation_examples() {
        let (alg, cfg) = z6mod2_config();
        let id = beta_interpolate(&alg, &cfg, &[false, true]).unwrap();
        assert_eq!(id.eval(&alg, &[cfg.d]).unwrap(), cfg.a);
        let zero = beta_interpolate(&alg, &cfg, &[false; 4]).unwrap();
        for x in [
            [cfg.c, cfg.c],
            [cfg.c, cfg.d],
            [cfg.d, cfg.c],
            [cfg.d, cfg.d],
        ] {
            assert_eq!(zero.eval(&alg, &x).unwrap(), cfg.e);
        }
        let and = beta_interpolate(&alg, &cfg, &table(2, |m| m == 3)).unwrap();
        assert_eq!(and.eval(&alg, &[cfg.d, cfg.d]).unwrap(), cfg.a);
        assert_eq!(and.eval(&alg, &[cfg.c, cfg.d]).unwrap(), cfg.e);
    }

    #[test]
    fn interpolation_random_tables() {
        let (alg, cfg) = z6mod2_config();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in 0..=3 {
            for _ in 0..5 {
                let f: Vec<bool> = (0..1 << s).map(|_| rng.gen()).collect();
                beta_interpolate(&alg, &cfg, &f).unwrap();
            }
        }
    }

    #[test]
    fn trace_group_of_order_three() {
        let alg = unary_extension(6, 3, 1);
        let lat = all_congruences(&alg).unwrap();
        let cfgs = find_beta_configs(&alg, &lat, None).unwrap();
        let cfg = cfgs.first().expect("a configuration");
        assert_eq!((cfg.p, cfg.q), (2, 3));
        assert_eq!(cfg.cs.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in 1..=3 {
            let f: Vec<bool> = (0..1 << s).map(|_| rng.gen()).collect();
            beta_interpolate(&alg, cfg, &f).unwrap();
        }
    }

    #[test]
    fn gf_polynomial_translation() {
        let (alg, cfg) = z6mod2_config();
        let phi = Cnf::new(
            3,
            vec![
                vec![Lit::pos(0), Lit::pos(1)],
                vec![Lit::neg(0), Lit::pos(2)],
            ],
        )
        .unwrap();
        let w = pseudo_and(&phi, cfg.p, 1).unwrap();
        let p = interpolate_gf_poly(&alg, &cfg, &w).unwrap();
        for mask in 0..8usize {
            let x: Vec<usize> = (0..3)
                .map(|i| if mask >> i & 1 == 1 { cfg.d } else { cfg.c })
                .collect();
            let b = word(mask, 3);
            let got = p.eval(&alg, &x).unwrap();
            assert_eq!(got == cfg.e, phi.unsat_count(&b) % 3 == 0);
        }
    }

    #[test]
    fn witness_search_failures() {
        let a = fixtures::load("Z6mod2").unwrap();
        match find_two_prime_witness(&a.algebra, &a.lattice).unwrap() {
            WitnessSearch::Failed { fact, .. } => {
                assert_eq!(fact, "two subcovers of κ with distinct characteristics")
            }
            WitnessSearch::Found(_) => panic!("Z6mod2 has a single prime below κ"),
        }
        let z6 = fixtures::load("Z6").unwrap();
        match find_two_prime_witness(&z6.algebra, &z6.lattice).unwrap() {
            WitnessSearch::Failed { fact, .. } => assert_eq!(fact, "precondition: sr = 2"),
            WitnessSearch::Found(_) => panic!("Z6 is supernilpotent"),
        }
    }

    #[test]
    fn small_search_finds_no_two_prime_algebra() {
        let s = fixture_search(8).unwrap();
        assert!(s.with_beta_configs().contains(&"Z6[1*(x%2)]"));
        assert!(s.with_two_prime_witness().is_empty());
    }
}
