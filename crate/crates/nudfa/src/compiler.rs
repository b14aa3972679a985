//! Programs over nilpotent Malcev algebras to AND∘MOD(m)∘MOD(p) circuits.
//!
//! The top quotient `A/σ_p` is supernilpotent and handled by interpolation
//! over its prime-power factors. Below it the compiler walks a maximal chain
//! of congruences down to 0; each step splits an algebra `D` over an abelian
//! atom `β` as `M × D/β` and rebuilds the indicator circuits of `D` from those
//! of `D/β`.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::algebra::{
    is_malcev, prime_power_decomposition, quotient_algebra, Decomposition, FiniteAlgebra,
};
use crate::arith;
use crate::cc::{
    identity_matrix, mat_mul, mat_vec, validate_shape, CCircuit, CcBuilder, GateKind, LayerShape,
    Matrix, Src, Wire,
};
use crate::circuit::{AlgCircuit, Node};
use crate::congruence::{
    all_congruences, charr_set, distinguished_congruences, is_pupi, Congruence, CongruenceLattice,
};
use crate::error::{refuse, Error, Result};
use crate::lowering::{and_sum_lower, collapse_with_known, AffineMap, Arena, Finish, ModPoly};
use crate::program::{decompose_program, word, AlgProgram};

/// `D ≅ M × D/β` for an abelian atom `β` of a nilpotent Malcev algebra `D`.
#[derive(Clone, Debug)]
pub struct CentralRep {
    pub beta: Congruence,
    pub e: usize,
    pub p: u64,
    pub nu: usize,
    pub basis: Vec<usize>,
    /// Coordinates of the members of `e/β`; `None` elsewhere.
    pub coords: Vec<Option<Vec<u64>>>,
    elem_of: HashMap<Vec<u64>, usize>,
    /// Class index of `D/β` to its representative.
    pub transversal: Vec<usize>,
    pub proj: Vec<usize>,
    pub quotient: FiniteAlgebra,
    /// `alpha[op][i]`: the scalar of argument `i`.
    pub alpha: Vec<Vec<Matrix>>,
    /// `hat[op]`: row-major over tuples of classes, as coordinates.
    pub hat: Vec<Vec<Vec<u64>>>,
    dtab: Vec<usize>,
    size: usize,
}

impl CentralRep {
    fn d(&self, x: usize, y: usize, z: usize) -> usize {
        self.dtab[(x * self.size + y) * self.size + z]
    }

    /// Coordinates of `d(x, r([x]), e)`.
    pub fn mpart(&self, x: usize) -> Vec<u64> {
        let r = self.transversal[self.proj[x]];
        self.coords[self.d(x, r, self.e)]
            .clone()
            .expect("M-part lies in e/β")
    }

    pub fn encode(&self, x: usize) -> (Vec<u64>, usize) {
        (self.mpart(x), self.proj[x])
    }

    pub fn decode(&self, v: &[u64], class: usize) -> usize {
        self.d(self.m_element(v), self.e, self.transversal[class])
    }

    pub fn m_element(&self, v: &[u64]) -> usize {
        self.elem_of[v]
    }

    pub fn hat_at(&self, op: usize, classes: &[usize]) -> &[u64] {
        let s = self.quotient.size;
        let idx = classes.iter().fold(0, |a, &c| a * s + c);
        &self.hat[op][idx]
    }

    fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.p).collect()
    }

    fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x + self.p - y) % self.p)
            .collect()
    }
}

/// Ternary table of a Malcev circuit on `alg`.
pub fn malcev_table(alg: &FiniteAlgebra, d: &AlgCircuit) -> Result<Vec<usize>> {
    let n = alg.size;
    let mut t = Vec::with_capacity(n * n * n);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                t.push(d.eval(alg, &[x, y, z])?);
            }
        }
    }
    Ok(t)
}

pub fn central_representation(
    alg: &FiniteAlgebra,
    beta: &Congruence,
    e: usize,
    d: &AlgCircuit,
) -> Result<CentralRep> {
    if !is_malcev(alg, d) {
        return refuse("the supplied circuit is not a Malcev term");
    }
    central_rep_from_table(alg, beta, e, malcev_table(alg, d)?)
}

pub(crate) fn central_rep_from_table(
    alg: &FiniteAlgebra,
    beta: &Congruence,
    e: usize,
    dtab: Vec<usize>,
) -> Result<CentralRep> {
    let n = alg.size;
    let d = |x: usize, y: usize, z: usize| dtab[(x * n + y) * n + z];
    let coset: Vec<usize> = beta.class_members(e);
    let Some((p, _)) = arith::prime_power(coset.len() as u64) else {
        return refuse(format!(
            "class of {e} has size {}, not a prime power > 1",
            coset.len()
        ));
    };
    let add = |x: usize, y: usize| d(x, e, y);
    for &x in &coset {
        for &y in &coset {
            let s = add(x, y);
            if !beta.related(s, e) || s != add(y, x) {
                return refuse(format!(
                    "x + y is not commutative inside the class of {e} at ({x}, {y})"
                ));
            }
            for &z in &coset {
                if add(s, z) != add(x, add(y, z)) {
                    return refuse(format!("x + y is not associative at ({x}, {y}, {z})"));
                }
            }
        }
    }
    // greedy basis of the elementary abelian group (e/β, +)
    let mut span: Vec<(usize, Vec<u64>)> = vec![(e, Vec::new())];
    let mut basis = Vec::new();
    for &x in &coset {
        if span.iter().any(|(s, _)| *s == x) {
            continue;
        }
        basis.push(x);
        let mut next = Vec::with_capacity(span.len() * p as usize);
        for (s, cs) in &span {
            let mut acc = *s;
            for k in 0..p {
                let mut v = cs.clone();
                v.push(k);
                next.push((acc, v));
                acc = add(acc, x);
            }
            if acc != *s {
                return refuse(format!("{x} does not have order {p} in the class of {e}"));
            }
        }
        for (_, cs) in span.iter_mut() {
            cs.push(0);
        }
        span = next;
    }
    let nu = basis.len();
    let distinct: BTreeSet<usize> = span.iter().map(|(s, _)| *s).collect();
    if distinct.len() != span.len() || span.len() != coset.len() {
        return refuse(format!(
            "class of {e} is not an elementary abelian {p}-group"
        ));
    }
    let mut coords = vec![None; n];
    let mut elem_of = HashMap::new();
    for (s, cs) in span {
        coords[s] = Some(cs.clone());
        elem_of.insert(cs, s);
    }
    let (quotient, proj) = quotient_algebra(alg, beta)?;
    let mut transversal: Vec<usize> = beta.representatives();
    transversal[proj[e]] = e;
    let mut rep = CentralRep {
        beta: beta.clone(),
        e,
        p,
        nu,
        basis,
        coords,
        elem_of,
        transversal,
        proj,
        quotient,
        alpha: Vec::new(),
        hat: Vec::new(),
        dtab,
        size: n,
    };
    for x in 0..n {
        let r = rep.transversal[rep.proj[x]];
        if rep.coords[rep.d(x, r, e)].is_none() {
            return refuse(format!("M-part of {x} leaves the class of {e}"));
        }
        let (v, c) = rep.encode(x);
        if rep.decode(&v, c) != x {
            return Err(Error::Verification(format!("decode(encode({x})) != {x}")));
        }
    }
    let s = rep.quotient.size;
    let ce = rep.proj[e];
    for (oi, op) in alg.ops.iter().enumerate() {
        let k = op.arity;
        let mut hat = Vec::with_capacity(s.pow(k as u32));
        let mut cls = vec![0usize; k];
        for idx in 0..s.pow(k as u32) {
            decode_tuple(idx, s, &mut cls);
            let args: Vec<usize> = cls.iter().map(|&c| rep.transversal[c]).collect();
            hat.push(rep.mpart(op.apply(n, &args)));
        }
        rep.hat.push(hat);
        let h0 = rep.hat_at(oi, &vec![ce; k]).to_vec();
        let mut alphas = Vec::with_capacity(k);
        for i in 0..k {
            let mut mat = vec![vec![0u64; nu]; nu];
            for t in 0..nu {
                let mut unit = vec![0u64; nu];
                unit[t] = 1;
                let mut args = vec![rep.transversal[ce]; k];
                args[i] = rep.decode(&unit, ce);
                let col = rep.sub(&rep.mpart(op.apply(n, &args)), &h0);
                for (row, v) in col.into_iter().enumerate() {
                    mat[row][t] = v;
                }
            }
            alphas.push(mat);
        }
        rep.alpha.push(alphas);
        // f(d̄) = (Σ α_i d_i^M + f̂(d̄'), f'(d̄')) on every tuple
        let mut args = vec![0usize; k];
        for idx in 0..n.pow(k as u32) {
            decode_tuple(idx, n, &mut args);
            let (vm, vc) = rep.encode(op.apply(n, &args));
            let cls: Vec<usize> = args.iter().map(|&a| rep.proj[a]).collect();
            let mut expect = rep.hat_at(oi, &cls).to_vec();
            for (i, &a) in args.iter().enumerate() {
                expect = rep.add(&expect, &mat_vec(&rep.alpha[oi][i], &rep.mpart(a), p));
            }
            if vm != expect || vc != rep.quotient.ops[oi].apply(s, &cls) {
                return Err(Error::Verification(format!(
                    "operation {} at {args:?} breaks the central decomposition over {}",
                    op.name,
                    beta.label()
                )));
            }
        }
    }
    Ok(rep)
}

fn decode_tuple(mut idx: usize, n: usize, out: &mut [usize]) {
    for i in (0..out.len()).rev() {
        out[i] = idx % n;
        idx /= n;
    }
}

/// Sum over paths from `c.output` of products of argument scalars.
pub fn path_coefficients(c: &AlgCircuit, rep: &CentralRep) -> Vec<Option<Matrix>> {
    path_coefficients_from(c, c.output, rep)
}

pub fn path_coefficients_from(
    c: &AlgCircuit,
    root: usize,
    rep: &CentralRep,
) -> Vec<Option<Matrix>> {
    let mut coeff: Vec<Option<Matrix>> = vec![None; c.nodes.len()];
    coeff[root] = Some(identity_matrix(rep.nu));
    for v in (0..=root).rev() {
        let Some(cv) = coeff[v].clone() else { continue };
        if let Node::Gate { op, args } = &c.nodes[v] {
            for (i, &ch) in args.iter().enumerate() {
                let term = mat_mul(&cv, &rep.alpha[*op][i], rep.p);
                coeff[ch] = Some(match coeff[ch].take() {
                    None => term,
                    Some(acc) => crate::cc::mat_add(&acc, &term, rep.p),
                });
            }
        }
    }
    coeff
}

fn is_zero(m: &Matrix) -> bool {
    m.iter().all(|r| r.iter().all(|&x| x == 0))
}

fn diag(v: &[u64]) -> Matrix {
    (0..v.len())
        .map(|i| {
            (0..v.len())
                .map(|j| if i == j { v[i] } else { 0 })
                .collect()
        })
        .collect()
}

/// Indicator `[program accepts]` for a program over a supernilpotent algebra
/// with one accepting element: `w = Σ (pdiv/p_j)·w_j ≡ δ' (mod pdiv)`.
fn supernilpotent_indicator(
    arena: &mut Arena,
    alg: &FiniteAlgebra,
    dec: &Decomposition,
    prog: &AlgProgram,
) -> Result<ModPoly> {
    let pdiv = arith::pdiv(alg.size as u64);
    let parts = decompose_program(alg, prog, dec)?;
    let mut raw: Vec<(Option<usize>, u64)> = Vec::new();
    let mut delta = 0;
    for (fa, fp) in &parts {
        let (pj, _) = arith::prime_power(fa.size as u64).ok_or_else(|| {
            Error::Refused(format!("factor of size {} is not a prime power", fa.size))
        })?;
        let scale = pdiv / pj;
        delta = (delta + scale) % pdiv;
        let table: Vec<u64> = fp.truth_table(fa)?.into_iter().map(u64::from).collect();
        let w = crate::fieldpoly::multilinear_interpolate(&table, prog.n, pj)?;
        for (vars, c) in w.monomials() {
            raw.push((arena.mono(&vars), c * scale));
        }
    }
    arena.indicator(pdiv, &raw, &[delta])
}

fn supernilpotent_setup(alg: &FiniteAlgebra) -> Result<(CongruenceLattice, Decomposition)> {
    let lat = all_congruences(alg)?;
    if alg.size > 1 && is_pupi(&lat, lat.bottom(), lat.top()).is_none() {
        return refuse(format!(
            "{} is not supernilpotent (its congruence lattice is not PUPI)",
            alg.name
        ));
    }
    let dec = prime_power_decomposition(alg, &lat)
        .ok_or_else(|| Error::Refused(format!("{} has no prime-power decomposition", alg.name)))?;
    Ok((lat, dec))
}

/// AND(d)∘MOD(pdiv A)∘OR(|S|) circuit of a program over a supernilpotent algebra.
pub fn compile_supernilpotent(alg: &FiniteAlgebra, prog: &AlgProgram) -> Result<CCircuit> {
    prog.validate(alg)?;
    let (_, dec) = supernilpotent_setup(alg)?;
    let pdiv = arith::pdiv(alg.size as u64);
    let mut arena = Arena::new(pdiv, 2)?;
    let mut polys = Vec::new();
    for &c in &prog.accepting {
        polys.push(supernilpotent_indicator(
            &mut arena,
            alg,
            &dec,
            &prog.with_accepting(vec![c]),
        )?);
    }
    let mut b = CcBuilder::new(prog.n);
    let mut ors = Vec::new();
    let mut fan = 1;
    for poly in &polys {
        for (g, _) in arena.emit_mod_gates(&mut b, poly)? {
            ors.push(crate::cc::wire(Src::Gate(g), 1));
        }
        fan = fan.max(arena.fan_in(poly));
    }
    let o = b.add(GateKind::Or, 3, ors);
    Ok(b.finish(
        o,
        &format!("AND({fan})∘MOD({pdiv})∘OR({})", prog.accepting.len()),
    ))
}

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Exhaustive per-stage checks when `n` is at most this.
    pub verify_n: usize,
    pub cap: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            verify_n: 10,
            cap: crate::lowering::DEFAULT_MONOMIAL_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub step: String,
    pub level: usize,
    pub node: usize,
    pub target: usize,
    /// Indicator terms of the result (MOD_m gates feeding the MOD_p gate).
    pub terms: usize,
    pub five_layer_size: Option<u64>,
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub circuit: CCircuit,
    pub m: u64,
    pub p: u64,
    /// `γ_h, …, γ_0`.
    pub chain: Vec<Congruence>,
    pub steps: Vec<StepReport>,
    pub verified: bool,
}

/// Indicator polynomials keyed by (level, node, target), in one shared arena.
pub struct CompileCache {
    pub arena: Arena,
    entries: HashMap<(usize, usize, usize), ModPoly>,
}

impl CompileCache {
    pub fn new(arena: Arena) -> Self {
        CompileCache {
            arena,
            entries: HashMap::new(),
        }
    }

    pub fn get(&self, level: usize, node: usize, target: usize) -> Option<&ModPoly> {
        self.entries.get(&(level, node, target))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The cached indicator as an AND∘MOD(m)∘MOD(p) circuit.
    pub fn circuit(
        &self,
        level: usize,
        node: usize,
        target: usize,
        inputs: usize,
    ) -> Option<Result<CCircuit>> {
        self.get(level, node, target)
            .map(|p| self.arena.emit(p, inputs, true, Finish::ModP))
    }
}

struct Level {
    alg: FiniteAlgebra,
    /// A → this level
    proj: Vec<usize>,
    rep: Option<CentralRep>,
}

struct Compiler<'a> {
    prog: &'a AlgProgram,
    levels: Vec<Level>,
    top_dec: Decomposition,
    cache: CompileCache,
    steps: Vec<StepReport>,
    values: Option<Vec<Vec<usize>>>,
    a: &'a FiniteAlgebra,
    top: Congruence,
}

/// Compiles a program over a nilpotent Malcev algebra `A` with
/// `charr{0, κ} = {p}` into AND∘MOD(pdiv A / p)∘MOD(p). Supernilpotent
/// algebras take the base case with `p` the largest prime of |A| and a
/// pass-through MOD(p) output.
pub fn compile_nilpotent(
    alg: &FiniteAlgebra,
    prog: &AlgProgram,
    malcev: Option<&AlgCircuit>,
) -> Result<CCircuit> {
    Ok(compile_nilpotent_with(alg, prog, malcev, &CompileOptions::default())?.circuit)
}

pub fn compile_nilpotent_with(
    alg: &FiniteAlgebra,
    prog: &AlgProgram,
    malcev: Option<&AlgCircuit>,
    opts: &CompileOptions,
) -> Result<Compiled> {
    prog.validate(alg)?;
    let n = alg.size;
    let lat = all_congruences(alg)?;
    let dist = distinguished_congruences(alg, &lat)?;
    let ki = lat.idx(&dist.kappa)?;
    let chars = charr_set(&lat, lat.bottom(), ki)?;
    let pdiv = arith::pdiv(n as u64);
    let (p, m, top) = match chars.as_slice() {
        [] => {
            let p = arith::prime_divisors(n as u64).last().copied().unwrap_or(2);
            (p, pdiv, Congruence::identity(n))
        }
        [p] => (*p, pdiv / p, dist.sigma_p[p].clone()),
        more => return refuse(format!("charr(0, κ) = {more:?} is not a single prime")),
    };
    let ti = lat.idx(&top)?;
    let mut chains = lat.maximal_chains(lat.bottom(), ti);
    chains.sort();
    let chain_idx = chains.into_iter().next().unwrap_or_else(|| vec![ti]);
    let chain: Vec<Congruence> = chain_idx
        .iter()
        .rev()
        .map(|&i| lat.elements[i].clone())
        .collect(); // γ_0..γ_h
    let h = chain.len() - 1;
    let dtab = if h > 0 {
        if m == 1 {
            return refuse("descent needs a modulus m > 1");
        }
        let owned;
        let d = match malcev {
            Some(d) => d,
            None => {
                owned = crate::algebra::find_malcev_polynomial(
                    alg,
                    crate::algebra::DEFAULT_MALCEV_DEPTH,
                )
                .ok_or_else(|| Error::Refused(format!("no Malcev term found for {}", alg.name)))?;
                &owned
            }
        };
        if !is_malcev(alg, d) {
            return refuse("the supplied circuit is not a Malcev term");
        }
        Some(malcev_table(alg, d)?)
    } else {
        None
    };
    let mut levels = Vec::with_capacity(h + 1);
    for j in 0..=h {
        let (q, proj) = quotient_algebra(alg, &chain[j])?;
        let rep = match (&dtab, j < h) {
            (Some(dt), true) => {
                let reps = chain[j].representatives();
                let s = q.size;
                let mut dq = Vec::with_capacity(s * s * s);
                for x in 0..s {
                    for y in 0..s {
                        for z in 0..s {
                            dq.push(proj[dt[(reps[x] * n + reps[y]) * n + reps[z]]]);
                        }
                    }
                }
                let labels: Vec<usize> = reps.iter().map(|&r| chain[j + 1].class_of(r)).collect();
                let beta = Congruence::from_labels(&labels);
                let rep = central_rep_from_table(&q, &beta, 0, dq)?;
                if rep.p != p {
                    return refuse(format!(
                        "atom {} has characteristic {}, expected {p}",
                        beta.label(),
                        rep.p
                    ));
                }
                Some(rep)
            }
            _ => None,
        };
        levels.push(Level { alg: q, proj, rep });
    }
    let top_alg = &levels[h].alg;
    let (_, top_dec) = supernilpotent_setup(top_alg)?;
    let top_pdiv = arith::pdiv(top_alg.size as u64);
    if m % top_pdiv != 0 {
        return refuse(format!(
            "pdiv of the top quotient ({top_pdiv}) does not divide m = {m}"
        ));
    }
    let arena = Arena::new(m, p)?.with_cap(opts.cap);
    let values = (prog.n <= opts.verify_n && prog.n <= 20).then(|| {
        (0..1usize << prog.n)
            .map(|i| prog.node_values(alg, &word(i, prog.n)))
            .collect()
    });
    let mut comp = Compiler {
        prog,
        levels,
        top_dec,
        cache: CompileCache::new(arena),
        steps: Vec::new(),
        values,
        a: alg,
        top: top.clone(),
    };
    let out = prog.circuit.output;
    let mut poly = ModPoly::default();
    // accepting branches are mutually exclusive, so their indicators add
    for &c in &prog.accepting {
        let ind = comp.indicator(0, out, c)?;
        poly = comp.cache.arena.add(&poly, &ind);
    }
    let circuit = comp.cache.arena.emit(&poly, prog.n, true, Finish::ModP)?;
    let shape = LayerShape::parse(&format!("AND∘MOD({m})∘MOD({p})"))?;
    let rep = validate_shape(&circuit, &shape);
    if !rep.ok {
        return Err(Error::Verification(rep.violation.unwrap_or_default()));
    }
    let verified = if comp.values.is_some() {
        if circuit.truth_table()? != prog.truth_table(alg)? {
            return Err(Error::Verification(
                "compiled circuit differs from the program".into(),
            ));
        }
        true
    } else {
        false
    };
    let mut chain_top_down = chain;
    chain_top_down.reverse();
    Ok(Compiled {
        circuit,
        m,
        p,
        chain: chain_top_down,
        steps: comp.steps,
        verified,
    })
}

impl Compiler<'_> {
    fn h(&self) -> usize {
        self.levels.len() - 1
    }

    fn indicator(&mut self, level: usize, node: usize, target: usize) -> Result<ModPoly> {
        if let Some(p) = self.cache.get(level, node, target) {
            return Ok(p.clone());
        }
        let poly = if level == self.h() {
            self.base(node, target)?
        } else {
            self.descend(level, node, target)?
        };
        let mut verified = false;
        if let Some(vals) = &self.values {
            let proj = &self.levels[level].proj;
            for (i, row) in vals.iter().enumerate() {
                let want = u64::from(proj[row[node]] == target);
                if self.cache.arena.eval(&poly, &word(i, self.prog.n)) != want {
                    return Err(Error::Verification(format!(
                        "indicator (level {level}, node {node}, target {target}) wrong at input {i}"
                    )));
                }
            }
            verified = true;
        }
        if level == self.h() {
            self.steps.push(StepReport {
                step: "compile_supernilpotent".into(),
                level,
                node,
                target,
                terms: poly.len(),
                five_layer_size: None,
                verified,
            });
        } else if let Some(last) = self.steps.last_mut() {
            last.verified &= verified;
        }
        self.cache
            .entries
            .insert((level, node, target), poly.clone());
        Ok(poly)
    }

    fn base(&mut self, node: usize, target: usize) -> Result<ModPoly> {
        let sub = AlgProgram::new(
            self.prog.circuit.clone().with_output(node),
            self.prog.n,
            self.prog.instructions.clone(),
            vec![],
        )?;
        let (q, qp) = sub.quotient(self.a, &self.top)?;
        let qp = qp.with_accepting(vec![target]);
        supernilpotent_indicator(&mut self.cache.arena, &q, &self.top_dec, &qp)
    }

    /// Indicator of `node = target` over level `j` from level `j + 1`.
    fn descend(&mut self, j: usize, node: usize, target: usize) -> Result<ModPoly> {
        let rep = self.levels[j]
            .rep
            .clone()
            .expect("central representation below the top");
        let p = rep.p;
        let nu = rep.nu;
        let s = rep.quotient.size;
        let circuit = &self.prog.circuit;
        let coeffs = path_coefficients_from(circuit, node, &rep);
        let proj = self.levels[j].proj.clone();
        let (target_m, target_c) = rep.encode(target);

        let mut b = CcBuilder::new(self.prog.n);
        let mut known: HashMap<usize, ModPoly> = HashMap::new();
        let mut sum_wires: Vec<Wire> = Vec::new();
        let mut sum_coeffs: Vec<Matrix> = Vec::new();
        let mut offset = vec![0u64; nu];

        for u in 0..=node {
            let Some(cu) = coeffs[u].clone() else {
                continue;
            };
            if is_zero(&cu) {
                continue;
            }
            match &circuit.nodes[u] {
                Node::Var(x) => {
                    let ins = self.prog.instructions[*x];
                    let m0 = rep.mpart(proj[ins.a0]);
                    let m1 = rep.mpart(proj[ins.a1]);
                    offset = rep.add(&offset, &mat_vec(&cu, &m0, p));
                    let diff = mat_vec(&cu, &rep.sub(&m1, &m0), p);
                    if diff.iter().any(|&v| v != 0) {
                        let arena = &mut self.cache.arena;
                        let mono = arena.mono(&[ins.bit]);
                        let z = arena.indicator(arena.m, &[(mono, 1)], &[1])?;
                        let zg = arena.emit_indicator(&mut b, &z)?;
                        known.insert(zg, z);
                        let a4 = b.add(GateKind::And, 4, vec![crate::cc::wire(Src::Gate(zg), 1)]);
                        sum_wires.push(crate::cc::wire(Src::Gate(a4), 1));
                        sum_coeffs.push(diag(&diff));
                    }
                }
                Node::Const(a) => {
                    offset = rep.add(&offset, &mat_vec(&cu, &rep.mpart(proj[*a]), p));
                }
                Node::Gate { op, args } => {
                    let r = args.len();
                    if rep.hat[*op].iter().all(|v| v.iter().all(|&x| x == 0)) {
                        continue;
                    }
                    if r == 0 {
                        offset = rep.add(&offset, &mat_vec(&cu, &rep.hat[*op][0], p));
                        continue;
                    }
                    if r * s > 20 {
                        return Err(Error::Budget(format!(
                            "{r}·{s} indicator bits for one gate"
                        )));
                    }
                    // f̂∘ over one-hot class bits x_{i,d}, bit index i·s + d
                    let bits = r * s;
                    let mut table = vec![vec![0u64; nu]; 1 << bits];
                    let mut cls = vec![0usize; r];
                    for t in 0..s.pow(r as u32) {
                        decode_tuple(t, s, &mut cls);
                        let h = rep.hat_at(*op, &cls).to_vec();
                        if h.iter().all(|&x| x == 0) {
                            continue;
                        }
                        let need: usize = cls
                            .iter()
                            .enumerate()
                            .fold(0, |a, (i, &d)| a | 1 << (i * s + d));
                        for (mask, row) in table.iter_mut().enumerate() {
                            if mask & need == need {
                                *row = rep.add(row, &h);
                            }
                        }
                    }
                    let lowered = and_sum_lower(&table, bits, p)?;
                    let out = &lowered.gates[lowered.output];
                    let GateKind::Sump {
                        coeffs: lc,
                        offset: lo,
                        ..
                    } = &out.kind
                    else {
                        unreachable!("and_sum_lower ends in SUMP")
                    };
                    let inner = AffineMap {
                        p,
                        coeffs: lc.clone(),
                        offset: lo.clone(),
                    };
                    let outer = AffineMap {
                        p,
                        coeffs: vec![cu.clone()],
                        offset: vec![0; nu],
                    };
                    let merged = outer.compose(&[inner])?;
                    offset = rep.add(&offset, &merged.offset);
                    for (w, mat) in out.inputs.iter().zip(&merged.coeffs) {
                        let Src::Gate(ag) = w.src else { unreachable!() };
                        let mut zs = Vec::new();
                        for x in &lowered.gates[ag].inputs {
                            let Src::Input(q) = x.src else { unreachable!() };
                            let (ch, d) = (args[q / s], q % s);
                            let z = self.indicator(j + 1, ch, d)?;
                            let zg = self.cache.arena.emit_indicator(&mut b, &z)?;
                            known.insert(zg, z);
                            zs.push(crate::cc::wire(Src::Gate(zg), 1));
                        }
                        let a4 = b.add(GateKind::And, 4, zs);
                        sum_wires.push(crate::cc::wire(Src::Gate(a4), 1));
                        sum_coeffs.push(mat.clone());
                    }
                }
            }
        }
        let out = b.add(
            GateKind::Sumpc {
                p,
                nu,
                coeffs: sum_coeffs,
                offset,
                target: target_m.clone(),
            },
            5,
            sum_wires,
        );
        let five = b.finish(
            out,
            &format!(
                "AND∘MOD({})∘MOD({p})∘AND∘SUMPC({p},{nu})",
                self.cache.arena.m
            ),
        );
        let mut verified = false;
        if let Some(vals) = &self.values {
            for (i, row) in vals.iter().enumerate() {
                let want = rep.mpart(proj[row[node]]) == target_m;
                if five.eval_bool(&word(i, self.prog.n))? != want {
                    return Err(Error::Verification(format!(
                        "M-part circuit (level {j}, node {node}, target {target}) wrong at input {i}"
                    )));
                }
            }
            verified = true;
        }
        let mpoly = collapse_with_known(&mut self.cache.arena, &five, &known)?;
        let quot = self.indicator(j + 1, node, target_c)?;
        let glued = self
            .cache
            .arena
            .apply_table(&[false, false, false, true], &[quot, mpoly])?;
        self.steps.push(StepReport {
            step: "descend_mod_beta".into(),
            level: j,
            node,
            target,
            terms: glued.len(),
            five_layer_size: Some(five.size()),
            verified,
        });
        Ok(glued)
    }
}
