//! Semantics-preserving rewrites between layered CC circuit shapes.
//!
//! Internally every intermediate of the form MOD(m)∘SUMP(p,1) is kept as a
//! [`ModPoly`]: a Z_p-combination of point indicators `[L ≡ r (mod m)]`, where
//! `L` is a linear form over base monomials (AND-layer gates, or bare inputs).
//! Linear forms are interned in an [`Arena`] shared by everything that is
//! eventually emitted into one circuit.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::arith::{self, gcd, pow_mod};
use crate::cc::{mat_mul, wire, CCircuit, CcBuilder, GateKind, Matrix, Src, Value};
use crate::error::{malformed, Error, Result};
use crate::fieldpoly::{bs, multilinear_interpolate, zpqe_normal_form, ZpqeTerm};
use crate::program::word;

pub const DEFAULT_MONOMIAL_CAP: usize = 1_000_000;

/// Sparse linear form over monomial ids, sorted, coefficients in 1..m.
type Form = Vec<(usize, u64)>;
/// (form id, residue); form 0 is the zero form and only appears as (0, 0).
pub type Key = (usize, u64);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModPoly {
    pub terms: BTreeMap<Key, u64>,
}

impl ModPoly {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Arena {
    pub m: u64,
    pub p: u64,
    pub cap: usize,
    pub peak: usize,
    monos: Vec<Vec<usize>>,
    mono_ix: HashMap<Vec<usize>, usize>,
    forms: Vec<Form>,
    form_ix: HashMap<Form, usize>,
    units: Vec<u64>,
    b2: Option<Vec<ZpqeTerm>>,
    prod: HashMap<(Key, Key), Vec<(Key, u64)>>,
}

impl Arena {
    pub fn new(m: u64, p: u64) -> Result<Self> {
        if !arith::is_prime(p) {
            return malformed(format!("{p} is not prime"));
        }
        if m == 0 || !arith::is_square_free(m) {
            return malformed(format!("{m} is not square-free"));
        }
        let units = (1..m.max(2)).filter(|&u| gcd(u, m) == 1).collect();
        let mut a = Arena {
            m,
            p,
            cap: DEFAULT_MONOMIAL_CAP,
            peak: 0,
            monos: Vec::new(),
            mono_ix: HashMap::new(),
            forms: vec![Vec::new()],
            form_ix: HashMap::new(),
            units,
            b2: None,
            prod: HashMap::new(),
        };
        a.form_ix.insert(Vec::new(), 0);
        Ok(a)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn num_forms(&self) -> usize {
        self.forms.len()
    }

    /// Interns a monomial; `None` for the empty (constant 1) monomial.
    pub fn mono(&mut self, vars: &[usize]) -> Option<usize> {
        let mut v = vars.to_vec();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return None;
        }
        if let Some(&i) = self.mono_ix.get(&v) {
            return Some(i);
        }
        let i = self.monos.len();
        self.monos.push(v.clone());
        self.mono_ix.insert(v, i);
        Some(i)
    }

    fn reduce(&self, raw: impl IntoIterator<Item = (usize, u64)>) -> Form {
        let mut acc: BTreeMap<usize, u64> = BTreeMap::new();
        for (k, c) in raw {
            let e = acc.entry(k).or_insert(0);
            *e = (*e + c % self.m) % self.m;
        }
        acc.into_iter().filter(|&(_, c)| c != 0).collect()
    }

    /// Key of `[raw ≡ r]`, scaled by the unit giving the least representative.
    /// `None` when the indicator is identically 0.
    fn key(&mut self, raw: Form, r: u64) -> Option<Key> {
        let r = r % self.m;
        if raw.is_empty() {
            return (r == 0).then_some((0, 0));
        }
        let mut best: Option<(Form, u64)> = None;
        for &u in &self.units {
            let scaled: Form = raw.iter().map(|&(k, c)| (k, c * u % self.m)).collect();
            if best.as_ref().map_or(true, |(b, _)| scaled < *b) {
                best = Some((scaled, u));
            }
        }
        let (form, u) = best.expect("at least one unit");
        let id = match self.form_ix.get(&form) {
            Some(&i) => i,
            None => {
                let i = self.forms.len();
                self.forms.push(form.clone());
                self.form_ix.insert(form, i);
                i
            }
        };
        Some((id, r * u % self.m))
    }

    pub fn constant(&self, c: u64) -> ModPoly {
        let mut t = ModPoly::default();
        self.add_term(&mut t, (0, 0), c);
        t
    }

    fn add_term(&self, poly: &mut ModPoly, k: Key, mu: u64) {
        let mu = mu % self.p;
        if mu == 0 {
            return;
        }
        let e = poly.terms.entry(k).or_insert(0);
        *e = (*e + mu) % self.p;
        if *e == 0 {
            poly.terms.remove(&k);
        }
    }

    /// `Σ_{a ∈ accept} [Σ c·mono + shift ≡ a (mod m')]` with `m' | m`.
    pub fn indicator(
        &mut self,
        modulus: u64,
        raw: &[(Option<usize>, u64)],
        accept: &[u64],
    ) -> Result<ModPoly> {
        if modulus == 0 || self.m % modulus != 0 {
            return malformed(format!("MOD({modulus}) does not embed into Z_{}", self.m));
        }
        let scale = self.m / modulus;
        let mut shift = 0;
        let mut lin = Vec::new();
        for &(mono, c) in raw {
            match mono {
                None => shift = (shift + c) % modulus,
                Some(k) => lin.push((k, (c % modulus) * scale)),
            }
        }
        let form = self.reduce(lin);
        let mut out = ModPoly::default();
        let accept: BTreeSet<u64> = accept.iter().map(|a| a % modulus).collect();
        for a in accept {
            let r = (a + modulus - shift) % modulus * scale;
            if let Some(k) = self.key(form.clone(), r) {
                self.add_term(&mut out, k, 1);
            }
        }
        Ok(out)
    }

    pub fn add(&self, a: &ModPoly, b: &ModPoly) -> ModPoly {
        let mut out = a.clone();
        for (&k, &mu) in &b.terms {
            self.add_term(&mut out, k, mu);
        }
        out
    }

    pub fn scale(&self, a: &ModPoly, c: u64) -> ModPoly {
        let c = c % self.p;
        let mut out = ModPoly::default();
        if c != 0 {
            for (&k, &mu) in &a.terms {
                self.add_term(&mut out, k, mu * c);
            }
        }
        out
    }

    fn b2(&mut self) -> Result<Vec<ZpqeTerm>> {
        if self.b2.is_none() {
            self.b2 = Some(bs(self.m, 2, self.p)?);
        }
        Ok(self.b2.clone().unwrap_or_default())
    }

    /// `[L1 ≡ r1]·[L2 ≡ r2]` rewritten through the normal form of the
    /// two-point origin indicator on Z_m².
    fn product(&mut self, k1: Key, k2: Key) -> Result<Vec<(Key, u64)>> {
        let (k1, k2) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        if k1.0 == 0 {
            return Ok(vec![(k2, 1)]);
        }
        if k1.0 == k2.0 {
            return Ok(if k1.1 == k2.1 { vec![(k1, 1)] } else { vec![] });
        }
        if let Some(v) = self.prod.get(&(k1, k2)) {
            return Ok(v.clone());
        }
        let b2 = self.b2()?;
        let (f1, f2) = (self.forms[k1.0].clone(), self.forms[k2.0].clone());
        let mut acc: BTreeMap<Key, u64> = BTreeMap::new();
        for t in &b2 {
            let (b1, bb2) = (t.beta[0], t.beta[1]);
            // b1 (L1 - r1) + b2 (L2 - r2) + u ≡ 0
            let raw = self.reduce(
                f1.iter()
                    .map(|&(k, c)| (k, c * b1))
                    .chain(f2.iter().map(|&(k, c)| (k, c * bb2))),
            );
            let r = (b1 * k1.1 + bb2 * k2.1 + self.m - t.u % self.m) % self.m;
            if let Some(k) = self.key(raw, r) {
                let e = acc.entry(k).or_insert(0);
                *e = (*e + t.mu) % self.p;
            }
        }
        let v: Vec<(Key, u64)> = acc.into_iter().filter(|&(_, mu)| mu != 0).collect();
        if self.prod.len() > 4_000_000 {
            self.prod.clear();
        }
        self.prod.insert((k1, k2), v.clone());
        Ok(v)
    }

    pub fn mul(&mut self, a: &ModPoly, b: &ModPoly) -> Result<ModPoly> {
        if a.len().saturating_mul(b.len()) > self.cap.saturating_mul(16) {
            return Err(Error::Budget(format!(
                "product of {} by {} indicator terms",
                a.len(),
                b.len()
            )));
        }
        let mut out = ModPoly::default();
        for (&k1, &m1) in &a.terms {
            for (&k2, &m2) in &b.terms {
                for (k, c) in self.product(k1, k2)? {
                    self.add_term(&mut out, k, m1 * m2 % self.p * c);
                }
            }
            if out.len() > self.cap {
                return Err(Error::Budget(format!(
                    "more than {} indicator terms",
                    self.cap
                )));
            }
        }
        self.peak = self.peak.max(out.len());
        Ok(out)
    }

    /// `χ_T(s) = Σ_{t∈T} (1 − (s − t)^{p−1})`.
    pub fn chi(&mut self, s: &ModPoly, accept: &[u64]) -> Result<ModPoly> {
        let p = self.p;
        let accept: BTreeSet<u64> = accept.iter().map(|t| t % p).collect();
        if accept.is_empty() {
            return Ok(ModPoly::default());
        }
        if accept.len() as u64 == p {
            return Ok(self.constant(1));
        }
        let mut powers = vec![self.constant(1)];
        for k in 1..p {
            let next = if k == 1 {
                s.clone()
            } else {
                self.mul(&powers[k as usize - 1], s)?
            };
            powers.push(next);
        }
        // binomials C(p-1, k) mod p
        let mut binom = vec![1u64; p as usize];
        for k in 1..p as usize {
            binom[k] = binom[k - 1] * ((p - 1) - (k as u64 - 1)) % p
                * arith::inv_mod(k as u64, p).unwrap_or(0)
                % p;
        }
        let mut out = ModPoly::default();
        for t in accept {
            out = self.add(&out, &self.constant(1));
            let neg_t = (p - t) % p;
            for k in 0..p as usize {
                let c = binom[k] * pow_mod(neg_t, p - 1 - k as u64, p) % p;
                let term = self.scale(&powers[k], p - c);
                out = self.add(&out, &term);
            }
        }
        Ok(out)
    }

    /// Value in Z_p on a boolean input.
    pub fn eval(&self, poly: &ModPoly, b: &[bool]) -> u64 {
        let mono: Vec<bool> = self.monos.iter().map(|v| v.iter().all(|&i| b[i])).collect();
        let mut cache: HashMap<usize, u64> = HashMap::new();
        let mut acc = 0;
        for (&(f, r), &mu) in &poly.terms {
            let v = *cache.entry(f).or_insert_with(|| {
                self.forms[f]
                    .iter()
                    .filter(|&&(k, _)| mono[k])
                    .fold(0, |s, &(_, c)| (s + c) % self.m)
            });
            if v == r {
                acc = (acc + mu) % self.p;
            }
        }
        acc
    }

    pub fn table(&self, poly: &ModPoly, n: usize) -> Vec<u64> {
        (0..1usize << n)
            .map(|i| self.eval(poly, &word(i, n)))
            .collect()
    }

    fn sorted_terms(&self, poly: &ModPoly) -> Vec<(Key, u64)> {
        let mut v: Vec<(Key, u64)> = poly.terms.iter().map(|(&k, &mu)| (k, mu)).collect();
        v.sort_by_cached_key(|&((f, r), _)| {
            let content: Vec<(&[usize], u64)> = self.forms[f]
                .iter()
                .map(|&(k, c)| (self.monos[k].as_slice(), c))
                .collect();
            (content.len(), format!("{content:?}"), r)
        });
        v
    }

    fn max_fan_in(&self, poly: &ModPoly) -> usize {
        poly.terms
            .keys()
            .flat_map(|&(f, _)| self.forms[f].iter().map(|&(k, _)| self.monos[k].len()))
            .max()
            .unwrap_or(1)
            .max(1)
    }

    /// Emits the MOD_m gates of `poly` one layer above `base` (0 = inputs).
    /// Returns the constant term separately when `fold_constant` is set.
    fn emit_mods(
        &self,
        b: &mut CcBuilder,
        poly: &ModPoly,
        and_layer: bool,
        base: usize,
        fold_constant: bool,
    ) -> Result<(u64, Vec<(usize, u64)>)> {
        let mod_layer = if and_layer { base + 1 } else { 1 };
        let mut constant = 0;
        let mut out = Vec::new();
        for ((f, r), mu) in self.sorted_terms(poly) {
            if f == 0 && fold_constant {
                constant = (constant + mu) % self.p;
                continue;
            }
            let mut wires = Vec::new();
            for &(k, c) in &self.forms[f] {
                let vars = &self.monos[k];
                let src = if and_layer {
                    let ws = vars.iter().map(|&i| wire(Src::Input(i), 1)).collect();
                    Src::Gate(b.add(GateKind::And, base, ws))
                } else if vars.len() == 1 {
                    Src::Input(vars[0])
                } else {
                    return malformed("monomial of degree > 1 without an AND layer");
                };
                wires.push(wire(src, c));
            }
            let g = b.add(
                GateKind::Mod {
                    m: self.m,
                    accept: vec![r],
                },
                mod_layer,
                wires,
            );
            out.push((g, mu));
        }
        Ok((constant, out))
    }

    /// MOD_m gates of `poly` on layer 2 over input-level AND gates.
    pub fn emit_mod_gates(&self, b: &mut CcBuilder, poly: &ModPoly) -> Result<Vec<(usize, u64)>> {
        Ok(self.emit_mods(b, poly, true, 1, false)?.1)
    }

    pub fn fan_in(&self, poly: &ModPoly) -> usize {
        self.max_fan_in(poly)
    }

    /// MOD_p({1}) gate over the indicators of a 0/1-valued `poly`, on layer 3
    /// of an AND∘MOD(m)∘MOD(p) prefix.
    pub fn emit_indicator(&self, b: &mut CcBuilder, poly: &ModPoly) -> Result<usize> {
        let (_, mods) = self.emit_mods(b, poly, true, 1, false)?;
        let wires = mods
            .into_iter()
            .map(|(g, mu)| wire(Src::Gate(g), mu))
            .collect();
        Ok(b.add(
            GateKind::Mod {
                m: self.p,
                accept: vec![1],
            },
            3,
            wires,
        ))
    }

    pub fn emit(
        &self,
        poly: &ModPoly,
        inputs: usize,
        and_layer: bool,
        finish: Finish,
    ) -> Result<CCircuit> {
        let mut b = CcBuilder::new(inputs);
        let top = if and_layer { 3 } else { 2 };
        let prefix = if and_layer {
            format!("AND({})∘", self.max_fan_in(poly))
        } else {
            String::new()
        };
        match finish {
            Finish::ModP => {
                let (_, mods) = self.emit_mods(&mut b, poly, and_layer, 1, false)?;
                let wires = mods
                    .into_iter()
                    .map(|(g, mu)| wire(Src::Gate(g), mu))
                    .collect();
                let o = b.add(
                    GateKind::Mod {
                        m: self.p,
                        accept: vec![1],
                    },
                    top,
                    wires,
                );
                Ok(b.finish(o, &format!("{prefix}MOD({})∘MOD({})", self.m, self.p)))
            }
            Finish::Sump => {
                let (c, mods) = self.emit_mods(&mut b, poly, and_layer, 1, true)?;
                let coeffs = mods.iter().map(|&(_, mu)| vec![vec![mu]]).collect();
                let wires = mods
                    .into_iter()
                    .map(|(g, _)| wire(Src::Gate(g), 1))
                    .collect();
                let o = b.add(
                    GateKind::Sump {
                        p: self.p,
                        nu: 1,
                        coeffs,
                        offset: vec![c],
                    },
                    top,
                    wires,
                );
                Ok(b.finish(o, &format!("{prefix}MOD({})∘SUMP({},1)", self.m, self.p)))
            }
        }
    }

    /// Reads a MOD gate over inputs or input-level AND gates.
    pub fn ingest_mod(&mut self, c: &CCircuit, j: usize) -> Result<ModPoly> {
        let g = &c.gates[j];
        let GateKind::Mod { m, accept } = &g.kind else {
            return malformed(format!("gate {j} is not a MOD gate"));
        };
        let mut raw = Vec::new();
        for w in &g.inputs {
            let mono = match w.src {
                Src::Input(i) => self.mono(&[i]),
                Src::Gate(k) => {
                    let a = &c.gates[k];
                    if a.kind != GateKind::And {
                        return malformed(format!(
                            "gate {k} under MOD gate {j} is not an AND gate"
                        ));
                    }
                    let mut vars = Vec::new();
                    for x in &a.inputs {
                        match x.src {
                            Src::Input(i) => vars.push(i),
                            Src::Gate(_) => {
                                return malformed(format!("AND gate {k} does not read inputs"))
                            }
                        }
                    }
                    self.mono(&vars)
                }
            };
            raw.push((mono, w.mult));
        }
        self.indicator(*m, &raw, accept)
    }

    /// Reads a MOD_p gate over MOD_m gates as the polynomial `χ_T(Σ α_i y_i)`.
    pub fn ingest_modp(&mut self, c: &CCircuit, j: usize) -> Result<ModPoly> {
        let g = &c.gates[j];
        let GateKind::Mod { m, accept } = &g.kind else {
            return malformed(format!("gate {j} is not a MOD gate"));
        };
        if *m != self.p {
            return malformed(format!(
                "outer gate {j} is MOD({m}), expected MOD({})",
                self.p
            ));
        }
        let mut s = ModPoly::default();
        for w in &g.inputs {
            let Src::Gate(k) = w.src else {
                return malformed(format!("MOD({m}) gate {j} reads an input directly"));
            };
            let y = self.ingest_mod(c, k)?;
            s = self.add(&s, &self.scale(&y, w.mult));
        }
        self.chi(&s, accept)
    }

    /// `g(z_1, …, z_k)` for a boolean `g` given by its truth table
    /// (`index` bit `i` is argument `i`).
    pub fn apply_table(&mut self, g: &[bool], zs: &[ModPoly]) -> Result<ModPoly> {
        let k = zs.len();
        if g.len() != 1 << k {
            return Err(Error::Arity {
                expected: 1 << k,
                got: g.len(),
            });
        }
        let table: Vec<u64> = g.iter().map(|&x| u64::from(x)).collect();
        let gp = multilinear_interpolate(&table, k, self.p)?;
        let mut prods: HashMap<u64, ModPoly> = HashMap::new();
        prods.insert(0, self.constant(1));
        let mut out = ModPoly::default();
        for (&mask, &c) in &gp.terms {
            let prod = self.subset_product(mask, zs, &mut prods)?;
            out = self.add(&out, &self.scale(&prod, c));
        }
        Ok(out)
    }

    fn subset_product(
        &mut self,
        mask: u64,
        zs: &[ModPoly],
        memo: &mut HashMap<u64, ModPoly>,
    ) -> Result<ModPoly> {
        if let Some(v) = memo.get(&mask) {
            return Ok(v.clone());
        }
        let low = mask.trailing_zeros() as usize;
        let rest = self.subset_product(mask & (mask - 1), zs, memo)?;
        let v = self.mul(&rest, &zs[low])?;
        memo.insert(mask, v.clone());
        Ok(v)
    }

    pub fn product_all(&mut self, zs: &[&ModPoly]) -> Result<ModPoly> {
        let mut acc = self.constant(1);
        for z in zs {
            acc = self.mul(&acc, z)?;
        }
        Ok(acc)
    }

    /// `Π_r (1 − (t_r − c_r)^{p−1})`, the indicator of `t = c` in Z_p^ν.
    pub fn vector_test(&mut self, t: &[ModPoly], target: &[u64]) -> Result<ModPoly> {
        let mut acc = self.constant(1);
        for (tr, &cr) in t.iter().zip(target) {
            let eq = self.chi(tr, &[cr])?;
            acc = self.mul(&acc, &eq)?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Finish {
    ModP,
    Sump,
}

/// An affine map `(x_1, …, x_k) ↦ offset + Σ coeffs_i · x_i` over Z_p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineMap {
    pub p: u64,
    pub coeffs: Vec<Matrix>,
    pub offset: Vec<u64>,
}

impl AffineMap {
    pub fn apply(&self, xs: &[Vec<u64>]) -> Vec<u64> {
        let mut acc = self.offset.clone();
        for (c, x) in self.coeffs.iter().zip(xs) {
            for (i, row) in c.iter().enumerate() {
                let v = row.iter().zip(x).fold(0, |s, (a, b)| (s + a * b) % self.p);
                acc[i] = (acc[i] + v) % self.p;
            }
        }
        acc
    }

    /// `self ∘ (inner_1, …, inner_k)`, the inner maps sharing their inputs.
    pub fn compose(&self, inner: &[AffineMap]) -> Result<AffineMap> {
        if inner.len() != self.coeffs.len() {
            return Err(Error::Arity {
                expected: self.coeffs.len(),
                got: inner.len(),
            });
        }
        let p = self.p;
        let ins = inner.first().map_or(0, |f| f.coeffs.len());
        let mut offset = self.offset.clone();
        let mut coeffs: Vec<Option<Matrix>> = vec![None; ins];
        for (o, f) in self.coeffs.iter().zip(inner) {
            if f.coeffs.len() != ins || f.p != p {
                return malformed("inner maps do not share their inputs");
            }
            for (i, v) in crate::cc::mat_vec(o, &f.offset, p).into_iter().enumerate() {
                offset[i] = (offset[i] + v) % p;
            }
            for (j, fc) in f.coeffs.iter().enumerate() {
                let prod = mat_mul(o, fc, p);
                coeffs[j] = Some(match coeffs[j].take() {
                    None => prod,
                    Some(acc) => crate::cc::mat_add(&acc, &prod, p),
                });
            }
        }
        let nu = offset.len();
        Ok(AffineMap {
            p,
            coeffs: coeffs
                .into_iter()
                .map(|c| c.unwrap_or_else(|| vec![vec![0]; nu]))
                .collect(),
            offset,
        })
    }
}

/// Deterministic boolean reading of a circuit: MOD/AND/OR/SUMPC outputs as is,
/// SUMP(p,1) outputs through `[v = 1]` after checking `v ∈ {0, 1}`.
pub fn boolean_table(c: &CCircuit) -> Result<Vec<bool>> {
    (0..1usize << c.inputs)
        .map(|i| match c.eval(&word(i, c.inputs))? {
            Value::Bool(x) => Ok(x),
            Value::Vector(v) if v.len() == 1 && v[0] <= 1 => Ok(v[0] == 1),
            Value::Vector(v) => Err(Error::Verification(format!("non-boolean output {v:?}"))),
        })
        .collect()
}

fn has_and_base(c: &CCircuit) -> bool {
    c.gates.iter().any(|g| {
        g.kind == GateKind::And
            && g.inputs.iter().all(|w| matches!(w.src, Src::Input(_)))
            && g.layer == 1
    })
}

fn outer_mod(c: &CCircuit) -> Result<(u64, Vec<u64>)> {
    match &c.gates[c.output].kind {
        GateKind::Mod { m, accept } => Ok((*m, accept.clone())),
        _ => malformed("output gate is not a MOD gate"),
    }
}

/// Common modulus of the MOD gates feeding `j`.
fn inner_modulus(c: &CCircuit, j: usize) -> Result<u64> {
    let mut ms = BTreeSet::new();
    for w in &c.gates[j].inputs {
        match w.src {
            Src::Gate(k) => match &c.gates[k].kind {
                GateKind::Mod { m, .. } => {
                    ms.insert(*m);
                }
                _ => return malformed(format!("gate {k} under gate {j} is not a MOD gate")),
            },
            Src::Input(_) => return malformed(format!("gate {j} reads an input directly")),
        }
    }
    Ok(ms.into_iter().fold(1, |a, b| a / gcd(a, b) * b))
}

/// AND(n)∘SUMP(p,k) circuit for `f : {0,1}^n → Z_p^k` given as rows.
pub fn and_sum_lower(f: &[Vec<u64>], n: usize, p: u64) -> Result<CCircuit> {
    if n > 20 || f.len() != 1 << n {
        return malformed(format!("table of length {} for {n} inputs", f.len()));
    }
    let k = f[0].len();
    if f.iter().any(|r| r.len() != k) {
        return malformed("rows of unequal length");
    }
    let mut coords = Vec::new();
    for j in 0..k {
        let col: Vec<u64> = f.iter().map(|r| r[j]).collect();
        coords.push(multilinear_interpolate(&col, n, p)?);
    }
    let masks: BTreeSet<u64> = coords
        .iter()
        .flat_map(|c| c.terms.keys().copied())
        .filter(|&m| m != 0)
        .collect();
    let mut b = CcBuilder::new(n);
    let mut wires = Vec::new();
    let mut mats = Vec::new();
    for &mask in &masks {
        let ws = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| wire(Src::Input(i), 1))
            .collect();
        wires.push(wire(Src::Gate(b.add(GateKind::And, 1, ws)), 1));
        let diag: Vec<u64> = coords
            .iter()
            .map(|c| c.terms.get(&mask).copied().unwrap_or(0))
            .collect();
        mats.push(
            (0..k)
                .map(|i| (0..k).map(|j| if i == j { diag[i] } else { 0 }).collect())
                .collect(),
        );
    }
    let offset = coords
        .iter()
        .map(|c| c.terms.get(&0).copied().unwrap_or(0))
        .collect();
    let o = b.add(
        GateKind::Sump {
            p,
            nu: k,
            coeffs: mats,
            offset,
        },
        2,
        wires,
    );
    Ok(b.finish(o, &format!("AND({n})∘SUMP({p},{k})")))
}

/// MOD(m)∘AND(d) (optionally over an input AND layer) to MOD(m)∘SUMP(p,1).
pub fn modm_andd_to_sum(c: &CCircuit, p: u64) -> Result<CCircuit> {
    let out = &c.gates[c.output];
    if out.kind != GateKind::And {
        return malformed("output gate is not an AND gate");
    }
    let m = if out.inputs.is_empty() {
        1
    } else {
        inner_modulus(c, c.output)?
    };
    let mut arena = Arena::new(m, p)?;
    let d = out.inputs.len();
    let mut forms = Vec::new();
    for w in &out.inputs {
        let Src::Gate(j) = w.src else { unreachable!() };
        let g = &c.gates[j];
        let GateKind::Mod { m: mj, accept } = &g.kind else {
            unreachable!()
        };
        if *mj != m {
            return malformed(format!("MOD({mj}) and MOD({m}) gates under one AND"));
        }
        // the linear form read as y_j, membership of y_j in accept handled by the table
        let raw: Vec<(Option<usize>, u64)> = g
            .inputs
            .iter()
            .map(|w| {
                let mono = match w.src {
                    Src::Input(i) => arena.mono(&[i]),
                    Src::Gate(k) => {
                        let vars: Vec<usize> = c.gates[k]
                            .inputs
                            .iter()
                            .filter_map(|x| {
                                if let Src::Input(i) = x.src {
                                    Some(i)
                                } else {
                                    None
                                }
                            })
                            .collect();
                        arena.mono(&vars)
                    }
                };
                (mono, w.mult)
            })
            .collect();
        forms.push((raw, accept.clone()));
    }
    let poly = if d == 0 {
        arena.constant(1)
    } else {
        let pts = (m as usize).pow(d as u32);
        let mut y = vec![0u64; d];
        let mut table = vec![0u64; pts];
        for (idx, v) in table.iter_mut().enumerate() {
            crate::fieldpoly::decode(idx, m, &mut y);
            *v = u64::from(forms.iter().zip(&y).all(|((_, acc), yi)| acc.contains(yi)));
        }
        let nf = zpqe_normal_form(&table, m, p, d)?;
        let mut poly = ModPoly::default();
        for t in &nf.terms {
            // Σ β_i y_i + u ≡ 0 with y_i = L_i (constants inside L_i included)
            let mut raw = Vec::new();
            for ((ri, _), &bi) in forms.iter().zip(&t.beta) {
                raw.extend(ri.iter().map(|&(mono, c)| (mono, c % m * bi)));
            }
            let ind = arena.indicator(m, &raw, &[(m - t.u % m) % m])?;
            poly = arena.add(&poly, &arena.scale(&ind, t.mu));
        }
        poly
    };
    arena.emit(&poly, c.inputs, has_and_base(c), Finish::Sump)
}

/// MOD(m)∘MOD(p) to MOD(m)∘SUMP(p,1).
pub fn unmod(c: &CCircuit) -> Result<CCircuit> {
    let (p, _) = outer_mod(c)?;
    let m = inner_modulus(c, c.output)?;
    let mut arena = Arena::new(m, p)?;
    let poly = arena.ingest_modp(c, c.output)?;
    arena.emit(&poly, c.inputs, has_and_base(c), Finish::Sump)
}

/// `g(f_1, …, f_k)` for MOD(m)∘MOD(p) circuits `f_i` on common inputs.
pub fn apply_func(g: &[bool], fs: &[CCircuit]) -> Result<CCircuit> {
    if g.len() != 1 << fs.len() {
        return Err(Error::Arity {
            expected: 1 << fs.len(),
            got: g.len(),
        });
    }
    let Some(first) = fs.first() else {
        let arena = Arena::new(1, 2)?;
        let poly = if g[0] {
            arena.constant(1)
        } else {
            ModPoly::default()
        };
        return arena.emit(&poly, 0, false, Finish::ModP);
    };
    let inputs = first.inputs;
    let (p, _) = outer_mod(first)?;
    let mut m = 1;
    for f in fs {
        if f.inputs != inputs || outer_mod(f)?.0 != p {
            return malformed("apply_func circuits disagree on inputs or output modulus");
        }
        let mi = inner_modulus(f, f.output)?;
        m = m / gcd(m, mi) * mi;
    }
    let mut arena = Arena::new(m, p)?;
    let mut zs = Vec::new();
    for f in fs {
        zs.push(arena.ingest_modp(f, f.output)?);
    }
    let poly = arena.apply_table(g, &zs)?;
    arena.emit(&poly, inputs, fs.iter().any(has_and_base), Finish::ModP)
}

/// The parts of an AND∘MOD(m)∘MOD(p)∘AND∘SUMPC circuit.
struct FiveLayer {
    m: u64,
    p: u64,
    /// layer-3 gate ids
    zs: Vec<usize>,
    /// layer-4 gates as index lists into `zs`
    ands: Vec<Vec<usize>>,
    map: AffineMap,
    target: Vec<u64>,
}

fn parse_five(c: &CCircuit) -> Result<FiveLayer> {
    let out = &c.gates[c.output];
    let GateKind::Sumpc {
        p,
        nu,
        coeffs,
        offset,
        target,
    } = &out.kind
    else {
        return malformed("output gate is not a SUMPC gate");
    };
    let mut zpos: BTreeMap<usize, usize> = BTreeMap::new();
    let mut zs = Vec::new();
    let mut ands = Vec::new();
    let mut m = 1;
    for w in &out.inputs {
        let Src::Gate(a) = w.src else {
            return malformed("SUMPC reads an input directly");
        };
        if c.gates[a].kind != GateKind::And {
            return malformed(format!("gate {a} under SUMPC is not an AND gate"));
        }
        let mut idx = Vec::new();
        for x in &c.gates[a].inputs {
            let Src::Gate(z) = x.src else {
                return malformed("AND layer reads an input directly");
            };
            match &c.gates[z].kind {
                GateKind::Mod { m: pz, .. } if pz == p => {}
                _ => return malformed(format!("gate {z} is not a MOD({p}) gate")),
            }
            let mi = inner_modulus(c, z)?;
            m = m / gcd(m, mi) * mi;
            let next = zs.len();
            let i = *zpos.entry(z).or_insert(next);
            if i == next {
                zs.push(z);
            }
            idx.push(i);
        }
        ands.push(idx);
    }
    // SUMPC reads each boolean as the all-ones vector: compose with b ↦ b·1.
    let k = ands.len();
    let outer = AffineMap {
        p: *p,
        coeffs: coeffs
            .iter()
            .zip(&out.inputs)
            .map(|(mat, w)| {
                mat.iter()
                    .map(|r| r.iter().map(|x| x * (w.mult % p) % p).collect())
                    .collect()
            })
            .collect(),
        offset: offset.clone(),
    };
    let ones = |i: usize| AffineMap {
        p: *p,
        coeffs: (0..k).map(|j| vec![vec![u64::from(i == j)]; *nu]).collect(),
        offset: vec![0; *nu],
    };
    let inner: Vec<AffineMap> = (0..k).map(ones).collect();
    let map = if k == 0 {
        outer
    } else {
        outer.compose(&inner)?
    };
    Ok(FiveLayer {
        m,
        p: *p,
        zs,
        ands,
        map,
        target: target.clone(),
    })
}

/// AND∘MOD(m)∘MOD(p)∘AND∘SUMPC(p,ν,c) to AND∘MOD(m)∘MOD(p).
pub fn collapse_5to3(c: &CCircuit) -> Result<CCircuit> {
    let five = parse_five(c)?;
    let mut arena = Arena::new(five.m, five.p)?;
    let poly = collapse_in(&mut arena, c, &five, &HashMap::new())?;
    arena.emit(&poly, c.inputs, true, Finish::ModP)
}

/// Collapse into an existing arena; layer-3 gates listed in `known` are taken
/// in their already unmodded form.
pub fn collapse_with_known(
    arena: &mut Arena,
    c: &CCircuit,
    known: &HashMap<usize, ModPoly>,
) -> Result<ModPoly> {
    let five = parse_five(c)?;
    if five.p != arena.p || arena.m % five.m != 0 {
        return malformed(format!(
            "MOD({})∘MOD({}) does not fit the arena",
            five.m, five.p
        ));
    }
    collapse_in(arena, c, &five, known)
}

fn collapse_in(
    arena: &mut Arena,
    c: &CCircuit,
    five: &FiveLayer,
    known: &HashMap<usize, ModPoly>,
) -> Result<ModPoly> {
    let mut zs = Vec::new();
    for &z in &five.zs {
        zs.push(match known.get(&z) {
            Some(p) => p.clone(),
            None => arena.ingest_modp(c, z)?,
        });
    }
    let mut ands = Vec::new();
    for idx in &five.ands {
        let parts: Vec<&ModPoly> = idx.iter().map(|&i| &zs[i]).collect();
        ands.push(arena.product_all(&parts)?);
    }
    let nu = five.map.offset.len();
    let mut t = Vec::new();
    for r in 0..nu {
        let mut tr = arena.constant(five.map.offset[r]);
        for (a, col) in ands.iter().zip(&five.map.coeffs) {
            tr = arena.add(&tr, &arena.scale(a, col[r][0]));
        }
        t.push(tr);
    }
    arena.vector_test(&t, &five.target)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PassReport {
    pub pass: String,
    pub input_shape: String,
    pub output_shape: String,
    pub input_size: u64,
    pub output_size: u64,
    pub verified: bool,
    pub monomial_cap: usize,
}

impl PassReport {
    pub fn new(pass: &str, input: &CCircuit, output: &CCircuit, verified: bool) -> Self {
        PassReport {
            pass: pass.to_string(),
            input_shape: input.declared_shape.clone(),
            output_shape: output.declared_shape.clone(),
            input_size: input.size(),
            output_size: output.size(),
            verified,
            monomial_cap: DEFAULT_MONOMIAL_CAP,
        }
    }
}

pub const PASSES: &[&str] = &[
    "unmod",
    "modm_andd_to_sum",
    "collapse_5to3",
    "expand_multiplicities",
];

/// Runs a named pass; verifies exhaustively when the circuit has at most
/// `verify_n` inputs.
pub fn run_pass(
    name: &str,
    c: &CCircuit,
    p: Option<u64>,
    verify_n: usize,
) -> Result<(CCircuit, PassReport)> {
    c.validate()?;
    let out = match name {
        "unmod" => unmod(c)?,
        "modm_andd_to_sum" => {
            let p = p.ok_or_else(|| Error::Malformed("modm_andd_to_sum needs a prime p".into()))?;
            modm_andd_to_sum(c, p)?
        }
        "collapse_5to3" => collapse_5to3(c)?,
        "expand_multiplicities" => c.expand_multiplicities(),
        other => return malformed(format!("unknown pass `{other}`")),
    };
    let verified = verify_equal(c, &out, verify_n)?;
    let report = PassReport::new(name, c, &out, verified);
    Ok((out, report))
}

/// `Ok(true)` when checked and equal, `Ok(false)` when too large to check.
pub fn verify_equal(a: &CCircuit, b: &CCircuit, verify_n: usize) -> Result<bool> {
    if a.inputs > verify_n || a.inputs > 20 {
        return Ok(false);
    }
    let (ta, tb) = (boolean_table(a)?, boolean_table(b)?);
    if ta != tb {
        let i = ta.iter().zip(&tb).position(|(x, y)| x != y).unwrap_or(0);
        return Err(Error::Verification(format!(
            "tables differ at input {:?}",
            word(i, a.inputs)
        )));
    }
    Ok(true)
}
