//! Polynomial kernels over prime fields: multilinear interpolation on the
//! boolean cube, the Z_m -> Z_p normal form, the symmetric divisibility
//! polynomial and the pseudo-AND of a 3-CNF.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::arith::{self, inv_mod};
use crate::error::{malformed, refuse, Error, Result};

pub const ZPQE_BUDGET: usize = 1 << 20;

/// Multilinear polynomial over Z_p with monomials keyed by variable bitmask.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultilinearPoly {
    pub p: u64,
    pub n: usize,
    pub terms: BTreeMap<u64, u64>,
}

impl MultilinearPoly {
    pub fn zero(p: u64, n: usize) -> Self {
        MultilinearPoly {
            p,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(p: u64, n: usize, c: u64) -> Self {
        let mut z = Self::zero(p, n);
        z.add_term(0, c);
        z
    }

    pub fn var(p: u64, n: usize, i: usize) -> Self {
        let mut z = Self::zero(p, n);
        z.add_term(1 << i, 1);
        z
    }

    pub fn add_term(&mut self, mask: u64, c: u64) {
        let c = c % self.p;
        if c == 0 {
            return;
        }
        let e = self.terms.entry(mask).or_insert(0);
        *e = (*e + c) % self.p;
        if *e == 0 {
            self.terms.remove(&mask);
        }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut r = self.clone();
        for (&m, &c) in &other.terms {
            r.add_term(m, c);
        }
        r
    }

    pub fn scale(&self, c: u64) -> Self {
        let mut r = Self::zero(self.p, self.n);
        for (&m, &d) in &self.terms {
            r.add_term(m, d * (c % self.p));
        }
        r
    }

    /// Product with x^2 = x.
    pub fn mul(&self, other: &Self) -> Self {
        let mut r = Self::zero(self.p, self.n.max(other.n));
        for (&m1, &c1) in &self.terms {
            for (&m2, &c2) in &other.terms {
                r.add_term(m1 | m2, c1 * c2);
            }
        }
        r
    }

    /// Evaluate at the point whose set coordinates are given by `mask`.
    pub fn eval_mask(&self, mask: u64) -> u64 {
        self.terms
            .iter()
            .filter(|(&m, _)| m & !mask == 0)
            .fold(0, |acc, (_, &c)| (acc + c) % self.p)
    }

    pub fn eval(&self, b: &[bool]) -> Result<u64> {
        if b.len() != self.n {
            return Err(Error::Arity {
                expected: self.n,
                got: b.len(),
            });
        }
        let mask = b
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &x)| if x { m | (1 << i) } else { m });
        Ok(self.eval_mask(mask))
    }

    /// Monomials as sorted index lists with coefficients, by degree then lexicographically.
    pub fn monomials(&self) -> Vec<(Vec<usize>, u64)> {
        let mut v: Vec<(Vec<usize>, u64)> = self
            .terms
            .iter()
            .map(|(&m, &c)| ((0..64).filter(|i| m >> i & 1 == 1).collect(), c))
            .collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

impl fmt::Display for MultilinearPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mons = self.monomials();
        if mons.is_empty() {
            return write!(f, "0");
        }
        for (k, (vars, c)) in mons.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if vars.is_empty() {
                write!(f, "{c}")?;
            } else {
                if *c != 1 {
                    write!(f, "{c}*")?;
                }
                let names: Vec<String> = vars.iter().map(|i| format!("x{}", i + 1)).collect();
                write!(f, "{}", names.join("*"))?;
            }
        }
        write!(f, " (mod {})", self.p)
    }
}

/// Subset-Moebius transform: c_T = sum_{U subset T} (-1)^{|T-U|} f(1_U).
pub fn multilinear_interpolate(f: &[u64], n: usize, p: u64) -> Result<MultilinearPoly> {
    if n > 24 || f.len() != 1 << n {
        return malformed(format!("table length {} does not match 2^{n}", f.len()));
    }
    let mut c: Vec<u64> = f.iter().map(|&v| v % p).collect();
    for i in 0..n {
        let bit = 1usize << i;
        for mask in 0..c.len() {
            if mask & bit != 0 {
                c[mask] = (c[mask] + p - c[mask ^ bit]) % p;
            }
        }
    }
    let mut poly = MultilinearPoly::zero(p, n);
    for (mask, v) in c.into_iter().enumerate() {
        poly.add_term(mask as u64, v);
    }
    Ok(poly)
}

/// One summand mu * b(beta . x + u) of the Z_m -> Z_p normal form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ZpqeTerm {
    pub beta: Vec<u64>,
    pub u: u64,
    pub mu: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ZpqeForm {
    pub m: u64,
    pub p: u64,
    pub s: usize,
    pub terms: Vec<ZpqeTerm>,
}

impl ZpqeForm {
    pub fn eval(&self, x: &[u64]) -> Result<u64> {
        if x.len() != self.s {
            return Err(Error::Arity {
                expected: self.s,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[u64]) -> u64 {
        let mut acc = 0;
        for t in &self.terms {
            let arg = t
                .beta
                .iter()
                .zip(x)
                .fold(t.u, |a, (b, xi)| (a + b * xi) % self.m);
            if arg == 0 {
                acc = (acc + t.mu) % self.p;
            }
        }
        acc
    }
}

pub fn eval_zpqe(f: &ZpqeForm, x: &[u64]) -> Result<u64> {
    f.eval(x)
}

pub fn eval_poly(p: &MultilinearPoly, b: &[bool]) -> Result<u64> {
    p.eval(b)
}

type Terms = HashMap<(Vec<u64>, u64), u64>;

fn push(acc: &mut Terms, beta: Vec<u64>, u: u64, mu: u64, p: u64) {
    if mu % p == 0 {
        return;
    }
    let e = acc.entry((beta, u)).or_insert(0);
    *e = (*e + mu) % p;
}

/// b_k^q : Z_q^k -> Z_p by the recursion, as terms over Z_q.
pub fn bkq(q: u64, k: usize, p: u64) -> Vec<ZpqeTerm> {
    assert!(k >= 1);
    let mut cur: Terms = HashMap::new();
    let mut beta = vec![0; k];
    beta[0] = 1;
    cur.insert((beta, 0), 1);
    let qinv = inv_mod(q % p, p).expect("p does not divide q");
    for j in 2..=k {
        // cur represents b_{j-1}(x_1..x_{j-1}); build b_j.
        let (a, last) = (j - 2, j - 1);
        let mut next: Terms = HashMap::new();
        for ((beta, u), mu) in &cur {
            // first sum: x_a -> x_a + i x_last, i = 0..q-1
            for i in 0..q {
                let mut b = beta.clone();
                b[last] = (b[last] + i * b[a]) % q;
                push(&mut next, b, *u, mu * qinv, p);
            }
            // second sum: x_a -> x_last + i, i = 1..q-1, subtracted
            for i in 1..q {
                let mut b = beta.clone();
                let ca = b[a];
                b[a] = 0;
                b[last] = (b[last] + ca) % q;
                let nu = (u + i * ca) % q;
                push(&mut next, b, nu, (p - mu % p) * qinv, p);
            }
        }
        next.retain(|_, v| *v != 0);
        cur = next;
    }
    sorted_terms(cur)
}

fn sorted_terms(t: Terms) -> Vec<ZpqeTerm> {
    let mut v: Vec<ZpqeTerm> = t
        .into_iter()
        .filter(|(_, mu)| *mu != 0)
        .map(|((beta, u), mu)| ZpqeTerm { beta, u, mu })
        .collect();
    v.sort_by(|a, b| a.beta.cmp(&b.beta).then(a.u.cmp(&b.u)));
    v
}

/// b_s : Z_m^s -> Z_p, the indicator of the origin, in normal form over Z_m.
pub fn bs(m: u64, s: usize, p: u64) -> Result<Vec<ZpqeTerm>> {
    check_moduli(m, p)?;
    let mut acc: Terms = HashMap::new();
    acc.insert((vec![0; s], 0), 1);
    if s == 0 {
        return Ok(sorted_terms(acc));
    }
    for q in arith::prime_divisors(m) {
        let emb = m / q;
        let factor = bkq(q, s, p);
        let mut next: Terms = HashMap::new();
        for ((beta, u), mu) in &acc {
            for t in &factor {
                // b over Z_q embeds as b((m/q) * form) over Z_m; products over
                // distinct primes collapse into b of the sum.
                let b: Vec<u64> = beta
                    .iter()
                    .zip(&t.beta)
                    .map(|(x, y)| (x + emb * y) % m)
                    .collect();
                let nu = (u + emb * t.u) % m;
                push(&mut next, b, nu, mu * t.mu, p);
                if next.len() > ZPQE_BUDGET {
                    return Err(Error::Budget("normal form term count".into()));
                }
            }
        }
        acc = next;
    }
    Ok(sorted_terms(acc))
}

fn check_moduli(m: u64, p: u64) -> Result<()> {
    if !arith::is_prime(p) {
        return malformed(format!("{p} is not prime"));
    }
    if m == 0 || !arith::is_square_free(m) {
        return malformed(format!("{m} is not square-free"));
    }
    if m % p == 0 {
        return malformed(format!("{p} divides {m}"));
    }
    Ok(())
}

/// Normal form of f : Z_m^s -> Z_p given as a row-major table
/// (index = sum x_i m^(s-1-i)), via f(x) = sum_a f(a) b_s(x - a).
pub fn zpqe_normal_form(f: &[u64], m: u64, p: u64, s: usize) -> Result<ZpqeForm> {
    check_moduli(m, p)?;
    let pts = (m as usize)
        .checked_pow(s as u32)
        .filter(|&x| x <= ZPQE_BUDGET)
        .ok_or_else(|| Error::Budget(format!("{m}^{s} points")))?;
    if f.len() != pts {
        return malformed(format!("table length {} does not match {m}^{s}", f.len()));
    }
    let base = bs(m, s, p)?;
    let mut acc: Terms = HashMap::new();
    let mut a = vec![0u64; s];
    for (idx, &fa) in f.iter().enumerate() {
        decode(idx, m, &mut a);
        if fa % p == 0 {
            continue;
        }
        for t in &base {
            // b(beta.(x - a) + u) = b(beta.x + (u - beta.a))
            let shift = t.beta.iter().zip(&a).fold(0, |s, (b, ai)| (s + b * ai) % m);
            let nu = (t.u + m - shift) % m;
            push(&mut acc, t.beta.clone(), nu, fa * t.mu, p);
        }
        if acc.len() > ZPQE_BUDGET {
            return Err(Error::Budget("normal form term count".into()));
        }
    }
    let form = ZpqeForm {
        m,
        p,
        s,
        terms: sorted_terms(acc),
    };
    for (idx, &fa) in f.iter().enumerate() {
        decode(idx, m, &mut a);
        if form.eval_unchecked(&a) != fa % p {
            return Err(Error::Verification(format!("normal form differs at {a:?}")));
        }
    }
    Ok(form)
}

pub(crate) fn decode(mut idx: usize, m: u64, out: &mut [u64]) {
    for i in (0..out.len()).rev() {
        out[i] = idx as u64 % m;
        idx /= m as usize;
    }
}

fn binom_mod(n: usize, k: usize, p: u64) -> u64 {
    if k > n {
        return 0;
    }
    // Lucas
    let (mut n, mut k) = (n as u64, k as u64);
    let mut r = 1u64;
    while n > 0 || k > 0 {
        let (ni, ki) = (n % p, k % p);
        if ki > ni {
            return 0;
        }
        let mut c = 1u64;
        for j in 0..ki {
            c = c * ((ni - j) % p) % p;
            c = c * inv_mod((j + 1) % p, p).unwrap() % p;
        }
        r = r * c % p;
        n /= p;
        k /= p;
    }
    r
}

/// Symmetric coefficients a_t (t = 0..l) of the divisibility polynomial,
/// staged by support size.
pub fn divisibility_coefficients(l: usize, p: u64, nu: u32) -> Result<Vec<u64>> {
    let pn = p.pow(nu) as usize;
    let target = |ones: usize| u64::from((l - ones) % pn != 0);
    let mut a = vec![0u64; l + 1];
    for t in 0..=l {
        let mut v = target(t) % p;
        for (s, &as_) in a.iter().enumerate().take(t) {
            v = (v + p * p - binom_mod(t, s, p) * as_ % p) % p;
        }
        a[t] = v;
        if t >= pn && v != 0 {
            return Err(Error::Verification(format!(
                "degree bound {} violated at {t}",
                pn - 1
            )));
        }
    }
    Ok(a)
}

/// w(c) = 0 iff the number of zeros of c is divisible by p^nu, else 1.
pub fn divisibility_poly(l: usize, p: u64, nu: u32) -> Result<MultilinearPoly> {
    if !arith::is_prime(p) || nu == 0 {
        return malformed("need a prime p and nu >= 1");
    }
    if l > 63 {
        return Err(Error::Budget(format!("{l} variables")));
    }
    let a = divisibility_coefficients(l, p, nu)?;
    let mut poly = MultilinearPoly::zero(p, l);
    for_each_subset_upto(l, a.len() - 1, |mask, size| poly.add_term(mask, a[size]));
    Ok(poly)
}

fn for_each_subset_upto(n: usize, max: usize, mut f: impl FnMut(u64, usize)) {
    fn rec(
        n: usize,
        max: usize,
        start: usize,
        mask: u64,
        size: usize,
        f: &mut dyn FnMut(u64, usize),
    ) {
        f(mask, size);
        if size == max {
            return;
        }
        for i in start..n {
            rec(n, max, i + 1, mask | (1 << i), size + 1, f);
        }
    }
    rec(n, max, 0, 0, 0, &mut f);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Lit {
    pub var: usize,
    pub neg: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Self {
        Lit { var, neg: false }
    }

    pub fn neg(var: usize) -> Self {
        Lit { var, neg: true }
    }

    pub fn eval(&self, b: &[bool]) -> bool {
        b[self.var] != self.neg
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cnf {
    pub n: usize,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(n: usize, clauses: Vec<Vec<Lit>>) -> Result<Self> {
        if clauses.iter().flatten().any(|l| l.var >= n) {
            return malformed("literal index out of range");
        }
        Ok(Cnf { n, clauses })
    }

    pub fn eval(&self, b: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(b)))
    }

    pub fn unsat_count(&self, b: &[bool]) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.iter().any(|l| l.eval(b)))
            .count()
    }

    /// Pad every clause to exactly three literals by repetition; wider
    /// clauses are refused.
    pub fn padded3(&self) -> Result<Cnf> {
        let mut out = Vec::with_capacity(self.clauses.len());
        for c in &self.clauses {
            if c.is_empty() || c.len() > 3 {
                return refuse(format!("clause of width {} is not 3-CNF", c.len()));
            }
            let mut c3 = c.clone();
            while c3.len() < 3 {
                c3.push(c[c.len() - 1]);
            }
            out.push(c3);
        }
        Ok(Cnf {
            n: self.n,
            clauses: out,
        })
    }

    pub fn parse_dimacs(text: &str) -> Result<Cnf> {
        let mut n = None;
        let mut clauses = Vec::new();
        let mut cur = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() < 4 || parts[1] != "cnf" {
                    return malformed("bad DIMACS header");
                }
                n = Some(
                    parts[2]
                        .parse()
                        .map_err(|_| Error::Malformed("bad variable count".into()))?,
                );
                continue;
            }
            for tok in line.split_whitespace() {
                let v: i64 = tok
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad literal `{tok}`")))?;
                if v == 0 {
                    clauses.push(std::mem::take(&mut cur));
                } else {
                    cur.push(Lit {
                        var: v.unsigned_abs() as usize - 1,
                        neg: v < 0,
                    });
                }
            }
        }
        if !cur.is_empty() {
            clauses.push(cur);
        }
        let n = n.ok_or_else(|| Error::Malformed("missing DIMACS header".into()))?;
        Cnf::new(n, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let v = l.var as i64 + 1;
                s.push_str(&format!("{} ", if l.neg { -v } else { v }));
            }
            s.push_str("0\n");
        }
        s
    }
}

/// Clause polynomial 1 - l1^ l2^ l3^ with x^ = 1 - x for a positive literal
/// and x^ = x for a negated one: 1 iff the clause is satisfied.
pub fn clause_poly(c: &[Lit], n: usize, p: u64) -> MultilinearPoly {
    let one = MultilinearPoly::constant(p, n, 1);
    let prod = c.iter().fold(one.clone(), |acc, l| {
        let x = MultilinearPoly::var(p, n, l.var);
        let hat = if l.neg { x } else { one.add(&x.scale(p - 1)) };
        acc.mul(&hat)
    });
    one.add(&prod.scale(p - 1))
}

/// w(b) = 0 iff the number of clauses of phi unsatisfied by b is divisible
/// by p^nu, else 1.
pub fn pseudo_and(phi: &Cnf, p: u64, nu: u32) -> Result<MultilinearPoly> {
    let phi = phi.padded3()?;
    let l = phi.clauses.len();
    if phi.n > 63 {
        return Err(Error::Budget(format!("{} variables", phi.n)));
    }
    let a = divisibility_coefficients(l, p, nu)?;
    let clauses: Vec<MultilinearPoly> = phi
        .clauses
        .iter()
        .map(|c| clause_poly(c, phi.n, p))
        .collect();
    let mut w = MultilinearPoly::zero(p, phi.n);
    let mut budget_hit = false;
    // a_t times the elementary symmetric polynomial of degree t in the clause polys
    let max_t = a.iter().rposition(|&x| x != 0).unwrap_or(0);
    let mut e: Vec<MultilinearPoly> = vec![MultilinearPoly::constant(p, phi.n, 1)];
    e.extend((1..=max_t).map(|_| MultilinearPoly::zero(p, phi.n)));
    for c in &clauses {
        for t in (1..=max_t).rev() {
            let add = e[t - 1].mul(c);
            e[t] = e[t].add(&add);
            if e[t].terms.len() > ZPQE_BUDGET {
                budget_hit = true;
            }
        }
    }
    if budget_hit {
        return Err(Error::Budget("pseudo-AND monomial count".into()));
    }
    for (t, et) in e.iter().enumerate() {
        w = w.add(&et.scale(a[t]));
    }
    let bound = 3 * (p.pow(nu) as usize - 1);
    if w.degree() > bound {
        return Err(Error::Verification(format!(
            "degree {} exceeds {bound}",
            w.degree()
        )));
    }
    Ok(w)
}

/// nu with p^(nu-1) <= sqrt(l) < p^nu.
pub fn crt_exponent(p: u64, l: usize) -> u32 {
    let mut nu = 1;
    // p^(2nu) > l  <=>  sqrt(l) < p^nu
    while p.pow(2 * nu) <= l as u64 {
        nu += 1;
    }
    nu
}

/// Satisfaction test through two pseudo-AND polynomials with coprime moduli.
pub fn two_prime_sat_test(phi: &Cnf, p1: u64, p2: u64) -> Result<Vec<bool>> {
    let l = phi.clauses.len();
    let w1 = pseudo_and(phi, p1, crt_exponent(p1, l))?;
    let w2 = pseudo_and(phi, p2, crt_exponent(p2, l))?;
    Ok((0..1u64 << phi.n)
        .map(|mask| w1.eval_mask(mask) == 0 && w2.eval_mask(mask) == 0)
        .collect())
}
