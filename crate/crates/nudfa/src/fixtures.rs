//! Built-in algebras.

use crate::algebra::{find_malcev_polynomial, FiniteAlgebra, Operation, DEFAULT_MALCEV_DEPTH};
use crate::circuit::AlgCircuit;
use crate::congruence::{all_congruences, Congruence, CongruenceLattice};
use crate::error::{Error, Result};

pub const NAMES: &[&str] = &["Z2", "Z3", "Z4", "Z6", "Z6mod2", "LAT2", "S3"];

pub fn cyclic(n: usize) -> FiniteAlgebra {
    FiniteAlgebra::new(
        &format!("Z{n}"),
        n,
        vec![Operation::from_fn("+", 2, n, |a| (a[0] + a[1]) % n)],
    )
    .expect("valid table")
}

pub fn z2() -> FiniteAlgebra {
    cyclic(2)
}

pub fn z3() -> FiniteAlgebra {
    cyclic(3)
}

pub fn z4() -> FiniteAlgebra {
    cyclic(4)
}

pub fn z6() -> FiniteAlgebra {
    cyclic(6)
}

/// The group Z6 with the unary parity operation.
pub fn z6mod2() -> FiniteAlgebra {
    FiniteAlgebra::new(
        "Z6mod2",
        6,
        vec![
            Operation::from_fn("+", 2, 6, |a| (a[0] + a[1]) % 6),
            Operation::from_fn("%2", 1, 6, |a| a[0] % 2),
        ],
    )
    .expect("valid table")
}

/// The two-element lattice.
pub fn lat2() -> FiniteAlgebra {
    FiniteAlgebra::new(
        "LAT2",
        2,
        vec![
            Operation::from_fn("and", 2, 2, |a| a[0] & a[1]),
            Operation::from_fn("or", 2, 2, |a| a[0] | a[1]),
        ],
    )
    .expect("valid table")
}

/// Permutations of {0,1,2} in lexicographic order; element 0 is the identity.
pub fn s3_perms() -> Vec<[usize; 3]> {
    vec![
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ]
}

/// S3 as a group algebra with product (first apply the right factor) and inverse.
pub fn s3() -> FiniteAlgebra {
    let perms = s3_perms();
    let idx = |p: [usize; 3]| perms.iter().position(|&q| q == p).unwrap();
    let mul = Operation::from_fn("*", 2, 6, |a| {
        let (f, g) = (perms[a[0]], perms[a[1]]);
        idx([f[g[0]], f[g[1]], f[g[2]]])
    });
    let inv = Operation::from_fn("inv", 1, 6, |a| {
        let f = perms[a[0]];
        let mut g = [0; 3];
        for i in 0..3 {
            g[f[i]] = i;
        }
        idx(g)
    });
    FiniteAlgebra::new("S3", 6, vec![mul, inv]).expect("valid table")
}

pub fn by_name(name: &str) -> Result<FiniteAlgebra> {
    match name {
        "Z2" => Ok(z2()),
        "Z3" => Ok(z3()),
        "Z4" => Ok(z4()),
        "Z6" => Ok(z6()),
        "Z6mod2" | "Z6%2" => Ok(z6mod2()),
        "LAT2" => Ok(lat2()),
        "S3" => Ok(s3()),
        _ => Err(Error::Malformed(format!("unknown fixture `{name}`"))),
    }
}

/// A registry entry: the algebra, its congruence lattice and a Malcev
/// circuit when one exists within the default depth.
pub struct Fixture {
    pub algebra: FiniteAlgebra,
    pub lattice: CongruenceLattice,
    pub malcev: Option<AlgCircuit>,
}

pub fn load(name: &str) -> Result<Fixture> {
    let algebra = by_name(name)?;
    let lattice = all_congruences(&algebra)?;
    let malcev = if name == "LAT2" {
        None
    } else {
        find_malcev_polynomial(&algebra, DEFAULT_MALCEV_DEPTH)
    };
    Ok(Fixture {
        algebra,
        lattice,
        malcev,
    })
}

/// Every compatible partition, found by walking all set partitions of the
/// universe (restricted growth strings). Independent of the lattice engine.
pub fn brute_force_congruences(alg: &FiniteAlgebra) -> Vec<Congruence> {
    fn go(alg: &FiniteAlgebra, labels: &mut Vec<usize>, used: usize, out: &mut Vec<Congruence>) {
        if labels.len() == alg.size {
            let c = Congruence::from_labels(labels);
            if c.is_compatible(alg) {
                out.push(c);
            }
            return;
        }
        for l in 0..=used {
            labels.push(l);
            go(alg, labels, used.max(l + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    go(alg, &mut Vec::with_capacity(alg.size), 0, &mut out);
    out.sort();
    out
}

/// The stored lattice agrees with brute-force enumeration.
pub fn self_test(f: &Fixture) -> bool {
    let mut mine = f.lattice.elements.clone();
    mine.sort();
    mine == brute_force_congruences(&f.algebra)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_load() {
        for n in NAMES {
            let f = load(n).unwrap();
            assert_eq!(f.lattice.elements.len() >= 2, f.algebra.size > 1);
            assert_eq!(f.malcev.is_some(), *n != "LAT2", "{n}");
        }
    }

    #[test]
    fn registry_self_test() {
        for n in NAMES {
            assert!(self_test(&load(n).unwrap()), "{n}");
        }
        assert_eq!(brute_force_congruences(&z6()).len(), 4);
    }

    #[test]
    fn s3_is_a_group() {
        let s = s3();
        for a in 0..6 {
            assert_eq!(s.eval_op("*", &[a, 0]).unwrap(), a);
            let i = s.eval_op("inv", &[a]).unwrap();
            assert_eq!(s.eval_op("*", &[a, i]).unwrap(), 0);
        }
    }
}
