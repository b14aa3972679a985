//! Programs over algebras: a circuit, per-variable instructions and an
//! accepting set. Truth tables index inputs with b[0] as the least
//! significant bit.

use serde::{Deserialize, Serialize};

use crate::algebra::{quotient_algebra, Decomposition, FiniteAlgebra};
use crate::circuit::{AlgCircuit, CircuitRepr};
use crate::congruence::Congruence;
use crate::error::{malformed, refuse, Error, Result};

pub const DEFAULT_TABLE_BOUND: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub var: usize,
    pub bit: usize,
    pub a0: usize,
    pub a1: usize,
}

impl Instruction {
    #[inline]
    pub fn value(&self, b: bool) -> usize {
        if b {
            self.a1
        } else {
            self.a0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgProgram {
    pub circuit: AlgCircuit,
    pub n: usize,
    /// Indexed by circuit variable.
    pub instructions: Vec<Instruction>,
    /// Sorted, deduplicated.
    pub accepting: Vec<usize>,
}

pub fn word(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

impl AlgProgram {
    pub fn new(
        circuit: AlgCircuit,
        n: usize,
        mut instructions: Vec<Instruction>,
        mut accepting: Vec<usize>,
    ) -> Result<Self> {
        instructions.sort_by_key(|i| i.var);
        accepting.sort_unstable();
        accepting.dedup();
        let p = AlgProgram {
            circuit,
            n,
            instructions,
            accepting,
        };
        if p.instructions.len() != p.circuit.k
            || p.instructions
                .iter()
                .enumerate()
                .any(|(i, ins)| ins.var != i)
        {
            return malformed("need exactly one instruction per circuit variable");
        }
        if let Some(ins) = p.instructions.iter().find(|i| i.bit >= n) {
            return malformed(format!("instruction reads bit {} but n = {n}", ins.bit));
        }
        Ok(p)
    }

    pub fn validate(&self, alg: &FiniteAlgebra) -> Result<()> {
        self.circuit.validate(alg)?;
        for ins in &self.instructions {
            if ins.a0 >= alg.size || ins.a1 >= alg.size {
                return Err(Error::OutOfRange(ins.a0.max(ins.a1)));
            }
        }
        if let Some(&s) = self.accepting.iter().find(|&&s| s >= alg.size) {
            return Err(Error::OutOfRange(s));
        }
        Ok(())
    }

    /// size = gates + instructions
    pub fn size(&self) -> usize {
        self.circuit.size() + self.instructions.len()
    }

    pub fn var_values(&self, b: &[bool]) -> Vec<usize> {
        self.instructions
            .iter()
            .map(|ins| ins.value(b[ins.bit]))
            .collect()
    }

    /// Values of every circuit node on input word `b`.
    pub fn node_values(&self, alg: &FiniteAlgebra, b: &[bool]) -> Vec<usize> {
        self.circuit.eval_all(alg, &self.var_values(b))
    }

    pub fn eval(&self, alg: &FiniteAlgebra, b: &[bool]) -> Result<(usize, bool)> {
        if b.len() != self.n {
            return Err(Error::Arity {
                expected: self.n,
                got: b.len(),
            });
        }
        let inner = self.node_values(alg, b)[self.circuit.output];
        Ok((inner, self.accepting.binary_search(&inner).is_ok()))
    }

    pub fn inner_table(&self, alg: &FiniteAlgebra) -> Result<Vec<usize>> {
        if self.n > DEFAULT_TABLE_BOUND {
            return Err(Error::Budget(format!(
                "n = {} exceeds truth-table bound",
                self.n
            )));
        }
        Ok((0..1usize << self.n)
            .map(|i| self.node_values(alg, &word(i, self.n))[self.circuit.output])
            .collect())
    }

    pub fn truth_table(&self, alg: &FiniteAlgebra) -> Result<Vec<bool>> {
        Ok(self
            .inner_table(alg)?
            .into_iter()
            .map(|v| self.accepting.binary_search(&v).is_ok())
            .collect())
    }

    pub fn with_accepting(&self, accepting: Vec<usize>) -> AlgProgram {
        let mut p = self.clone();
        p.accepting = accepting;
        p.accepting.sort_unstable();
        p.accepting.dedup();
        p
    }

    /// Same circuit shape read over `A/theta`.
    pub fn quotient(
        &self,
        alg: &FiniteAlgebra,
        theta: &Congruence,
    ) -> Result<(FiniteAlgebra, AlgProgram)> {
        let (q, proj) = quotient_algebra(alg, theta)?;
        let mut circuit = AlgCircuit::new(self.circuit.k);
        let vars: Vec<usize> = (0..circuit.k).map(|i| circuit.var(i)).collect();
        let relabel = relabel_constants(&self.circuit, &proj);
        let out = relabel.embed(&mut circuit, &vars);
        let circuit = circuit.with_output(out);
        let instructions = self
            .instructions
            .iter()
            .map(|i| Instruction {
                var: i.var,
                bit: i.bit,
                a0: proj[i.a0],
                a1: proj[i.a1],
            })
            .collect();
        let accepting = self.accepting.iter().map(|&s| proj[s]).collect();
        Ok((
            q,
            AlgProgram::new(circuit, self.n, instructions, accepting)?,
        ))
    }

    pub fn to_file(&self, alg: &FiniteAlgebra) -> ProgramFile {
        ProgramFile {
            algebra: alg.name.clone(),
            circuit: self.circuit.to_repr(alg),
            n: self.n,
            instructions: self.instructions.clone(),
            accepting: self.accepting.clone(),
        }
    }
}

pub(crate) fn relabel_constants(c: &AlgCircuit, proj: &[usize]) -> AlgCircuit {
    use crate::circuit::Node;
    let mut out = AlgCircuit::new(c.k);
    let mut map = Vec::with_capacity(c.nodes.len());
    for node in &c.nodes {
        map.push(match node {
            Node::Var(v) => out.var(*v),
            Node::Const(x) => out.constant(proj[*x]),
            Node::Gate { op, args } => out.gate(*op, args.iter().map(|&a| map[a]).collect()),
        });
    }
    out.with_output(map[c.output])
}

pub fn quotient_program(
    alg: &FiniteAlgebra,
    p: &AlgProgram,
    theta: &Congruence,
) -> Result<(FiniteAlgebra, AlgProgram)> {
    p.quotient(alg, theta)
}

/// One program per factor of the decomposition; `p` accepts iff all do.
pub fn decompose_program(
    alg: &FiniteAlgebra,
    p: &AlgProgram,
    d: &Decomposition,
) -> Result<Vec<(FiniteAlgebra, AlgProgram)>> {
    if p.accepting.len() != 1 {
        return refuse("decomposition needs a singleton accepting set");
    }
    if !d.is_valid(alg.size) {
        return refuse("invalid decomposition");
    }
    d.factors.iter().map(|eta| p.quotient(alg, eta)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramFile {
    pub algebra: String,
    pub circuit: CircuitRepr,
    pub n: usize,
    pub instructions: Vec<Instruction>,
    pub accepting: Vec<usize>,
}

impl ProgramFile {
    pub fn to_program(&self, alg: &FiniteAlgebra) -> Result<AlgProgram> {
        let c = AlgCircuit::from_repr(&self.circuit, alg)?;
        let p = AlgProgram::new(c, self.n, self.instructions.clone(), self.accepting.clone())?;
        p.validate(alg)?;
        Ok(p)
    }
}

/// Convenience builder: `x_i` reads bit i with instruction (b_i, a0, a1).
pub fn sum_program(
    alg: &FiniteAlgebra,
    op: &str,
    n: usize,
    a0: usize,
    a1: usize,
    accepting: Vec<usize>,
) -> Result<AlgProgram> {
    let oi = alg.op_index(op)?;
    let mut c = AlgCircuit::new(n);
    let mut acc = c.var(0);
    for i in 1..n {
        let v = c.var(i);
        acc = c.gate(oi, vec![acc, v]);
    }
    let c = c.with_output(acc);
    let ins = (0..n)
        .map(|i| Instruction {
            var: i,
            bit: i,
            a0,
            a1,
        })
        .collect();
    AlgProgram::new(c, n, ins, accepting)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::prime_power_decomposition;
    use crate::congruence::all_congruences;
    use crate::fixtures;

    #[test]
    fn eval_examples() {
        let z6 = fixtures::z6();
        let p = sum_program(&z6, "+", 2, 0, 1, vec![2]).unwrap();
        assert_eq!(p.eval(&z6, &[true, true]).unwrap(), (2, true));
        assert_eq!(p.eval(&z6, &[true, false]).unwrap(), (1, false));
        assert_eq!(p.truth_table(&z6).unwrap(), vec![false, false, false, true]);
        assert_eq!(p.size(), 3);
        let all = p.with_accepting((0..6).collect());
        assert!(all.truth_table(&z6).unwrap().iter().all(|&x| x));
    }

    #[test]
    fn quotient_commutes() {
        let a = fixtures::z6mod2();
        let mut c = AlgCircuit::new(3);
        let (x, y, z) = (c.var(0), c.var(1), c.var(2));
        let px = c.gate(1, vec![x]);
        let s = c.gate(0, vec![px, y]);
        let o = c.gate(0, vec![s, z]);
        let c = c.with_output(o);
        let ins = vec![
            Instruction {
                var: 0,
                bit: 0,
                a0: 3,
                a1: 4,
            },
            Instruction {
                var: 1,
                bit: 1,
                a0: 1,
                a1: 2,
            },
            Instruction {
                var: 2,
                bit: 0,
                a0: 5,
                a1: 0,
            },
        ];
        let p = AlgProgram::new(c, 2, ins, vec![1]).unwrap();
        let eta3 = Congruence::from_blocks(6, &[vec![0, 2, 4], vec![1, 3, 5]]);
        let (q, pq) = p.quotient(&a, &eta3).unwrap();
        let full = p.inner_table(&a).unwrap();
        let quot = pq.inner_table(&q).unwrap();
        for i in 0..4 {
            assert_eq!(full[i] % 2, quot[i]);
        }
        let (t, pt) = p.quotient(&a, &Congruence::total(6)).unwrap();
        assert!(pt.truth_table(&t).unwrap().iter().all(|&x| x));
    }

    #[test]
    fn decomposition_is_conjunction() {
        let z6 = fixtures::z6();
        let d = prime_power_decomposition(&z6, &all_congruences(&z6).unwrap()).unwrap();
        for target in 0..6 {
            let p = sum_program(&z6, "+", 2, 0, 1, vec![target]).unwrap();
            let parts = decompose_program(&z6, &p, &d).unwrap();
            assert_eq!(parts.len(), 2);
            let tt = p.truth_table(&z6).unwrap();
            let tables: Vec<Vec<bool>> = parts
                .iter()
                .map(|(q, pp)| pp.truth_table(q).unwrap())
                .collect();
            for i in 0..4 {
                assert_eq!(tt[i], tables.iter().all(|t| t[i]));
            }
        }
        let p = sum_program(&z6, "+", 2, 0, 1, vec![1, 2]).unwrap();
        assert!(decompose_program(&z6, &p, &d).is_err());
    }
}
