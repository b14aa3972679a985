//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nudfa::algebra::FiniteAlgebra;
use nudfa::cc::{wire, CCircuit, CcBuilder, GateKind, Src};
use nudfa::circuit::AlgCircuit;
use nudfa::fieldpoly::{Cnf, Lit};
use nudfa::program::{AlgProgram, Instruction};
use nudfa::solvers::Equation;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random circuit over `alg` on `k` variables with `gates` gates; the output
/// is the last gate (or a variable when there are none).
pub fn random_circuit(
    rng: &mut ChaCha8Rng,
    alg: &FiniteAlgebra,
    k: usize,
    gates: usize,
    consts: bool,
) -> AlgCircuit {
    let mut c = AlgCircuit::new(k);
    let mut nodes: Vec<usize> = (0..k).map(|i| c.var(i)).collect();
    if consts || k == 0 {
        nodes.push(c.constant(rng.gen_range(0..alg.size)));
    }
    let mut out = nodes[rng.gen_range(0..nodes.len())];
    for _ in 0..gates {
        let op = rng.gen_range(0..alg.ops.len());
        let args = (0..alg.ops[op].arity)
            .map(|_| nodes[rng.gen_range(0..nodes.len())])
            .collect();
        out = c.gate(op, args);
        nodes.push(out);
    }
    c.with_output(out)
}

pub fn random_program(
    rng: &mut ChaCha8Rng,
    alg: &FiniteAlgebra,
    n: usize,
    gates: usize,
) -> AlgProgram {
    let k = rng.gen_range(1..=n.max(1));
    let c = random_circuit(rng, alg, k, gates, false);
    let ins = (0..k)
        .map(|v| Instruction {
            var: v,
            bit: rng.gen_range(0..n),
            a0: rng.gen_range(0..alg.size),
            a1: rng.gen_range(0..alg.size),
        })
        .collect();
    let acc = (0..alg.size).filter(|_| rng.gen_bool(0.4)).collect();
    AlgProgram::new(c, n, ins, acc).expect("well-formed program")
}

/// A random program whose truth table is not constant, when one turns up
/// within a few attempts.
pub fn random_nonconstant_program(
    rng: &mut ChaCha8Rng,
    alg: &FiniteAlgebra,
    n: usize,
    gates: usize,
) -> AlgProgram {
    let mut last = None;
    for _ in 0..64 {
        let p = random_program(rng, alg, n, gates);
        let t = p.truth_table(alg).expect("small n");
        if t.iter().any(|&x| x) && t.iter().any(|&x| !x) {
            return p;
        }
        last = Some(p);
    }
    last.expect("at least one attempt")
}

pub fn random_equation(
    rng: &mut ChaCha8Rng,
    alg: &FiniteAlgebra,
    vars: usize,
    gates: usize,
) -> Equation {
    let lhs = random_circuit(rng, alg, vars, gates, true);
    let rhs = if rng.gen_bool(0.5) {
        let mut c = AlgCircuit::new(vars);
        let e = c.constant(rng.gen_range(0..alg.size));
        c.with_output(e)
    } else {
        let g = rng.gen_range(0..=gates);
        random_circuit(rng, alg, vars, g, true)
    };
    Equation::new(lhs, rhs).expect("same arity")
}

pub fn random_cnf(rng: &mut ChaCha8Rng, n: usize, clauses: usize, width: usize) -> Cnf {
    let cl = (0..clauses)
        .map(|_| {
            (0..width)
                .map(|_| {
                    let v = rng.gen_range(0..n);
                    if rng.gen_bool(0.5) {
                        Lit::pos(v)
                    } else {
                        Lit::neg(v)
                    }
                })
                .collect()
        })
        .collect();
    Cnf::new(n, cl).expect("literals in range")
}

/// Every compatible partition of the universe, by direct enumeration of
/// set partitions as block lists.
pub fn partitions_oracle(alg: &FiniteAlgebra) -> BTreeSet<Vec<usize>> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let n = alg.size;
    let mut all = Vec::new();
    rec(0, n, &mut Vec::new(), &mut all);
    let mut out = BTreeSet::new();
    for blocks in all {
        let mut label = vec![0; n];
        for bl in &blocks {
            let least = bl[0];
            for &x in bl {
                label[x] = least;
            }
        }
        if compatible(alg, &label) {
            out.insert(label);
        }
    }
    out
}

/// Compatibility by changing one argument at a time.
fn compatible(alg: &FiniteAlgebra, label: &[usize]) -> bool {
    let n = alg.size;
    for op in &alg.ops {
        let k = op.arity;
        let total = n.pow(k as u32);
        for idx in 0..total {
            let args: Vec<usize> = (0..k)
                .map(|i| idx / n.pow((k - 1 - i) as u32) % n)
                .collect();
            let v = op.apply(n, &args);
            for i in 0..k {
                for y in 0..n {
                    if label[y] == label[args[i]] {
                        let mut b = args.clone();
                        b[i] = y;
                        if label[op.apply(n, &b)] != label[v] {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// Class labels (least member) of the partition into cosets of the
/// commutator subgroup of a group given by its multiplication table.
pub fn derived_subgroup_cosets(
    mul: impl Fn(usize, usize) -> usize,
    inv: impl Fn(usize) -> usize,
    n: usize,
    id: usize,
) -> Vec<usize> {
    let mut sub: BTreeSet<usize> = BTreeSet::from([id]);
    for a in 0..n {
        for b in 0..n {
            sub.insert(mul(mul(inv(a), inv(b)), mul(a, b)));
        }
    }
    loop {
        let more: Vec<usize> = sub
            .iter()
            .flat_map(|&x| sub.iter().map(move |&y| (x, y)))
            .map(|(x, y)| mul(x, y))
            .collect();
        let before = sub.len();
        sub.extend(more);
        if sub.len() == before {
            break;
        }
    }
    (0..n)
        .map(|x| {
            (0..n)
                .find(|&y| sub.contains(&mul(inv(y), x)))
                .expect("x is in its own coset")
        })
        .collect()
}

pub fn random_mod_mod(rng: &mut ChaCha8Rng, n: usize, m: u64, p: u64, inner: usize) -> CCircuit {
    let mut b = CcBuilder::new(n);
    let mut outs = Vec::new();
    for _ in 0..inner {
        let ws = (0..n)
            .filter_map(|i| {
                rng.gen_bool(0.5)
                    .then(|| wire(Src::Input(i), rng.gen_range(1..m.max(2))))
            })
            .collect();
        let acc: Vec<u64> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
        outs.push(wire(
            Src::Gate(b.add(GateKind::Mod { m, accept: acc }, 1, ws)),
            rng.gen_range(1..p),
        ));
    }
    let acc: Vec<u64> = (0..p).filter(|_| rng.gen_bool(0.5)).collect();
    let o = b.add(GateKind::Mod { m: p, accept: acc }, 2, outs);
    b.finish(o, &format!("MOD({m})∘MOD({p})"))
}

pub fn random_mod_and(rng: &mut ChaCha8Rng, n: usize, m: u64, d: usize) -> CCircuit {
    let mut b = CcBuilder::new(n);
    let mut ws = Vec::new();
    for _ in 0..d {
        let inner = (0..n)
            .filter_map(|i| {
                rng.gen_bool(0.5)
                    .then(|| wire(Src::Input(i), rng.gen_range(1..m)))
            })
            .collect();
        let acc: Vec<u64> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
        ws.push(wire(
            Src::Gate(b.add(GateKind::Mod { m, accept: acc }, 1, inner)),
            1,
        ));
    }
    let a = b.add(GateKind::And, 2, ws);
    b.finish(a, &format!("MOD({m})∘AND({d})"))
}

/// AND∘MOD(2)∘MOD(3)∘AND∘SUMPC(3, ν).
pub fn five_layer(rng: &mut ChaCha8Rng, n: usize, nu: usize) -> CCircuit {
    let mut b = CcBuilder::new(n);
    let mut zs = Vec::new();
    for _ in 0..3 {
        let mut mods = Vec::new();
        for _ in 0..2 {
            let mut ws = Vec::new();
            for _ in 0..2 {
                let vars = (0..n)
                    .filter(|_| rng.gen_bool(0.4))
                    .map(|i| wire(Src::Input(i), 1))
                    .collect();
                ws.push(wire(Src::Gate(b.add(GateKind::And, 1, vars)), 1));
            }
            mods.push(wire(
                Src::Gate(b.add(
                    GateKind::Mod {
                        m: 2,
                        accept: vec![1],
                    },
                    2,
                    ws,
                )),
                rng.gen_range(1..3),
            ));
        }
        zs.push(b.add(
            GateKind::Mod {
                m: 3,
                accept: vec![rng.gen_range(0..3)],
            },
            3,
            mods,
        ));
    }
    let mut ands = Vec::new();
    let mut coeffs = Vec::new();
    for _ in 0..3 {
        let ws = zs
            .iter()
            .filter(|_| rng.gen_bool(0.6))
            .map(|&z| wire(Src::Gate(z), 1))
            .collect();
        ands.push(wire(Src::Gate(b.add(GateKind::And, 4, ws)), 1));
        coeffs.push(
            (0..nu)
                .map(|_| (0..nu).map(|_| rng.gen_range(0..3)).collect())
                .collect(),
        );
    }
    let offset: Vec<u64> = (0..nu).map(|_| rng.gen_range(0..3)).collect();
    let target = (0..nu).map(|_| rng.gen_range(0..3)).collect();
    let o = b.add(
        GateKind::Sumpc {
            p: 3,
            nu,
            coeffs,
            offset,
            target,
        },
        5,
        ands,
    );
    b.finish(o, "AND∘MOD(2)∘MOD(3)∘AND∘SUMPC(3)")
}

pub fn bits(i: usize, n: usize) -> Vec<bool> {
    (0..n).map(|j| i >> j & 1 == 1).collect()
}
