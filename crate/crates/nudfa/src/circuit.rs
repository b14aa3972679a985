//! Circuits over an algebra's signature.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAlgebra;
use crate::error::{malformed, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Var(usize),
    Const(usize),
    Gate { op: usize, args: Vec<usize> },
}

/// A hash-consed DAG. Children always precede their parents.
#[derive(Clone, Debug)]
pub struct AlgCircuit {
    pub k: usize,
    pub nodes: Vec<Node>,
    pub output: usize,
    cons: HashMap<Node, usize>,
}

impl PartialEq for AlgCircuit {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.nodes == other.nodes && self.output == other.output
    }
}

impl AlgCircuit {
    pub fn new(k: usize) -> Self {
        AlgCircuit {
            k,
            nodes: Vec::new(),
            output: 0,
            cons: HashMap::new(),
        }
    }

    fn intern(&mut self, node: Node) -> usize {
        if let Some(&i) = self.cons.get(&node) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(node.clone());
        self.cons.insert(node, i);
        self.output = i;
        i
    }

    pub fn var(&mut self, i: usize) -> usize {
        assert!(i < self.k, "variable {i} out of range");
        self.intern(Node::Var(i))
    }

    pub fn constant(&mut self, c: usize) -> usize {
        self.intern(Node::Const(c))
    }

    pub fn gate(&mut self, op: usize, args: Vec<usize>) -> usize {
        assert!(
            args.iter().all(|&a| a < self.nodes.len()),
            "child must precede parent"
        );
        self.intern(Node::Gate { op, args })
    }

    pub fn with_output(mut self, out: usize) -> Self {
        self.output = out;
        self
    }

    /// Number of gate nodes.
    pub fn size(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Gate { .. }))
            .count()
    }

    /// Values of every node under the given variable assignment.
    pub fn eval_all(&self, alg: &FiniteAlgebra, args: &[usize]) -> Vec<usize> {
        let mut vals = Vec::with_capacity(self.nodes.len());
        let mut buf = Vec::new();
        for node in &self.nodes {
            let v = match node {
                Node::Var(i) => args[*i],
                Node::Const(c) => *c,
                Node::Gate { op, args: ch } => {
                    buf.clear();
                    buf.extend(ch.iter().map(|&c| vals[c]));
                    alg.ops[*op].apply(alg.size, &buf)
                }
            };
            vals.push(v);
        }
        vals
    }

    pub fn eval(&self, alg: &FiniteAlgebra, args: &[usize]) -> Result<usize> {
        if args.len() != self.k {
            return Err(Error::Arity {
                expected: self.k,
                got: args.len(),
            });
        }
        if let Some(&a) = args.iter().find(|&&a| a >= alg.size) {
            return Err(Error::OutOfRange(a));
        }
        Ok(self.eval_all(alg, args)[self.output])
    }

    /// Copy the cone of `self.output` into `into`, mapping variables to the given nodes.
    pub fn embed(&self, into: &mut AlgCircuit, var_map: &[usize]) -> usize {
        let mut map = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let id = match node {
                Node::Var(i) => var_map[*i],
                Node::Const(c) => into.constant(*c),
                Node::Gate { op, args } => {
                    let a = args.iter().map(|&c| map[c]).collect();
                    into.gate(*op, a)
                }
            };
            map.push(id);
        }
        map[self.output]
    }

    /// Drop nodes not reachable from the output.
    pub fn pruned(&self) -> AlgCircuit {
        let mut out = AlgCircuit::new(self.k);
        let vars: Vec<usize> = (0..self.k).map(|i| out.var(i)).collect();
        let o = self.embed(&mut out, &vars);
        let mut c = out.extract(o);
        c.k = self.k;
        c
    }

    /// Sub-circuit rooted at `root` (same variables).
    pub fn extract(&self, root: usize) -> AlgCircuit {
        let mut keep = vec![false; self.nodes.len()];
        keep[root] = true;
        for i in (0..=root).rev() {
            if keep[i] {
                if let Node::Gate { args, .. } = &self.nodes[i] {
                    for &a in args {
                        keep[a] = true;
                    }
                }
            }
        }
        let mut out = AlgCircuit::new(self.k);
        let mut map = vec![usize::MAX; self.nodes.len()];
        for i in 0..=root {
            if !keep[i] {
                continue;
            }
            map[i] = match &self.nodes[i] {
                Node::Var(v) => out.var(*v),
                Node::Const(c) => out.constant(*c),
                Node::Gate { op, args } => out.gate(*op, args.iter().map(|&a| map[a]).collect()),
            };
        }
        out.output = map[root];
        out
    }

    /// Compose: plug `inner[i]` (all with the same variable count) into variable i.
    pub fn compose(&self, inner: &[AlgCircuit]) -> AlgCircuit {
        assert_eq!(inner.len(), self.k);
        let k = inner.first().map_or(0, |c| c.k);
        let mut out = AlgCircuit::new(k);
        let vars: Vec<usize> = (0..k).map(|i| out.var(i)).collect();
        let roots: Vec<usize> = inner.iter().map(|c| c.embed(&mut out, &vars)).collect();
        let o = self.embed(&mut out, &roots);
        out.output = o;
        out
    }

    pub fn validate(&self, alg: &FiniteAlgebra) -> Result<()> {
        if self.nodes.is_empty() || self.output >= self.nodes.len() {
            return malformed("circuit has no output node");
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Var(v) if *v >= self.k => return malformed(format!("variable {v} >= k")),
                Node::Const(c) if *c >= alg.size => return Err(Error::OutOfRange(*c)),
                Node::Gate { op, args } => {
                    let o = alg
                        .ops
                        .get(*op)
                        .ok_or_else(|| Error::UnknownOp(op.to_string()))?;
                    if o.arity != args.len() {
                        return Err(Error::Arity {
                            expected: o.arity,
                            got: args.len(),
                        });
                    }
                    if args.iter().any(|&a| a >= i) {
                        return malformed(format!("node {i} references a later node"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Human-readable term for the output node (shared nodes are printed repeatedly).
    pub fn render(&self, alg: &FiniteAlgebra) -> String {
        fn go(c: &AlgCircuit, alg: &FiniteAlgebra, i: usize, out: &mut String) {
            match &c.nodes[i] {
                Node::Var(v) => out.push_str(&format!("x{}", v + 1)),
                Node::Const(k) => out.push_str(&k.to_string()),
                Node::Gate { op, args } => {
                    out.push_str(&alg.ops[*op].name);
                    out.push('(');
                    for (j, a) in args.iter().enumerate() {
                        if j > 0 {
                            out.push(',');
                        }
                        go(c, alg, *a, out);
                    }
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        go(self, alg, self.output, &mut s);
        s
    }

    pub fn to_repr(&self, alg: &FiniteAlgebra) -> CircuitRepr {
        CircuitRepr {
            k: self.k,
            nodes: self
                .nodes
                .iter()
                .map(|n| match n {
                    Node::Var(v) => NodeRepr::Var(*v),
                    Node::Const(c) => NodeRepr::Const(*c),
                    Node::Gate { op, args } => NodeRepr::Gate {
                        op: alg.ops[*op].name.clone(),
                        args: args.clone(),
                    },
                })
                .collect(),
            output: self.output,
        }
    }

    pub fn from_repr(repr: &CircuitRepr, alg: &FiniteAlgebra) -> Result<AlgCircuit> {
        let mut c = AlgCircuit::new(repr.k);
        let mut map = Vec::with_capacity(repr.nodes.len());
        for n in &repr.nodes {
            let id = match n {
                NodeRepr::Var(v) => {
                    if *v >= repr.k {
                        return malformed(format!("variable {v} >= k"));
                    }
                    c.var(*v)
                }
                NodeRepr::Const(x) => {
                    if *x >= alg.size {
                        return Err(Error::OutOfRange(*x));
                    }
                    c.constant(*x)
                }
                NodeRepr::Gate { op, args } => {
                    let oi = alg.op_index(op)?;
                    if alg.ops[oi].arity != args.len() {
                        return Err(Error::Arity {
                            expected: alg.ops[oi].arity,
                            got: args.len(),
                        });
                    }
                    let mut a = Vec::with_capacity(args.len());
                    for &x in args {
                        a.push(*map.get(x).ok_or_else(|| {
                            Error::Malformed(format!("node references later node {x}"))
                        })?);
                    }
                    c.gate(oi, a)
                }
            };
            map.push(id);
        }
        c.output = *map
            .get(repr.output)
            .ok_or_else(|| Error::Malformed("output out of range".into()))?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRepr {
    Var(usize),
    Const(usize),
    Gate { op: String, args: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitRepr {
    pub k: usize,
    pub nodes: Vec<NodeRepr>,
    pub output: usize,
}
