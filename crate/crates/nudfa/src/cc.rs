//! Layered boolean circuits over AND / OR / MOD_m and affine-sum gates.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{malformed, Error, Result};

pub type Matrix = Vec<Vec<u64>>;

pub fn identity_matrix(nu: usize) -> Matrix {
    (0..nu)
        .map(|i| (0..nu).map(|j| u64::from(i == j)).collect())
        .collect()
}

pub fn scalar_matrix(nu: usize, c: u64) -> Matrix {
    (0..nu)
        .map(|i| (0..nu).map(|j| if i == j { c } else { 0 }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix, p: u64) -> Matrix {
    let n = a.len();
    let k = b.first().map_or(0, |r| r.len());
    (0..n)
        .map(|i| {
            (0..k)
                .map(|j| (0..b.len()).fold(0, |s, t| (s + a[i][t] * b[t][j]) % p))
                .collect()
        })
        .collect()
}

pub fn mat_add(a: &Matrix, b: &Matrix, p: u64) -> Matrix {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x + y) % p).collect())
        .collect()
}

pub fn mat_vec(a: &Matrix, v: &[u64], p: u64) -> Vec<u64> {
    a.iter()
        .map(|r| r.iter().zip(v).fold(0, |s, (x, y)| (s + x * y) % p))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Mod {
        m: u64,
        accept: Vec<u64>,
    },
    Sump {
        p: u64,
        nu: usize,
        coeffs: Vec<Matrix>,
        offset: Vec<u64>,
    },
    Sumpc {
        p: u64,
        nu: usize,
        coeffs: Vec<Matrix>,
        offset: Vec<u64>,
        target: Vec<u64>,
    },
}

impl GateKind {
    pub fn is_boolean(&self) -> bool {
        !matches!(self, GateKind::Sump { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Src {
    Input(usize),
    Gate(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wire {
    pub src: Src,
    pub mult: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    #[serde(flatten)]
    pub kind: GateKind,
    pub layer: usize,
    pub inputs: Vec<Wire>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CCircuit {
    pub inputs: usize,
    pub gates: Vec<Gate>,
    pub output: usize,
    pub declared_shape: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Vector(Vec<u64>),
}

impl CCircuit {
    pub fn eval_all(&self, b: &[bool]) -> Vec<Value> {
        let mut vals: Vec<Value> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let get = |s: Src, vals: &Vec<Value>| -> bool {
                match s {
                    Src::Input(i) => b[i],
                    Src::Gate(j) => match &vals[j] {
                        Value::Bool(x) => *x,
                        Value::Vector(_) => panic!("vector-valued gate used as boolean input"),
                    },
                }
            };
            let v = match &g.kind {
                GateKind::And => Value::Bool(g.inputs.iter().all(|w| get(w.src, &vals))),
                GateKind::Or => Value::Bool(g.inputs.iter().any(|w| get(w.src, &vals))),
                GateKind::Mod { m, accept } => {
                    let s = g
                        .inputs
                        .iter()
                        .filter(|w| get(w.src, &vals))
                        .fold(0, |s, w| (s + w.mult % m) % m);
                    Value::Bool(accept.contains(&s))
                }
                GateKind::Sump {
                    p, coeffs, offset, ..
                }
                | GateKind::Sumpc {
                    p, coeffs, offset, ..
                } => {
                    let mut acc = offset.clone();
                    for (w, c) in g.inputs.iter().zip(coeffs) {
                        if get(w.src, &vals) {
                            // boolean 1 is read as the all-ones vector
                            for (i, row) in c.iter().enumerate() {
                                let rs = row.iter().fold(0, |s, x| (s + x) % p);
                                acc[i] = (acc[i] + rs * (w.mult % p)) % p;
                            }
                        }
                    }
                    match &g.kind {
                        GateKind::Sumpc { target, .. } => Value::Bool(&acc == target),
                        _ => Value::Vector(acc),
                    }
                }
            };
            vals.push(v);
        }
        vals
    }

    pub fn eval(&self, b: &[bool]) -> Result<Value> {
        if b.len() != self.inputs {
            return Err(Error::Arity {
                expected: self.inputs,
                got: b.len(),
            });
        }
        Ok(self.eval_all(b).swap_remove(self.output))
    }

    pub fn eval_bool(&self, b: &[bool]) -> Result<bool> {
        match self.eval(b)? {
            Value::Bool(x) => Ok(x),
            Value::Vector(_) => malformed("output is vector-valued"),
        }
    }

    pub fn eval_vector(&self, b: &[bool]) -> Result<Vec<u64>> {
        match self.eval(b)? {
            Value::Vector(v) => Ok(v),
            Value::Bool(_) => malformed("output is boolean"),
        }
    }

    pub fn truth_table(&self) -> Result<Vec<bool>> {
        if self.inputs > crate::program::DEFAULT_TABLE_BOUND {
            return Err(Error::Budget(format!(
                "n = {} exceeds truth-table bound",
                self.inputs
            )));
        }
        (0..1usize << self.inputs)
            .map(|i| self.eval_bool(&crate::program::word(i, self.inputs)))
            .collect()
    }

    /// Structural checks independent of any declared shape.
    pub fn validate(&self) -> Result<()> {
        if self.output >= self.gates.len() {
            return malformed("output gate out of range");
        }
        for (i, g) in self.gates.iter().enumerate() {
            for w in &g.inputs {
                match w.src {
                    Src::Input(x) if x >= self.inputs => {
                        return malformed(format!("gate {i} reads input {x}"))
                    }
                    Src::Gate(j) if j >= i => {
                        return malformed(format!("gate {i} reads later gate {j}"))
                    }
                    Src::Gate(j) if !self.gates[j].kind.is_boolean() => {
                        return malformed(format!("gate {i} reads vector-valued gate {j}"))
                    }
                    _ => {}
                }
                if w.mult == 0 {
                    return malformed(format!("gate {i} has a zero-multiplicity wire"));
                }
            }
            match &g.kind {
                GateKind::Mod { m, accept } if *m == 0 || accept.iter().any(|a| a >= m) => {
                    return malformed(format!("gate {i}: bad MOD parameters"))
                }
                GateKind::Sump {
                    nu, coeffs, offset, ..
                }
                | GateKind::Sumpc {
                    nu, coeffs, offset, ..
                } if coeffs.len() != g.inputs.len()
                    || offset.len() != *nu
                    || coeffs
                        .iter()
                        .any(|c| c.len() != *nu || c.iter().any(|r| r.len() != *nu)) =>
                {
                    return malformed(format!("gate {i}: bad SUMP parameters"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Gates plus total wire multiplicity.
    pub fn size(&self) -> u64 {
        self.gates.len() as u64
            + self
                .gates
                .iter()
                .flat_map(|g| &g.inputs)
                .map(|w| w.mult)
                .sum::<u64>()
    }

    /// Replace every multiplicity-w wire into a MOD/SUMP gate by w unit wires.
    pub fn expand_multiplicities(&self) -> CCircuit {
        let mut c = self.clone();
        for g in &mut c.gates {
            let counting = !matches!(g.kind, GateKind::And | GateKind::Or);
            if !counting {
                continue;
            }
            let mut wires = Vec::new();
            let mut coeffs = Vec::new();
            let old_coeffs = match &g.kind {
                GateKind::Sump { coeffs, .. } | GateKind::Sumpc { coeffs, .. } => {
                    Some(coeffs.clone())
                }
                _ => None,
            };
            for (k, w) in g.inputs.iter().enumerate() {
                for _ in 0..w.mult {
                    wires.push(Wire {
                        src: w.src,
                        mult: 1,
                    });
                    if let Some(oc) = &old_coeffs {
                        coeffs.push(oc[k].clone());
                    }
                }
            }
            g.inputs = wires;
            match &mut g.kind {
                GateKind::Sump { coeffs: c, .. } | GateKind::Sumpc { coeffs: c, .. } => *c = coeffs,
                _ => {}
            }
        }
        c
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph cc {\n  rankdir=BT;\n");
        for i in 0..self.inputs {
            s.push_str(&format!("  x{i} [shape=plaintext,label=\"b{i}\"];\n"));
        }
        for (i, g) in self.gates.iter().enumerate() {
            let label = match &g.kind {
                GateKind::And => "AND".to_string(),
                GateKind::Or => "OR".to_string(),
                GateKind::Mod { m, accept } => format!("MOD{m}{accept:?}"),
                GateKind::Sump { p, nu, .. } => format!("SUMP({p},{nu})"),
                GateKind::Sumpc { p, nu, target, .. } => format!("SUMPC({p},{nu})={target:?}"),
            };
            let shape = if i == self.output {
                "doublecircle"
            } else {
                "box"
            };
            s.push_str(&format!("  g{i} [shape={shape},label=\"{label}\"];\n"));
            for w in &g.inputs {
                let from = match w.src {
                    Src::Input(x) => format!("x{x}"),
                    Src::Gate(j) => format!("g{j}"),
                };
                if w.mult == 1 {
                    s.push_str(&format!("  {from} -> g{i};\n"));
                } else {
                    s.push_str(&format!("  {from} -> g{i} [label=\"{}\"];\n", w.mult));
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    And,
    Or,
    Mod,
    Sump,
    Sumpc,
}

/// One layer of a shape; `None` parameters are wildcards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub params: Vec<Option<u64>>,
}

/// Layers listed input-side first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub layers: Vec<LayerSpec>,
}

impl LayerShape {
    pub fn parse(s: &str) -> Result<LayerShape> {
        let mut layers = Vec::new();
        for part in s.split(['∘', '.']).map(str::trim).filter(|p| !p.is_empty()) {
            let (name, args) = match part.find('(') {
                Some(i) => {
                    if !part.ends_with(')') {
                        return malformed(format!("bad layer `{part}`"));
                    }
                    (&part[..i], &part[i + 1..part.len() - 1])
                }
                None => (part, ""),
            };
            let kind = match name.trim().to_ascii_uppercase().as_str() {
                "AND" => LayerKind::And,
                "OR" => LayerKind::Or,
                "MOD" => LayerKind::Mod,
                "SUMP" | "SUM" => LayerKind::Sump,
                "SUMPC" => LayerKind::Sumpc,
                other => return malformed(format!("unknown layer kind `{other}`")),
            };
            let params = if args.trim().is_empty() {
                vec![]
            } else {
                args.split(',')
                    .map(|a| a.trim().parse::<u64>().ok())
                    .collect()
            };
            layers.push(LayerSpec { kind, params });
        }
        if layers.is_empty() {
            return malformed("empty shape");
        }
        Ok(LayerShape { layers })
    }
}

impl fmt::Display for LayerShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .layers
            .iter()
            .map(|l| {
                let name = match l.kind {
                    LayerKind::And => "AND",
                    LayerKind::Or => "OR",
                    LayerKind::Mod => "MOD",
                    LayerKind::Sump => "SUMP",
                    LayerKind::Sumpc => "SUMPC",
                };
                if l.params.is_empty() {
                    return name.to_string();
                }
                let ps: Vec<String> = l
                    .params
                    .iter()
                    .map(|p| p.map_or("*".to_string(), |v| v.to_string()))
                    .collect();
                format!("{name}({})", ps.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("∘"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShapeReport {
    pub ok: bool,
    pub violation: Option<String>,
}

pub fn validate_shape(c: &CCircuit, shape: &LayerShape) -> ShapeReport {
    match check_shape(c, shape) {
        Ok(()) => ShapeReport {
            ok: true,
            violation: None,
        },
        Err(v) => ShapeReport {
            ok: false,
            violation: Some(v),
        },
    }
}

fn check_shape(c: &CCircuit, shape: &LayerShape) -> std::result::Result<(), String> {
    if let Err(e) = c.validate() {
        return Err(e.to_string());
    }
    let depth = shape.layers.len();
    for (i, g) in c.gates.iter().enumerate() {
        if g.layer == 0 || g.layer > depth {
            return Err(format!(
                "gate {i} sits on layer {} outside 1..={depth}",
                g.layer
            ));
        }
        let spec = &shape.layers[g.layer - 1];
        let param = |k: usize| spec.params.get(k).copied().flatten();
        let ok = match (&g.kind, spec.kind) {
            (GateKind::And, LayerKind::And) | (GateKind::Or, LayerKind::Or) => {
                param(0).map_or(true, |d| g.inputs.len() as u64 <= d)
            }
            (GateKind::Mod { m, .. }, LayerKind::Mod) => param(0).map_or(true, |x| x == *m),
            (GateKind::Sump { p, nu, .. }, LayerKind::Sump)
            | (GateKind::Sumpc { p, nu, .. }, LayerKind::Sumpc) => {
                param(0).map_or(true, |x| x == *p) && param(1).map_or(true, |x| x == *nu as u64)
            }
            _ => false,
        };
        if !ok {
            return Err(format!(
                "gate {i} ({:?}) does not fit layer {} of {shape}",
                kind_name(&g.kind),
                g.layer
            ));
        }
        for w in &g.inputs {
            let from = match w.src {
                Src::Input(_) => 0,
                Src::Gate(j) => c.gates[j].layer,
            };
            if from + 1 != g.layer {
                return Err(format!(
                    "wire {:?} -> gate {i} skips from layer {from} to {}",
                    w.src, g.layer
                ));
            }
        }
    }
    if c.gates[c.output].layer != depth {
        return Err(format!(
            "output gate sits on layer {}, expected {depth}",
            c.gates[c.output].layer
        ));
    }
    Ok(())
}

fn kind_name(k: &GateKind) -> &'static str {
    match k {
        GateKind::And => "AND",
        GateKind::Or => "OR",
        GateKind::Mod { .. } => "MOD",
        GateKind::Sump { .. } => "SUMP",
        GateKind::Sumpc { .. } => "SUMPC",
    }
}

pub fn cc_size(c: &CCircuit) -> u64 {
    c.size()
}

/// Incremental construction with structural sharing of identical gates.
#[derive(Clone, Debug)]
pub struct CcBuilder {
    pub inputs: usize,
    pub gates: Vec<Gate>,
    index: HashMap<Gate, usize>,
}

impl CcBuilder {
    pub fn new(inputs: usize) -> Self {
        CcBuilder {
            inputs,
            gates: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, kind: GateKind, layer: usize, inputs: Vec<Wire>) -> usize {
        let g = Gate {
            kind,
            layer,
            inputs,
        };
        if let Some(&i) = self.index.get(&g) {
            return i;
        }
        let i = self.gates.len();
        self.gates.push(g.clone());
        self.index.insert(g, i);
        i
    }

    pub fn finish(self, output: usize, shape: &str) -> CCircuit {
        CCircuit {
            inputs: self.inputs,
            gates: self.gates,
            output,
            declared_shape: shape.to_string(),
        }
    }
}

pub fn wire(src: Src, mult: u64) -> Wire {
    Wire { src, mult }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and_mod_mod() -> CCircuit {
        let mut b = CcBuilder::new(2);
        let a = b.add(
            GateKind::And,
            1,
            vec![wire(Src::Input(0), 1), wire(Src::Input(1), 1)],
        );
        let m = b.add(
            GateKind::Mod {
                m: 2,
                accept: vec![1],
            },
            2,
            vec![wire(Src::Gate(a), 1)],
        );
        let o = b.add(
            GateKind::Mod {
                m: 3,
                accept: vec![1],
            },
            3,
            vec![wire(Src::Gate(m), 1)],
        );
        b.finish(o, "AND(*)∘MOD(2)∘MOD(3)")
    }

    #[test]
    fn mod_gate_semantics() {
        let mut b = CcBuilder::new(3);
        let g = b.add(
            GateKind::Mod {
                m: 2,
                accept: vec![1],
            },
            1,
            (0..3).map(|i| wire(Src::Input(i), 1)).collect(),
        );
        let c = b.finish(g, "MOD(2)");
        assert!(!c.eval_bool(&[true, true, false]).unwrap());
        assert_eq!(c.size(), 4);
    }

    #[test]
    fn sumpc_semantics() {
        let mut b = CcBuilder::new(2);
        let g = b.add(
            GateKind::Sumpc {
                p: 3,
                nu: 1,
                coeffs: vec![vec![vec![1]], vec![vec![1]]],
                offset: vec![0],
                target: vec![2],
            },
            1,
            vec![wire(Src::Input(0), 1), wire(Src::Input(1), 1)],
        );
        let c = b.finish(g, "SUMPC(3,1)");
        assert!(c.eval_bool(&[true, true]).unwrap());
        assert!(!c.eval_bool(&[true, false]).unwrap());
    }

    #[test]
    fn shapes() {
        let c = and_mod_mod();
        assert_eq!(c.truth_table().unwrap(), vec![false, false, false, true]);
        let s = LayerShape::parse("AND(*)∘MOD(2)∘MOD(3)").unwrap();
        assert!(validate_shape(&c, &s).ok);
        assert_eq!(LayerShape::parse(&s.to_string()).unwrap(), s);
        assert!(!validate_shape(&c, &LayerShape::parse("MOD(2)∘MOD(3)").unwrap()).ok);
        assert!(!validate_shape(&c, &LayerShape::parse("AND∘MOD(3)∘MOD(3)").unwrap()).ok);
        // MOD feeding AND
        let mut b = CcBuilder::new(1);
        let m = b.add(
            GateKind::Mod {
                m: 2,
                accept: vec![1],
            },
            1,
            vec![wire(Src::Input(0), 1)],
        );
        let a = b.add(GateKind::And, 2, vec![wire(Src::Gate(m), 1)]);
        let c2 = b.finish(a, "MOD∘AND");
        let r = validate_shape(&c2, &LayerShape::parse("AND∘MOD").unwrap());
        assert!(!r.ok && r.violation.is_some());
    }

    #[test]
    fn pass_through_size() {
        let mut b = CcBuilder::new(1);
        let g = b.add(
            GateKind::Mod {
                m: 3,
                accept: vec![1],
            },
            1,
            vec![wire(Src::Input(0), 1)],
        );
        assert_eq!(b.finish(g, "MOD(3)").size(), 2);
    }

    #[test]
    fn empty_accepting_set_is_constant_zero() {
        let mut b = CcBuilder::new(1);
        let g = b.add(
            GateKind::Mod {
                m: 2,
                accept: vec![],
            },
            1,
            vec![wire(Src::Input(0), 1)],
        );
        let c = b.finish(g, "MOD(2)");
        assert_eq!(c.truth_table().unwrap(), vec![false, false]);
    }

    #[test]
    fn json_round_trip() {
        let c = and_mod_mod();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CCircuit>(&s).unwrap(), c);
    }
}
