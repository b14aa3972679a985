//! Command-line front end. `run` returns the exit code and stdout text so
//! tests can drive it without a subprocess.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{
    find_malcev_polynomial, prime_power_decomposition, unary_polynomial_clone, AlgebraFile,
    FiniteAlgebra, DEFAULT_CLONE_BUDGET, DEFAULT_MALCEV_DEPTH,
};
use crate::cc::{validate_shape, CCircuit, LayerShape, Value as CcValue};
use crate::circuit::{AlgCircuit, CircuitRepr};
use crate::compiler::{compile_nilpotent_with, compile_supernilpotent, CompileOptions};
use crate::congruence::{
    all_congruences_bounded, distinguished_congruences, solvability_class, supernilpotent_rank,
    Congruence, CongruenceLattice, DEFAULT_CON_BOUND,
};
use crate::error::{Error, Result};
use crate::fieldpoly::Cnf;
use crate::fixtures;
use crate::hardness::{
    build_two_prime_program, cnf_to_lattice_program, find_two_prime_witness, fixture_search,
    WitnessSearch,
};
use crate::localizer::{minimal_set_through_in, minimal_sets_in, view};
use crate::lowering::{boolean_table, run_pass};
use crate::program::{word, AlgProgram, ProgramFile};
use crate::solvers::{
    ceqv_exhaustive, ceqv_to_progcsat, ceqv_via_meet_irreducibles, csat_exhaustive,
    csat_to_progcsat, decode_assignment, default_trials, progcsat_exhaustive, progcsat_sample,
    Equation, SolveResult, Status, EQUATION_SCAN_LIMIT,
};

pub const BUDGET_VAR: &str = "NUDFA_BUDGET";
pub const MAX_VERIFY_N: usize = 20;

#[derive(Parser, Debug)]
#[command(
    name = "nudfa",
    version,
    about = "Finite algebras, programs over them, and modular-counting circuits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print an algebra with its Malcev term, clone size and decomposition.
    Algebra {
        #[arg(long)]
        algebra: String,
    },
    /// Congruence lattice, characteristics and distinguished congruences.
    Con {
        #[arg(long)]
        algebra: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Minimal sets and traces of a prime quotient, given by lattice indices.
    Localize {
        #[arg(long)]
        algebra: String,
        #[arg(long)]
        lower: usize,
        #[arg(long)]
        upper: usize,
        /// Report a minimal set through this element instead.
        #[arg(long)]
        through: Option<usize>,
    },
    /// Compile a program into a modular-counting circuit.
    Compile {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        algebra: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        verify_n: usize,
        /// Include per-step sizes.
        #[arg(long)]
        trace_sizes: bool,
        /// Use the single-prime compiler.
        #[arg(long)]
        supernilpotent: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run one lowering pass on a circuit file.
    Lower {
        #[arg(long)]
        pass: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        p: Option<u64>,
        #[arg(long, default_value_t = 10)]
        verify_n: usize,
    },
    /// Evaluate a circuit on a bit string (bit 0 first).
    Cceval {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        input: String,
    },
    /// Check a circuit against a layer shape such as `AND∘MOD(2)∘MOD(3)`.
    Ccshape {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        shape: String,
    },
    /// Decide ProgCSat, CSat or CEqv.
    Solve(SolveArgs),
    /// Hardness gadgets.
    #[command(subcommand)]
    Gadget(Gadget),
    /// Compare a program and a circuit on every input.
    Verify {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        algebra: Option<String>,
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = 16)]
        n_bound: usize,
    },
    /// List the built-in algebras and self-test their lattices.
    Fixtures,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Progcsat,
    Csat,
    Ceqv,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(value_enum)]
    pub problem: Problem,
    /// Program file (progcsat).
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Equation file (csat, ceqv).
    #[arg(long)]
    pub equation: Option<PathBuf>,
    #[arg(long)]
    pub algebra: Option<String>,
    #[arg(long, conflicts_with = "sample")]
    pub exhaustive: bool,
    /// Random trials; 0 means 4·size².
    #[arg(long)]
    pub sample: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Answer an equation through its ProgCSat program.
    #[arg(long)]
    pub reduce: bool,
    /// Check a CEqv instance quotient by quotient.
    #[arg(long)]
    pub meet_irreducibles: bool,
}

#[derive(Subcommand, Debug)]
pub enum Gadget {
    /// Program over the two-element lattice accepting the models of a CNF.
    Lattice {
        #[arg(long)]
        cnf: PathBuf,
    },
    /// Two-prime program over an algebra, when the witness configuration exists.
    Twoprime {
        #[arg(long)]
        algebra: String,
        #[arg(long)]
        cnf: PathBuf,
    },
    /// Search unary extensions of cyclic groups for gadget configurations.
    Search {
        #[arg(long, default_value_t = 8)]
        max_size: usize,
    },
}

/// Equation file: both sides over the named algebra's signature.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquationFile {
    pub algebra: String,
    pub lhs: CircuitRepr,
    pub rhs: CircuitRepr,
}

impl EquationFile {
    pub fn to_equation(&self, alg: &FiniteAlgebra) -> Result<Equation> {
        Equation::new(
            AlgCircuit::from_repr(&self.lhs, alg)?,
            AlgCircuit::from_repr(&self.rhs, alg)?,
        )
    }
}

#[derive(Clone, Copy, Debug)]
struct Budget(Option<usize>);

impl Budget {
    fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_VAR) {
            Ok(v) => v.trim().parse().map(|b| Budget(Some(b))).map_err(|_| {
                Error::Malformed(format!("{BUDGET_VAR} must be a non-negative integer"))
            }),
            Err(_) => Ok(Budget(None)),
        }
    }

    fn clone_budget(self) -> usize {
        self.0.unwrap_or(DEFAULT_CLONE_BUDGET)
    }

    fn scan_limit(self) -> u64 {
        self.0.map_or(EQUATION_SCAN_LIMIT, |b| b as u64)
    }

    fn lattice(self, alg: &FiniteAlgebra) -> Result<CongruenceLattice> {
        let bound = if self.0.is_some() {
            alg.size.max(DEFAULT_CON_BOUND)
        } else {
            DEFAULT_CON_BOUND
        };
        all_congruences_bounded(alg, bound)
    }
}

/// Exit code 1 for hypothesis violations and failed checks, 2 for usage errors.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Refused(_) | Error::Verification(_) => 1,
        _ => 2,
    }
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    match Budget::from_env().and_then(|b| dispatch(cli.command, b)) {
        Ok((code, stdout)) => Outcome {
            code,
            stdout,
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: exit_code(&e),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    Ok(std::fs::write(path, text)?)
}

/// `fixtures:NAME` or a path to an algebra file.
pub fn load_algebra(spec: &str) -> Result<(FiniteAlgebra, Option<AlgCircuit>)> {
    if let Some(name) = spec.strip_prefix("fixtures:") {
        return Ok((fixtures::by_name(name)?, None));
    }
    let file: AlgebraFile = serde_json::from_str(&read(Path::new(spec))?)?;
    file.into_parts()
}

fn malcev_for(alg: &FiniteAlgebra, given: Option<AlgCircuit>) -> Result<AlgCircuit> {
    match given {
        Some(d) => Ok(d),
        None => find_malcev_polynomial(alg, DEFAULT_MALCEV_DEPTH)
            .ok_or_else(|| Error::Refused(format!("no Malcev polynomial found for {}", alg.name))),
    }
}

/// The algebra named by `--algebra`, else the fixture named in the file.
fn algebra_for(flag: Option<&str>, named: &str) -> Result<(FiniteAlgebra, Option<AlgCircuit>)> {
    match flag {
        Some(s) => load_algebra(s),
        None => Ok((fixtures::by_name(named)?, None)),
    }
}

fn load_program(
    path: &Path,
    algebra: Option<&str>,
) -> Result<(FiniteAlgebra, Option<AlgCircuit>, AlgProgram)> {
    let file: ProgramFile = serde_json::from_str(&read(path)?)?;
    let (alg, d) = algebra_for(algebra, &file.algebra)?;
    let p = file.to_program(&alg)?;
    Ok((alg, d, p))
}

fn load_circuit(path: &Path) -> Result<CCircuit> {
    let c: CCircuit = serde_json::from_str(&read(path)?)?;
    c.validate()?;
    Ok(c)
}

fn dispatch(cmd: Command, budget: Budget) -> Result<(i32, String)> {
    match cmd {
        Command::Algebra { algebra } => cmd_algebra(&algebra, budget),
        Command::Con { algebra, format } => cmd_con(&algebra, format, budget),
        Command::Localize {
            algebra,
            lower,
            upper,
            through,
        } => cmd_localize(&algebra, lower, upper, through, budget),
        Command::Compile {
            program,
            algebra,
            out,
            verify_n,
            trace_sizes,
            supernilpotent,
            format,
        } => cmd_compile(
            &program,
            algebra.as_deref(),
            out.as_deref(),
            verify_n,
            trace_sizes,
            supernilpotent,
            format,
        ),
        Command::Lower {
            pass,
            input,
            out,
            p,
            verify_n,
        } => {
            let c = load_circuit(&input)?;
            let (c2, report) = run_pass(&pass, &c, p, verify_n)?;
            if let Some(o) = out {
                write(&o, &pretty(&c2)?)?;
            }
            Ok((0, pretty(&report)?))
        }
        Command::Cceval { circuit, input } => {
            let c = load_circuit(&circuit)?;
            let b = parse_bits(&input)?;
            let v = match c.eval(&b)? {
                CcValue::Bool(x) => json!({ "input": input, "value": x }),
                CcValue::Vector(v) => json!({ "input": input, "value": v }),
            };
            Ok((0, pretty(&v)?))
        }
        Command::Ccshape { circuit, shape } => {
            let c = load_circuit(&circuit)?;
            let r = validate_shape(&c, &LayerShape::parse(&shape)?);
            Ok((if r.ok { 0 } else { 1 }, pretty(&r)?))
        }
        Command::Solve(args) => cmd_solve(args, budget),
        Command::Gadget(g) => cmd_gadget(g, budget),
        Command::Verify {
            program,
            algebra,
            circuit,
            n_bound,
        } => {
            let (alg, _, p) = load_program(&program, algebra.as_deref())?;
            let c = load_circuit(&circuit)?;
            let r = verify_harness(&alg, &p, &c, n_bound)?;
            Ok((if r.matches { 0 } else { 1 }, pretty(&r)?))
        }
        Command::Fixtures => cmd_fixtures(),
    }
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Malformed(format!(
                "input must be a 0/1 string, got `{s}`"
            ))),
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub rows: usize,
    pub matches: bool,
    /// First differing input word, bit 0 first.
    pub mismatch: Option<String>,
    pub program_value: Option<bool>,
    pub circuit_value: Option<bool>,
}

/// Exhaustive truth-table comparison of a program and a circuit.
pub fn verify_harness(
    alg: &FiniteAlgebra,
    p: &AlgProgram,
    c: &CCircuit,
    n_bound: usize,
) -> Result<VerifyReport> {
    if n_bound > MAX_VERIFY_N {
        return Err(Error::Budget(format!(
            "n bound {n_bound} exceeds {MAX_VERIFY_N}"
        )));
    }
    if p.n > n_bound {
        return Err(Error::Budget(format!(
            "program has n = {} > bound {n_bound}",
            p.n
        )));
    }
    if c.inputs != p.n {
        return Err(Error::Malformed(format!(
            "circuit has {} inputs, program reads {}",
            c.inputs, p.n
        )));
    }
    let (tp, tc) = (p.truth_table(alg)?, boolean_table(c)?);
    let first = tp.iter().zip(&tc).position(|(a, b)| a != b);
    let render = |i: usize| {
        word(i, p.n)
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect::<String>()
    };
    Ok(VerifyReport {
        n: p.n,
        rows: tp.len(),
        matches: first.is_none(),
        mismatch: first.map(render),
        program_value: first.map(|i| tp[i]),
        circuit_value: first.map(|i| tc[i]),
    })
}

fn cmd_algebra(spec: &str, budget: Budget) -> Result<(i32, String)> {
    let (alg, given) = load_algebra(spec)?;
    let d = given.or_else(|| find_malcev_polynomial(&alg, DEFAULT_MALCEV_DEPTH));
    let clone_size = unary_polynomial_clone(&alg, budget.clone_budget())
        .map(|c| c.len())
        .ok();
    let decomposition = budget
        .lattice(&alg)
        .ok()
        .and_then(|lat| prime_power_decomposition(&alg, &lat));
    let v = json!({
        "algebra": AlgebraFile::from_parts(&alg, d.as_ref()),
        "malcev": d.as_ref().map(|d| d.render(&alg)),
        "clone_size": clone_size,
        "decomposition": decomposition.map(|dec| json!({
            "factors": dec.factors.iter().map(Congruence::label).collect::<Vec<_>>(),
            "factor_sizes": dec.factor_sizes,
        })),
    });
    Ok((0, pretty(&v)?))
}

pub fn lattice_dot(alg: &FiniteAlgebra, lat: &CongruenceLattice) -> String {
    let mut s = format!("digraph \"Con({})\" {{\n  rankdir=BT;\n", alg.name);
    for (i, c) in lat.elements.iter().enumerate() {
        s.push_str(&format!("  c{i} [label=\"{}\"];\n", c.label()));
    }
    for (k, &(lo, hi)) in lat.covers.iter().enumerate() {
        let label = lat.cover_chars[k]
            .as_ref()
            .map_or(String::new(), |c| c.characteristic.to_string());
        s.push_str(&format!("  c{lo} -> c{hi} [label=\"{label}\"];\n"));
    }
    s.push_str("}\n");
    s
}

fn cmd_con(spec: &str, format: Format, budget: Budget) -> Result<(i32, String)> {
    let (alg, _) = load_algebra(spec)?;
    let lat = budget.lattice(&alg)?;
    if format == Format::Dot {
        return Ok((0, lattice_dot(&alg, &lat)));
    }
    let solv = solvability_class(&alg, &Congruence::total(alg.size))?;
    let (rank, dist) = if solv.is_nilpotent() {
        (
            supernilpotent_rank(&alg, &lat).ok(),
            distinguished_congruences(&alg, &lat).ok(),
        )
    } else {
        (None, None)
    };
    let label = |i: usize| lat.elements[i].label();
    let v = json!({
        "algebra": alg.name,
        "size": alg.size,
        "congruences": lat.elements.iter().enumerate().map(|(i, c)| json!({
            "index": i, "label": c.label(), "blocks": c.blocks(),
        })).collect::<Vec<_>>(),
        "covers": lat.covers.iter().zip(&lat.cover_chars).map(|(&(lo, hi), ch)| json!({
            "lower": lo, "upper": hi, "characteristic": ch.as_ref().map(|c| c.characteristic),
        })).collect::<Vec<_>>(),
        "atoms": lat.atoms,
        "meet_irreducibles": lat.meet_irreducibles,
        "join_irreducibles": lat.join_irreducibles,
        "modular": lat.modular,
        "solvability": solv,
        "rank": rank,
        "sigma": dist.as_ref().map(|d| d.sigma.label()),
        "kappa": dist.as_ref().map(|d| d.kappa.label()),
        "sigma_p": dist.as_ref().map(|d| d.sigma_p.iter().map(|(p, c)| (p.to_string(), c.label()))
            .collect::<std::collections::BTreeMap<_, _>>()),
        "top": label(lat.top()),
    });
    Ok((0, pretty(&v)?))
}

fn cmd_localize(
    spec: &str,
    lower: usize,
    upper: usize,
    through: Option<usize>,
    budget: Budget,
) -> Result<(i32, String)> {
    let (alg, _) = load_algebra(spec)?;
    let lat = budget.lattice(&alg)?;
    let k = lat.elements.len();
    if lower >= k || upper >= k {
        return Err(Error::Malformed(format!("lattice has {k} elements")));
    }
    let (a, b) = (&lat.elements[lower], &lat.elements[upper]);
    let clone = unary_polynomial_clone(&alg, budget.clone_budget())?;
    let sets = match through {
        Some(e) => {
            if e >= alg.size {
                return Err(Error::OutOfRange(e));
            }
            vec![minimal_set_through_in(&alg, &clone, a, b, e)?]
        }
        None => minimal_sets_in(&clone, a, b)?,
    };
    let v = json!({
        "lower": a.label(),
        "upper": b.label(),
        "minimal_sets": sets.iter().map(|m| view(m, a, b)).collect::<Vec<_>>(),
    });
    Ok((0, pretty(&v)?))
}

fn cmd_compile(
    program: &Path,
    algebra: Option<&str>,
    out: Option<&Path>,
    verify_n: usize,
    trace_sizes: bool,
    supernilpotent: bool,
    format: Format,
) -> Result<(i32, String)> {
    let (alg, d, p) = load_program(program, algebra)?;
    let verify_n = verify_n.min(MAX_VERIFY_N);
    let (circuit, mut report) = if supernilpotent {
        let c = compile_supernilpotent(&alg, &p)?;
        (c, json!({ "compiler": "supernilpotent" }))
    } else {
        let opts = CompileOptions {
            verify_n,
            ..CompileOptions::default()
        };
        let comp = compile_nilpotent_with(&alg, &p, d.as_ref(), &opts)?;
        let mut r = json!({
            "compiler": "nilpotent",
            "m": comp.m,
            "p": comp.p,
            "chain": comp.chain.iter().map(Congruence::label).collect::<Vec<_>>(),
            "steps": comp.steps.len(),
        });
        if trace_sizes {
            r["step_reports"] = serde_json::to_value(&comp.steps)?;
        }
        (comp.circuit, r)
    };
    let checked = if p.n <= verify_n {
        Some(verify_harness(&alg, &p, &circuit, verify_n)?)
    } else {
        None
    };
    let verified = checked.as_ref().is_some_and(|r| r.matches);
    if format == Format::Dot {
        return Ok((
            if checked.as_ref().is_some_and(|r| !r.matches) {
                1
            } else {
                0
            },
            circuit.to_dot(),
        ));
    }
    report["shape"] = json!(circuit.declared_shape);
    report["size"] = json!(circuit.size());
    report["verified"] = json!(verified);
    if let Some(r) = &checked {
        if !r.matches {
            report["mismatch"] = serde_json::to_value(r)?;
        }
    }
    match out {
        Some(o) => write(o, &pretty(&circuit)?)?,
        None => report["circuit"] = serde_json::to_value(&circuit)?,
    }
    let code = if checked.is_some_and(|r| !r.matches) {
        1
    } else {
        0
    };
    Ok((code, pretty(&report)?))
}

fn cmd_solve(args: SolveArgs, budget: Budget) -> Result<(i32, String)> {
    let trials_for = |p: &AlgProgram| match args.sample {
        Some(0) => default_trials(p),
        Some(t) => t,
        None => 0,
    };
    let solve_program = |alg: &FiniteAlgebra, p: &AlgProgram| -> Result<SolveResult> {
        if args.sample.is_some() && !args.exhaustive {
            progcsat_sample(alg, p, trials_for(p), args.seed)
        } else {
            progcsat_exhaustive(alg, p)
        }
    };
    let result = match args.problem {
        Problem::Progcsat => {
            let path = args
                .program
                .as_deref()
                .ok_or_else(|| Error::Malformed("progcsat needs --program".into()))?;
            let (alg, _, p) = load_program(path, args.algebra.as_deref())?;
            json!({ "problem": "progcsat", "result": solve_program(&alg, &p)? })
        }
        Problem::Csat | Problem::Ceqv => {
            let path = args
                .equation
                .as_deref()
                .ok_or_else(|| Error::Malformed("csat/ceqv need --equation".into()))?;
            let file: EquationFile = serde_json::from_str(&read(path)?)?;
            let (alg, d) = algebra_for(args.algebra.as_deref(), &file.algebra)?;
            let eq = file.to_equation(&alg)?;
            let csat = args.problem == Problem::Csat;
            let name = if csat { "csat" } else { "ceqv" };
            if args.reduce {
                let d = malcev_for(&alg, d)?;
                let p = if csat {
                    csat_to_progcsat(&alg, &d, &eq)?
                } else {
                    ceqv_to_progcsat(&alg, &d, &eq)?
                };
                let r = solve_program(&alg, &p)?;
                let decoded = match &r.status {
                    Status::Sat { witness } => {
                        Some(decode_assignment(&alg, &d, eq.vars(), witness))
                    }
                    _ => None,
                };
                json!({ "problem": name, "via": "progcsat", "program_bits": p.n, "result": r, "assignment": decoded })
            } else if args.meet_irreducibles && !csat {
                let lat = budget.lattice(&alg)?;
                json!({ "problem": name, "via": "meet_irreducibles",
                        "result": ceqv_via_meet_irreducibles(&alg, &lat, &eq, budget.scan_limit())? })
            } else if csat {
                json!({ "problem": name, "result": csat_exhaustive(&alg, &eq, budget.scan_limit())? })
            } else {
                json!({ "problem": name, "result": ceqv_exhaustive(&alg, &eq, budget.scan_limit())? })
            }
        }
    };
    Ok((0, pretty(&result)?))
}

fn cmd_gadget(g: Gadget, _budget: Budget) -> Result<(i32, String)> {
    match g {
        Gadget::Lattice { cnf } => {
            let phi = Cnf::parse_dimacs(&read(&cnf)?)?;
            let lat2 = fixtures::lat2();
            let p = cnf_to_lattice_program(&phi)?;
            Ok((0, pretty(&p.to_file(&lat2))?))
        }
        Gadget::Twoprime { algebra, cnf } => {
            let phi = Cnf::parse_dimacs(&read(&cnf)?)?;
            let (alg, _) = load_algebra(&algebra)?;
            let lat = all_congruences_bounded(&alg, alg.size.max(DEFAULT_CON_BOUND))?;
            match find_two_prime_witness(&alg, &lat)? {
                WitnessSearch::Found(w) => {
                    let p = build_two_prime_program(&alg, &lat, &w, &phi)?;
                    Ok((
                        0,
                        pretty(&json!({ "witness": w, "program": p.to_file(&alg) }))?,
                    ))
                }
                failed @ WitnessSearch::Failed { .. } => Ok((1, pretty(&failed)?)),
            }
        }
        Gadget::Search { max_size } => Ok((0, pretty(&fixture_search(max_size)?)?)),
    }
}

fn cmd_fixtures() -> Result<(i32, String)> {
    let mut rows = Vec::new();
    let mut ok = true;
    for &name in fixtures::NAMES {
        let f = fixtures::load(name)?;
        let pass = fixtures::self_test(&f);
        ok &= pass;
        rows.push(json!({
            "name": name,
            "uri": format!("fixtures:{name}"),
            "size": f.algebra.size,
            "ops": f.algebra.ops.iter().map(|o| json!({ "name": o.name, "arity": o.arity })).collect::<Vec<Value>>(),
            "congruences": f.lattice.elements.len(),
            "malcev": f.malcev.as_ref().map(|d| d.render(&f.algebra)),
            "self_test": pass,
        }));
    }
    Ok((if ok { 0 } else { 1 }, pretty(&rows)?))
}
