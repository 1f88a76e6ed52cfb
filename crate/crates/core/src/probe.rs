//! Seeded generation of class members, chain fuzzing, falsification search
//! and tightness reporting.
//!
//! # Reproducibility
//!
//! All randomness comes from `ChaCha8Rng` seeded through
//! `seed_from_u64`. Trial `i` of a fuzz run with master seed `s` uses
//!
//! ```text
//! trial_seed(s, i) = splitmix64(s + i * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `splitmix64` first adds the golden-ratio increment, so the trial
//! seeds are the successive outputs of a SplitMix64 stream started at `s`.
//! The second function of product chains uses `splitmix64(trial_seed)`.
//! Trials run in parallel but are collected in index order, so reports do
//! not depend on scheduling.
//!
//! # Closure rules
//!
//! Generated functions are members of their class by construction:
//!
//! * atoms `(t - r)^2`, `exp(k t)`, `|t - r|` and `1` are nonnegative and
//!   convex, and nonnegative combinations of them stay so;
//! * a product `phi(x) psi(y)` of nonnegative convex atoms has convex partial
//!   maps, since each is a nonnegative multiple of one factor;
//! * nonnegative convex functions are P-functions, as are nonnegative
//!   monotone ones (`sqrt(t - r)` with `r` left of the domain) and the
//!   maximum of two P-functions;
//! * every P-function is a Godunova-Levin function, and that class is closed
//!   under positive scaling;
//! * the joint classes compose the atoms with affine forms
//!   `alpha x + beta y + gamma`; `sqrt` of a positive affine form is
//!   monotone along every segment, hence a joint P-function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::{evaluate, ChainError, ChainId, ChainOptions, ChainReport, ChainVerdict};
use crate::classes::{combine, ClassTag, Family, Scope, Tolerance, Witness, WitnessKind};
use crate::domain::{Domain, Interval, Rect};
use crate::expr::{parse, BinOp, Expr, Func, Var};
use crate::func::Bivariate;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    splitmix64(master.wrapping_add((trial as u64).wrapping_mul(GOLDEN)))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("atom count must be in 1..=8, got {0}")]
    AtomCount(usize),
    #[error("coefficient range must satisfy 0 < lo <= hi, got [{0}, {1}]")]
    CoefficientRange(f64, f64),
    #[error("class `{class}` needs {expected}")]
    DomainMismatch {
        class: ClassTag,
        expected: &'static str,
    },
    #[error("budget must be at least 1")]
    Budget,
    #[error("chain has inconclusive links; no reliable minimum slack")]
    Inconclusive,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for CoefficientRange {
    fn default() -> Self {
        CoefficientRange { lo: 0.5, hi: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub class: ClassTag,
    pub seed: u64,
    pub atom_count: usize,
    pub coefficient_range: CoefficientRange,
    pub domain: Domain,
}

impl GenSpec {
    pub fn new(class: ClassTag, seed: u64, domain: Domain) -> Self {
        GenSpec {
            class,
            seed,
            atom_count: 3,
            coefficient_range: CoefficientRange::default(),
            domain,
        }
    }

    fn validate(&self) -> Result<(), ProbeError> {
        if !(1..=8).contains(&self.atom_count) {
            return Err(ProbeError::AtomCount(self.atom_count));
        }
        let CoefficientRange { lo, hi } = self.coefficient_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ProbeError::CoefficientRange(lo, hi));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub class: ClassTag,
    pub construction: String,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn num(v: f64) -> Expr {
    Expr::num(v)
}

fn mul(a: Expr, b: Expr) -> Expr {
    Expr::binary(BinOp::Mul, a, b)
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::binary(BinOp::Add, a, b)
}

fn call(f: Func, args: Vec<Expr>) -> Expr {
    Expr::Call(f, args)
}

/// `t - r`, written without a negative literal.
fn shift(t: Expr, r: f64) -> Expr {
    if r == 0.0 {
        t
    } else if r > 0.0 {
        Expr::binary(BinOp::Sub, t, num(r))
    } else {
        add(t, num(-r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AtomKind {
    Square,
    Exp,
    Abs,
    One,
    Sqrt,
}

impl AtomKind {
    fn name(self) -> &'static str {
        match self {
            AtomKind::Square => "square",
            AtomKind::Exp => "exp",
            AtomKind::Abs => "abs",
            AtomKind::One => "const",
            AtomKind::Sqrt => "sqrt",
        }
    }
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    spec: &'a GenSpec,
    family: Family,
    used: Vec<AtomKind>,
    took_max: bool,
}

impl Builder<'_> {
    fn coefficient(&mut self) -> f64 {
        let CoefficientRange { lo, hi } = self.spec.coefficient_range;
        let c = round_to(self.rng.gen_range(lo..=hi), 3);
        c.clamp(lo, hi).max(f64::MIN_POSITIVE)
    }

    fn kind(&mut self) -> AtomKind {
        let n = if self.family == Family::Convex { 4 } else { 5 };
        let k = match self.rng.gen_range(0..n) {
            0 => AtomKind::Square,
            1 => AtomKind::Exp,
            2 => AtomKind::Abs,
            3 => AtomKind::One,
            _ => AtomKind::Sqrt,
        };
        if !self.used.contains(&k) {
            self.used.push(k);
        }
        k
    }

    /// Nonnegative atom of one variable on `iv`. Kinks of `|t - r|` sit on
    /// the dyadic points `a + (b - a) k / 8`, which are panel boundaries of
    /// the default quadrature.
    fn atom(&mut self, t: Var, iv: Interval) -> Expr {
        let v = Expr::Var(t);
        let w = iv.width();
        match self.kind() {
            AtomKind::Square => {
                let r = round_to(self.rng.gen_range(iv.a..=iv.b), 4);
                Expr::binary(BinOp::Pow, shift(v, r), num(2.0))
            }
            AtomKind::Exp => {
                let k = round_to(self.rng.gen_range(-2.0..=2.0), 2);
                if k == 0.0 {
                    num(1.0)
                } else {
                    call(Func::Exp, vec![mul(num(k), v)])
                }
            }
            AtomKind::Abs => {
                let r = iv.a + w * self.rng.gen_range(0..=8) as f64 / 8.0;
                call(Func::Abs, vec![shift(v, r)])
            }
            AtomKind::One => num(1.0),
            AtomKind::Sqrt => {
                let margin = w * self.rng.gen_range(0.1..0.5);
                let r = ((iv.a - margin) * 1e4).floor() / 1e4;
                call(Func::Sqrt, vec![shift(v, r)])
            }
        }
    }

    /// `alpha x + beta y + gamma` with the given minimum on `r`.
    fn affine(&mut self, r: Rect, floor: Option<f64>) -> Expr {
        let alpha = round_to(self.rng.gen_range(-1.0..=1.0), 2);
        let beta = round_to(self.rng.gen_range(-1.0..=1.0), 2);
        let lo = alpha * if alpha >= 0.0 { r.a } else { r.b }
            + beta * if beta >= 0.0 { r.c } else { r.d };
        let gamma = match floor {
            Some(m) => ((m - lo) * 1e4).ceil() / 1e4,
            None => {
                let hi = alpha * if alpha >= 0.0 { r.b } else { r.a }
                    + beta * if beta >= 0.0 { r.d } else { r.c };
                -round_to(self.rng.gen_range(lo..=hi), 4)
            }
        };
        let lin = add(
            mul(num(alpha), Expr::Var(Var::X)),
            mul(num(beta), Expr::Var(Var::Y)),
        );
        if gamma >= 0.0 {
            add(lin, num(gamma))
        } else {
            Expr::binary(BinOp::Sub, lin, num(-gamma))
        }
    }

    fn joint_atom(&mut self, r: Rect) -> Expr {
        match self.kind() {
            AtomKind::Square => Expr::binary(BinOp::Pow, self.affine(r, None), num(2.0)),
            AtomKind::Exp => call(Func::Exp, vec![self.affine(r, None)]),
            AtomKind::Abs => call(Func::Abs, vec![self.affine(r, None)]),
            AtomKind::One => num(1.0),
            AtomKind::Sqrt => {
                let margin = self.rng.gen_range(0.1..0.5);
                call(Func::Sqrt, vec![self.affine(r, Some(margin))])
            }
        }
    }

    fn term(&mut self, scope: Scope) -> Expr {
        let c = num(self.coefficient());
        match (scope, self.spec.domain) {
            (Scope::OneDim, Domain::Interval(iv)) => mul(c, self.atom(Var::X, iv)),
            (Scope::Coordinated, Domain::Rect(r)) => {
                let phi = self.atom(Var::X, r.x_range());
                let psi = self.atom(Var::Y, r.y_range());
                mul(mul(c, phi), psi)
            }
            (Scope::Joint, Domain::Rect(r)) => mul(c, self.joint_atom(r)),
            _ => unreachable!("domain validated against scope"),
        }
    }

    fn sum_of_terms(&mut self, count: usize, scope: Scope) -> Expr {
        let mut e = self.term(scope);
        for _ in 1..count {
            let t = self.term(scope);
            e = add(e, t);
        }
        e
    }

    fn member(&mut self) -> Expr {
        let scope = self.spec.class.scope();
        let n = self.spec.atom_count;
        let maxed = self.family != Family::Convex && n >= 2 && self.rng.gen_bool(0.3);
        let body = if maxed {
            self.took_max = true;
            let k = self.rng.gen_range(1..n);
            let h1 = self.sum_of_terms(k, scope);
            let h2 = self.sum_of_terms(n - k, scope);
            call(Func::Max, vec![h1, h2])
        } else {
            self.sum_of_terms(n, scope)
        };
        if self.family == Family::GodunovaLevin {
            mul(num(self.coefficient()), body)
        } else {
            body
        }
    }
}

/// Generates a member of `spec.class` on `spec.domain`. The returned
/// expression is the parse of its own printed form.
pub fn gen_function(spec: &GenSpec) -> Result<(Expr, Certificate), ProbeError> {
    spec.validate()?;
    let class = spec.class;
    match (class.dimension(), spec.domain) {
        (1, Domain::Interval(_)) | (2, Domain::Rect(_)) => {}
        (1, _) => {
            return Err(ProbeError::DomainMismatch {
                class,
                expected: "an interval",
            })
        }
        _ => {
            return Err(ProbeError::DomainMismatch {
                class,
                expected: "a rectangle",
            })
        }
    }
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec,
        family: class.family(),
        used: Vec::new(),
        took_max: false,
    };
    let built = b.member();
    let expr = parse(&built.to_string()).expect("generated text is in the grammar");

    let atoms: Vec<&str> = b.used.iter().map(|k| k.name()).collect();
    let shape = match class.scope() {
        Scope::OneDim => "nonnegative combination of atoms",
        Scope::Coordinated => "nonnegative combination of products phi(x)*psi(y) of atoms",
        Scope::Joint => "nonnegative combination of atoms of affine forms",
    };
    let mut construction = format!("{shape} {{{}}}", atoms.join(", "));
    if b.took_max {
        construction.push_str("; max of two P members");
    }
    if b.family == Family::GodunovaLevin {
        construction.push_str("; P member times a positive scale (P within GL)");
    }
    Ok((
        expr,
        Certificate {
            class,
            construction,
        },
    ))
}

/// `f(x, y) + f(y, x)`.
pub fn symmetrize(f: &Expr) -> Expr {
    fn swap(e: &Expr) -> Expr {
        match e {
            Expr::Var(Var::X) => Expr::Var(Var::Y),
            Expr::Var(Var::Y) => Expr::Var(Var::X),
            Expr::Number(v) => Expr::Number(*v),
            Expr::Neg(a) => Expr::Neg(Box::new(swap(a))),
            Expr::Binary(op, a, b) => Expr::binary(*op, swap(a), swap(b)),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(swap).collect()),
        }
    }
    add(f.clone(), swap(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub atom_count: usize,
    pub coefficient_range: CoefficientRange,
    /// Defaults to `[0, 1]` or `[0, 1]²` by chain.
    pub domain: Option<Domain>,
    /// Also run the constant and affine injection trials.
    pub injections: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            atom_count: 3,
            coefficient_range: CoefficientRange::default(),
            domain: None,
            injections: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Origin {
    Seeded { trial: usize, seed: u64 },
    Injection { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub origin: Origin,
    pub f: String,
    pub g: Option<String>,
    pub report: ChainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionFailure {
    pub origin: Origin,
    pub f: String,
    pub g: Option<String>,
    pub classes: Vec<ClassTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinSlack {
    pub origin: Origin,
    pub link: String,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub chain: ChainId,
    pub master_seed: u64,
    pub trials: usize,
    pub domain: Domain,
    pub violations: Vec<Violation>,
    pub precondition_failures: Vec<PreconditionFailure>,
    /// Tightest conclusive link over all trials and injections.
    pub min_slack: Option<MinSlack>,
    pub inconclusive_count: usize,
    pub injections: Vec<String>,
}

fn default_domain(chain: ChainId) -> Domain {
    if chain.takes_interval() {
        Interval::unit().into()
    } else {
        Rect::unit().into()
    }
}

/// Square the sampled classes live on for chains stated on `[a, b]²`.
fn class_domain(chain: ChainId, domain: Domain) -> Domain {
    match domain {
        Domain::Interval(iv) if !chain.univariate() => iv.square().into(),
        d => d,
    }
}

struct Trial {
    origin: Origin,
    f: String,
    g: Option<String>,
    report: ChainReport,
}

fn generate_for(
    chain: ChainId,
    class: ClassTag,
    seed: u64,
    cfg: &FuzzConfig,
    domain: Domain,
) -> Result<Expr, ProbeError> {
    let spec = GenSpec {
        class,
        seed,
        atom_count: cfg.atom_count,
        coefficient_range: cfg.coefficient_range,
        domain: class_domain(chain, domain),
    };
    let (f, _) = gen_function(&spec)?;
    Ok(if chain.requires_symmetry() {
        parse(&symmetrize(&f).to_string()).expect("printed expression parses")
    } else {
        f
    })
}

fn injections(chain: ChainId, domain: Domain) -> Vec<(String, Expr, Option<Expr>)> {
    let affine = match class_domain(chain, domain) {
        Domain::Interval(iv) => format!("x + {}", round_to(1.0 - iv.a, 12)),
        Domain::Rect(r) => format!("x + y + {}", round_to(1.0 - r.a - r.c, 12)),
    };
    let one = parse("1").unwrap();
    let aff = parse(&affine).expect("affine injection parses");
    let g = chain.needs_g().then(|| one.clone());
    vec![
        ("constant".to_string(), one.clone(), g.clone()),
        ("affine".to_string(), aff, g),
    ]
}

/// Runs `trials` seeded trials of `chain` on certified members of its
/// hypothesis classes, plus the injection trials.
pub fn fuzz_chain(
    chain: ChainId,
    cfg: &FuzzConfig,
    trials: usize,
    master_seed: u64,
    opts: &ChainOptions,
) -> Result<FuzzReport, ProbeError> {
    let domain = cfg.domain.unwrap_or_else(|| default_domain(chain));
    if chain.takes_interval() != matches!(domain, Domain::Interval(_)) {
        return Err(ChainError::DomainMismatch {
            chain,
            expected: if chain.takes_interval() {
                "an interval a,b"
            } else {
                "a rectangle a,b,c,d"
            },
        }
        .into());
    }
    let (f_class, g_class) = chain.hypotheses();

    let seeded: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Trial, ProbeError> {
            let seed = trial_seed(master_seed, i);
            let f = generate_for(chain, f_class, seed, cfg, domain)?;
            let g = match g_class {
                Some(c) => Some(generate_for(chain, c, splitmix64(seed), cfg, domain)?),
                None => None,
            };
            let report = evaluate(chain, &f, g.as_ref(), domain, opts)?;
            Ok(Trial {
                origin: Origin::Seeded { trial: i, seed },
                f: f.to_string(),
                g: g.map(|g| g.to_string()),
                report,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut all = seeded;
    let mut injection_names = Vec::new();
    if cfg.injections {
        for (name, f, g) in injections(chain, domain) {
            let report = evaluate(chain, &f, g.as_ref(), domain, opts)?;
            all.push(Trial {
                origin: Origin::Injection { name: name.clone() },
                f: f.to_string(),
                g: g.map(|g| g.to_string()),
                report,
            });
            injection_names.push(name);
        }
    }

    let mut out = FuzzReport {
        chain,
        master_seed,
        trials,
        domain,
        violations: Vec::new(),
        precondition_failures: Vec::new(),
        min_slack: None,
        inconclusive_count: 0,
        injections: injection_names,
    };
    for t in all {
        let r = &t.report;
        if r.verdict == ChainVerdict::Inconclusive {
            out.inconclusive_count += 1;
        }
        for link in r.links.iter().filter(|l| !l.inconclusive) {
            let slack = link.slack.expect("conclusive links have a slack");
            if out.min_slack.as_ref().is_none_or(|m| slack < m.slack) {
                out.min_slack = Some(MinSlack {
                    origin: t.origin.clone(),
                    link: r.link_label(link),
                    slack,
                });
            }
        }
        if r.precondition_failed {
            let mut classes: Vec<ClassTag> = r
                .class_preconditions
                .iter()
                .filter(|m| m.verdict == crate::classes::Verdict::Violated)
                .map(|m| m.class)
                .collect();
            if r.symmetry_violation.is_some() {
                classes.push(f_class);
            }
            out.precondition_failures.push(PreconditionFailure {
                origin: t.origin.clone(),
                f: t.f.clone(),
                g: t.g.clone(),
                classes,
            });
        }
        if r.verdict == ChainVerdict::Violated {
            out.violations.push(Violation {
                origin: t.origin,
                f: t.f,
                g: t.g,
                report: t.report,
            });
        }
    }
    Ok(out)
}

/// A candidate sample: two points and `λ`. One-dimensional probes leave the
/// second coordinate at its lower bound.
#[derive(Debug, Clone, Copy)]
struct Probe {
    p: [f64; 2],
    q: [f64; 2],
    lambda: f64,
}

struct Search<'a> {
    f: &'a Expr,
    family: Family,
    scope: Scope,
    lo: [f64; 2],
    hi: [f64; 2],
    tol: Tolerance,
    lambda_range: (f64, f64),
}

impl Search<'_> {
    fn value(&self, p: [f64; 2]) -> Option<f64> {
        match self.scope {
            Scope::OneDim => crate::func::Univariate::at(self.f, p[0]).ok(),
            _ => self.f.at_xy(p[0], p[1]).ok(),
        }
    }

    fn points(&self, p: [f64; 2]) -> Vec<f64> {
        match self.scope {
            Scope::OneDim => vec![p[0]],
            _ => p.to_vec(),
        }
    }

    /// The worst violation at this probe, sign faults included.
    fn score(&self, s: &Probe) -> Option<Witness> {
        let fp = self.value(s.p)?;
        let fq = self.value(s.q)?;
        let m = [
            combine(s.p[0], s.q[0], s.lambda),
            combine(s.p[1], s.q[1], s.lambda),
        ];
        let fm = self.value(m)?;
        let rhs = self.family.bound(fp, fq, s.lambda);
        let mut best = Witness {
            kind: WitnessKind::Inequality,
            points: vec![self.points(s.p), self.points(s.q)],
            lambda: Some(s.lambda),
            lhs: fm,
            rhs,
            violation: self.tol.excess(fm, rhs),
        };
        if self.family.requires_nonnegativity() {
            for (pt, v) in [(s.p, fp), (s.q, fq)] {
                let excess = self.tol.excess(0.0, v);
                if excess > best.violation {
                    best = Witness {
                        kind: WitnessKind::Negative,
                        points: vec![self.points(pt)],
                        lambda: None,
                        lhs: 0.0,
                        rhs: v,
                        violation: excess,
                    };
                }
            }
        }
        Some(best)
    }

    fn coord(&mut self, rng: &mut ChaCha8Rng, axis: usize) -> f64 {
        if rng.gen_bool(0.1) {
            if rng.gen_bool(0.5) {
                self.lo[axis]
            } else {
                self.hi[axis]
            }
        } else {
            rng.gen_range(self.lo[axis]..=self.hi[axis])
        }
    }

    fn random(&mut self, rng: &mut ChaCha8Rng) -> Probe {
        let mut p = [self.coord(rng, 0), self.coord(rng, 1)];
        let mut q = [self.coord(rng, 0), self.coord(rng, 1)];
        if self.scope == Scope::Coordinated {
            // Both points on one line parallel to an axis.
            let axis = rng.gen_range(0..2);
            q[axis] = p[axis];
        }
        if self.scope == Scope::OneDim {
            p[1] = self.lo[1];
            q[1] = self.lo[1];
        }
        let (l0, l1) = self.lambda_range;
        Probe {
            p,
            q,
            lambda: rng.gen_range(l0..=l1),
        }
    }

    fn clamp(&self, s: Probe) -> Probe {
        let c = |v: f64, i: usize| v.clamp(self.lo[i], self.hi[i]);
        Probe {
            p: [c(s.p[0], 0), c(s.p[1], 1)],
            q: [c(s.q[0], 0), c(s.q[1], 1)],
            lambda: s.lambda.clamp(self.lambda_range.0, self.lambda_range.1),
        }
    }

    /// Parameters that may move without leaving the sampled family.
    fn free_params(&self, s: &Probe) -> Vec<usize> {
        // 0,1: p; 2,3: q; 4: λ
        match self.scope {
            Scope::OneDim => vec![0, 2, 4],
            Scope::Joint => vec![0, 1, 2, 3, 4],
            Scope::Coordinated if s.p[0] == s.q[0] => vec![1, 3, 4],
            Scope::Coordinated => vec![0, 2, 4],
        }
    }
}

fn nudge(s: &Probe, param: usize, delta: f64) -> Probe {
    let mut t = *s;
    match param {
        0 => t.p[0] += delta,
        1 => t.p[1] += delta,
        2 => t.q[0] += delta,
        3 => t.q[1] += delta,
        _ => t.lambda += delta,
    }
    t
}

/// Random search for a violation of `class` on `domain`, followed by three
/// rounds of coordinate-wise zoom (step shrinking tenfold per round, five
/// offsets per parameter) around the worst sample.
pub fn falsify_membership(
    f: &Expr,
    domain: Domain,
    class: ClassTag,
    budget: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<Option<Witness>, ProbeError> {
    if budget == 0 {
        return Err(ProbeError::Budget);
    }
    let (lo, hi) = match (class.dimension(), domain) {
        (1, Domain::Interval(iv)) => ([iv.a, 0.0], [iv.b, 0.0]),
        (2, Domain::Rect(r)) => ([r.a, r.c], [r.b, r.d]),
        (1, _) => {
            return Err(ProbeError::DomainMismatch {
                class,
                expected: "an interval",
            })
        }
        _ => {
            return Err(ProbeError::DomainMismatch {
                class,
                expected: "a rectangle",
            })
        }
    };
    let family = class.family();
    let lambda_range = if family == Family::GodunovaLevin {
        (1e-3, 1.0 - 1e-3)
    } else {
        (0.0, 1.0)
    };
    let mut search = Search {
        f,
        family,
        scope: class.scope(),
        lo,
        hi,
        tol,
        lambda_range,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Probe, Witness)> = None;
    for _ in 0..budget {
        let s = search.random(&mut rng);
        if let Some(w) = search.score(&s) {
            if best.as_ref().is_none_or(|(_, b)| w.violation > b.violation) {
                best = Some((s, w));
            }
        }
    }
    let Some((mut at, mut worst)) = best else {
        return Ok(None);
    };

    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    for round in 1..=3 {
        let coord_step = span / 10f64.powi(round);
        let lambda_step = 0.1 / 10f64.powi(round - 1);
        for param in search.free_params(&at) {
            let step = if param == 4 { lambda_step } else { coord_step };
            for k in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                let cand = search.clamp(nudge(&at, param, k * step));
                let cand = keep_line(&search, &at, cand);
                if let Some(w) = search.score(&cand) {
                    if w.violation > worst.violation {
                        worst = w;
                        at = cand;
                    }
                }
            }
        }
    }
    Ok((worst.violation > 0.0).then_some(worst))
}

/// Coordinated probes must keep both points on one axis-parallel line.
fn keep_line(search: &Search<'_>, before: &Probe, mut cand: Probe) -> Probe {
    if search.scope == Scope::Coordinated {
        if before.p[0] == before.q[0] {
            cand.q[0] = cand.p[0];
        } else {
            cand.q[1] = cand.p[1];
        }
    }
    cand
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackSummary {
    pub link: String,
    pub slack: f64,
    pub terms: Vec<Option<f64>>,
}

/// The tightest link of the chain evaluated on `f` (and `g`).
pub fn min_slack(
    chain: ChainId,
    f: &Expr,
    g: Option<&Expr>,
    domain: Domain,
    opts: &ChainOptions,
) -> Result<SlackSummary, ProbeError> {
    let report = evaluate(chain, f, g, domain, opts)?;
    if report.links.iter().any(|l| l.inconclusive) {
        return Err(ProbeError::Inconclusive);
    }
    let link = report.tightest_link().ok_or(ProbeError::Inconclusive)?;
    Ok(SlackSummary {
        link: report.link_label(link),
        slack: link.slack.unwrap(),
        terms: report.values(),
    })
}
