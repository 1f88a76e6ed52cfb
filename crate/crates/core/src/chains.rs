//! Term-by-term evaluation of the Hadamard-type inequality chains.
//!
//! Each chain is an ordered list of terms `t0 <= t1 <= ... <= tk`. Every
//! term is computed independently (point values, line averages through
//! partial maps, double averages over the rectangle) and each consecutive
//! pair forms a link whose slack is `rhs - lhs`. A link holds when
//!
//! ```text
//! slack >= -(atol + rtol * max(|lhs|, |rhs|) + quad_error(lhs) + quad_error(rhs))
//! ```
//!
//! and is inconclusive when either side depends on an integral that did not
//! converge or on a point that could not be evaluated.
//!
//! Class hypotheses are checked on samples and attached to the report, but
//! the chain is always evaluated: `precondition_failed` marks reports whose
//! function is outside the theorem's class.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{
    check_1d, check_coordinated, check_symmetry, partial_map_x, partial_map_y, CheckOptions,
    ClassTag, MembershipReport, Tolerance, Verdict, Witness,
};
use crate::domain::{Domain, Interval, Rect};
use crate::expr::{EvalError, EvalErrorKind, EvalPoint, Expr};
use crate::func::{Bivariate, Univariate};
use crate::quadrature::{integrate_1d, integrate_2d, QuadConfig, QuadError, QuadResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainId {
    /// `f(m) <= 4/(b-a) ∫ f` for Godunova-Levin `f`.
    #[serde(rename = "hq-1d")]
    Hq1d,
    /// `f(m) <= 2/(b-a) ∫ f <= 2(f(a) + f(b))` for P-functions.
    #[serde(rename = "hp-1d")]
    Hp1d,
    /// `1/(b-a) ∫ fg <= (M + N)/2` for convex `f` and P-function `g`.
    #[serde(rename = "prod-1d")]
    Prod1d,
    /// The five-term chain for functions convex on the co-ordinates.
    #[serde(rename = "coord-convex")]
    CoordConvex,
    /// The three-term chain for co-ordinated Godunova-Levin functions.
    #[serde(rename = "coord-gl")]
    CoordGl,
    /// `CoordGl` on a square with the two midline integrals merged.
    #[serde(rename = "coord-gl-square")]
    CoordGlSquare,
    /// Symmetric specialisation with the printed constant `1/4`.
    #[serde(rename = "coord-gl-sym-stated")]
    CoordGlSymStated,
    /// Symmetric specialisation derived from `CoordGl` with equal midlines.
    #[serde(rename = "coord-gl-sym-corrected")]
    CoordGlSymCorrected,
    /// The four-term chain for co-ordinated P-functions.
    #[serde(rename = "coord-p")]
    CoordP,
    /// Product bound `(L + M + N)/4` for co-ordinated convex `f` and
    /// co-ordinated P-function `g`.
    #[serde(rename = "prod-coord")]
    ProdCoord,
}

impl ChainId {
    pub const ALL: [ChainId; 10] = [
        ChainId::Hq1d,
        ChainId::Hp1d,
        ChainId::Prod1d,
        ChainId::CoordConvex,
        ChainId::CoordGl,
        ChainId::CoordGlSquare,
        ChainId::CoordGlSymStated,
        ChainId::CoordGlSymCorrected,
        ChainId::CoordP,
        ChainId::ProdCoord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChainId::Hq1d => "hq-1d",
            ChainId::Hp1d => "hp-1d",
            ChainId::Prod1d => "prod-1d",
            ChainId::CoordConvex => "coord-convex",
            ChainId::CoordGl => "coord-gl",
            ChainId::CoordGlSquare => "coord-gl-square",
            ChainId::CoordGlSymStated => "coord-gl-sym-stated",
            ChainId::CoordGlSymCorrected => "coord-gl-sym-corrected",
            ChainId::CoordP => "coord-p",
            ChainId::ProdCoord => "prod-coord",
        }
    }

    pub fn from_name(name: &str) -> Option<ChainId> {
        ChainId::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Chains over `[a, b]` (including the square-domain ones) take an
    /// interval; the rest take a rectangle.
    pub fn takes_interval(self) -> bool {
        matches!(
            self,
            ChainId::Hq1d
                | ChainId::Hp1d
                | ChainId::Prod1d
                | ChainId::CoordGlSquare
                | ChainId::CoordGlSymStated
                | ChainId::CoordGlSymCorrected
        )
    }

    /// Whether the functions are of `x` only.
    pub fn univariate(self) -> bool {
        matches!(self, ChainId::Hq1d | ChainId::Hp1d | ChainId::Prod1d)
    }

    pub fn needs_g(self) -> bool {
        matches!(self, ChainId::Prod1d | ChainId::ProdCoord)
    }

    /// The class hypotheses of the underlying theorem: `(class of f, class of g)`.
    pub fn hypotheses(self) -> (ClassTag, Option<ClassTag>) {
        match self {
            ChainId::Hq1d => (ClassTag::GL1D, None),
            ChainId::Hp1d => (ClassTag::P1D, None),
            ChainId::Prod1d => (ClassTag::Convex1D, Some(ClassTag::P1D)),
            ChainId::CoordConvex => (ClassTag::CoordConvex, None),
            ChainId::CoordGl
            | ChainId::CoordGlSquare
            | ChainId::CoordGlSymStated
            | ChainId::CoordGlSymCorrected => (ClassTag::CoordGL, None),
            ChainId::CoordP => (ClassTag::CoordP, None),
            ChainId::ProdCoord => (ClassTag::CoordConvex, Some(ClassTag::CoordP)),
        }
    }

    pub fn requires_symmetry(self) -> bool {
        matches!(
            self,
            ChainId::CoordGlSymStated | ChainId::CoordGlSymCorrected
        )
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One term of a chain, or a named intermediate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    /// `None` when the term could not be evaluated.
    pub value: Option<f64>,
    pub quad_error: f64,
    /// All integrals behind the term converged and all points evaluated.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub lhs_index: usize,
    pub rhs_index: usize,
    pub slack: Option<f64>,
    /// Total allowance: comparison tolerance plus both quadrature errors.
    pub allowance: f64,
    pub holds: bool,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainVerdict {
    Holds,
    Violated,
    Inconclusive,
}

impl fmt::Display for ChainVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainVerdict::Holds => "holds",
            ChainVerdict::Violated => "violated",
            ChainVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: ChainId,
    pub domain: Domain,
    pub terms: Vec<Term>,
    pub links: Vec<Link>,
    pub details: Vec<Term>,
    pub class_preconditions: Vec<MembershipReport>,
    pub precondition_failed: bool,
    pub symmetry_violation: Option<Witness>,
    pub verdict: ChainVerdict,
}

impl ChainReport {
    pub fn term(&self, label: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.label == label)
    }

    pub fn detail(&self, label: &str) -> Option<&Term> {
        self.details.iter().find(|t| t.label == label)
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.terms.iter().map(|t| t.value).collect()
    }

    /// `"lhs <= rhs"` using term labels.
    pub fn link_label(&self, link: &Link) -> String {
        format!(
            "{} <= {}",
            self.terms[link.lhs_index].label, self.terms[link.rhs_index].label
        )
    }

    /// The link with the smallest slack, ignoring links without a value.
    pub fn tightest_link(&self) -> Option<&Link> {
        self.links
            .iter()
            .filter(|l| l.slack.is_some())
            .min_by(|a, b| a.slack.unwrap().total_cmp(&b.slack.unwrap()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub quad: QuadConfig,
    pub check: CheckOptions,
    /// Run the sampled class checks of the theorem's hypotheses.
    pub preconditions: bool,
    /// Add sampled intermediate checks to `details` where available.
    pub verbose: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            quad: QuadConfig::default(),
            check: CheckOptions::default(),
            preconditions: true,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("chain `{chain}` expects {expected}")]
    DomainMismatch {
        chain: ChainId,
        expected: &'static str,
    },
    #[error("chain `{0}` needs a second function g")]
    MissingG(ChainId),
    #[error("chain `{0}` takes a single function")]
    UnexpectedG(ChainId),
    #[error("chain `{0}` takes functions of x only")]
    NotUnivariate(ChainId),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// A value with its accumulated quadrature error.
#[derive(Debug, Clone, Copy)]
struct Q {
    value: Option<f64>,
    err: f64,
    ok: bool,
}

impl Q {
    fn exact(v: f64) -> Q {
        Q {
            value: Some(v),
            err: 0.0,
            ok: true,
        }
    }

    fn point(r: Result<f64, EvalError>) -> Q {
        match r {
            Ok(v) => Q::exact(v),
            Err(_) => Q {
                value: None,
                err: 0.0,
                ok: false,
            },
        }
    }

    fn integral(r: Result<QuadResult, QuadError>) -> Q {
        match r {
            Ok(q) => Q {
                value: Some(q.value),
                err: q.error_estimate,
                ok: q.converged,
            },
            Err(_) => Q {
                value: None,
                err: 0.0,
                ok: false,
            },
        }
    }

    fn scale(self, k: f64) -> Q {
        Q {
            value: self.value.map(|v| v * k),
            err: self.err * k.abs(),
            ok: self.ok,
        }
    }

    fn term(self, label: &str) -> Term {
        Term {
            label: label.to_string(),
            value: self.value,
            quad_error: self.err,
            converged: self.ok,
        }
    }
}

impl std::ops::Add for Q {
    type Output = Q;
    fn add(self, o: Q) -> Q {
        Q {
            value: self.value.zip(o.value).map(|(a, b)| a + b),
            err: self.err + o.err,
            ok: self.ok && o.ok,
        }
    }
}

fn sum(qs: &[Q]) -> Q {
    qs.iter().skip(1).fold(qs[0], |acc, &q| acc + q)
}

fn mean_1d<F: Univariate + ?Sized>(f: &F, iv: Interval, cfg: &QuadConfig) -> Q {
    Q::integral(integrate_1d(f, iv, cfg)).scale(1.0 / iv.width())
}

/// Average of `f(x, y0)` over `x ∈ [a, b]`.
fn mean_along_x<F: Bivariate + ?Sized>(f: &F, r: Rect, y0: f64, cfg: &QuadConfig) -> Q {
    mean_1d(&partial_map_y(f, y0), r.x_range(), cfg)
}

/// Average of `f(x0, y)` over `y ∈ [c, d]`.
fn mean_along_y<F: Bivariate + ?Sized>(f: &F, r: Rect, x0: f64, cfg: &QuadConfig) -> Q {
    mean_1d(&partial_map_x(f, x0), r.y_range(), cfg)
}

fn double_mean<F: Bivariate + ?Sized>(f: &F, r: Rect, cfg: &QuadConfig) -> Q {
    Q::integral(integrate_2d(f, r, cfg)).scale(1.0 / r.area())
}

fn finite_or(v: f64, point: EvalPoint) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError {
            kind: EvalErrorKind::Overflow,
            point,
        })
    }
}

fn product1<'a, F, G>(f: &'a F, g: &'a G) -> impl Univariate + 'a
where
    F: Univariate + ?Sized,
    G: Univariate + ?Sized,
{
    move |x: f64| finite_or(f.at(x)? * g.at(x)?, EvalPoint::x(x))
}

fn product2<'a, F, G>(f: &'a F, g: &'a G) -> impl Bivariate + 'a
where
    F: Bivariate + ?Sized,
    G: Bivariate + ?Sized,
{
    move |x: f64, y: f64| finite_or(f.at_xy(x, y)? * g.at_xy(x, y)?, EvalPoint::xy(x, y))
}

fn link(lhs: &Term, rhs: &Term, lhs_index: usize, tol: Tolerance) -> Link {
    let slack = lhs.value.zip(rhs.value).map(|(l, r)| r - l);
    let allowance = match (lhs.value, rhs.value) {
        (Some(l), Some(r)) => tol.allowance(l, r) + lhs.quad_error + rhs.quad_error,
        _ => f64::NAN,
    };
    let holds = slack.is_some_and(|s| s >= -allowance);
    Link {
        lhs_index,
        rhs_index: lhs_index + 1,
        slack,
        allowance: if allowance.is_nan() { 0.0 } else { allowance },
        holds,
        inconclusive: slack.is_none() || !lhs.converged || !rhs.converged,
    }
}

struct Assembly {
    chain: ChainId,
    domain: Domain,
    terms: Vec<Term>,
    details: Vec<Term>,
    preconditions: Vec<MembershipReport>,
    symmetry_violation: Option<Witness>,
}

impl Assembly {
    fn finish(self, tol: Tolerance) -> ChainReport {
        let links: Vec<Link> = self
            .terms
            .windows(2)
            .enumerate()
            .map(|(i, w)| link(&w[0], &w[1], i, tol))
            .collect();
        let verdict = if links.iter().any(|l| !l.holds && !l.inconclusive) {
            ChainVerdict::Violated
        } else if links.iter().any(|l| l.inconclusive) {
            ChainVerdict::Inconclusive
        } else {
            ChainVerdict::Holds
        };
        let precondition_failed = self
            .preconditions
            .iter()
            .any(|m| m.verdict == Verdict::Violated)
            || self.symmetry_violation.is_some();
        ChainReport {
            chain: self.chain,
            domain: self.domain,
            terms: self.terms,
            links,
            details: self.details,
            class_preconditions: self.preconditions,
            precondition_failed,
            symmetry_violation: self.symmetry_violation,
            verdict,
        }
    }
}

fn pre_1d<F: Univariate + ?Sized>(
    f: &F,
    iv: Interval,
    class: ClassTag,
    opts: &ChainOptions,
) -> Option<MembershipReport> {
    opts.preconditions
        .then(|| check_1d(f, iv, class, &opts.check).expect("one-dimensional class"))
}

fn pre_coord<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    class: ClassTag,
    opts: &ChainOptions,
) -> Option<MembershipReport> {
    opts.preconditions
        .then(|| check_coordinated(f, r, class, &opts.check).expect("coordinated class"))
}

/// `[f((a+b)/2), 4/(b-a) ∫ f]`.
pub fn eval_hq_1d<F: Univariate + ?Sized>(
    f: &F,
    iv: Interval,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    opts.quad.validate()?;
    let terms = vec![
        Q::point(f.at(iv.mid())).term("f_mid"),
        mean_1d(f, iv, &opts.quad).scale(4.0).term("mean_x4"),
    ];
    Ok(Assembly {
        chain: ChainId::Hq1d,
        domain: iv.into(),
        terms,
        details: vec![],
        preconditions: pre_1d(f, iv, ClassTag::GL1D, opts).into_iter().collect(),
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// `[f((a+b)/2), 2/(b-a) ∫ f, 2(f(a) + f(b))]`.
pub fn eval_hp_1d<F: Univariate + ?Sized>(
    f: &F,
    iv: Interval,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    opts.quad.validate()?;
    let ends = Q::point(f.at(iv.a)) + Q::point(f.at(iv.b));
    let terms = vec![
        Q::point(f.at(iv.mid())).term("f_mid"),
        mean_1d(f, iv, &opts.quad).scale(2.0).term("mean_x2"),
        ends.scale(2.0).term("endpoint_sum_x2"),
    ];
    Ok(Assembly {
        chain: ChainId::Hp1d,
        domain: iv.into(),
        terms,
        details: vec![],
        preconditions: pre_1d(f, iv, ClassTag::P1D, opts).into_iter().collect(),
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// `[1/(b-a) ∫ fg, (M + N)/2]` with `M = f(a)g(a) + f(b)g(b)` and
/// `N = f(a)g(b) + f(b)g(a)`.
pub fn eval_prod_1d<F, G>(
    f: &F,
    g: &G,
    iv: Interval,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError>
where
    F: Univariate + ?Sized,
    G: Univariate + ?Sized,
{
    opts.quad.validate()?;
    let (fa, fb) = (Q::point(f.at(iv.a)), Q::point(f.at(iv.b)));
    let (ga, gb) = (Q::point(g.at(iv.a)), Q::point(g.at(iv.b)));
    let mul = |p: Q, q: Q| Q {
        value: p.value.zip(q.value).map(|(u, v)| u * v),
        err: 0.0,
        ok: p.ok && q.ok,
    };
    let m = mul(fa, ga) + mul(fb, gb);
    let n = mul(fa, gb) + mul(fb, ga);
    let terms = vec![
        mean_1d(&product1(f, g), iv, &opts.quad).term("mean_fg"),
        (m + n).scale(0.5).term("half_m_plus_n"),
    ];
    let mut preconditions = Vec::new();
    preconditions.extend(pre_1d(f, iv, ClassTag::Convex1D, opts));
    preconditions.extend(pre_1d(g, iv, ClassTag::P1D, opts));
    Ok(Assembly {
        chain: ChainId::Prod1d,
        domain: iv.into(),
        terms,
        details: vec![m.term("m"), n.term("n")],
        preconditions,
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// The five-term chain for functions convex on the co-ordinates:
/// centre value, half the sum of the two midline averages, double average,
/// a quarter of the four edge averages, corner average.
pub fn eval_coord_convex<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    opts.quad.validate()?;
    let cfg = &opts.quad;
    let (cx, cy) = r.center();
    let mx = mean_along_x(f, r, cy, cfg);
    let my = mean_along_y(f, r, cx, cfg);
    let edges = [
        mean_along_x(f, r, r.c, cfg),
        mean_along_x(f, r, r.d, cfg),
        mean_along_y(f, r, r.a, cfg),
        mean_along_y(f, r, r.b, cfg),
    ];
    let corners: Vec<Q> = r
        .corners()
        .iter()
        .map(|&(x, y)| Q::point(f.at_xy(x, y)))
        .collect();
    let terms = vec![
        Q::point(f.at_xy(cx, cy)).term("f_center"),
        (mx + my).scale(0.5).term("half_midline_means"),
        double_mean(f, r, cfg).term("double_mean"),
        sum(&edges).scale(0.25).term("quarter_edge_means"),
        sum(&corners).scale(0.25).term("corner_mean"),
    ];
    let details = vec![
        mx.term("x_midline_mean"),
        my.term("y_midline_mean"),
        edges[0].term("edge_mean_y_eq_c"),
        edges[1].term("edge_mean_y_eq_d"),
        edges[2].term("edge_mean_x_eq_a"),
        edges[3].term("edge_mean_x_eq_b"),
    ];
    Ok(Assembly {
        chain: ChainId::CoordConvex,
        domain: r.into(),
        terms,
        details,
        preconditions: pre_coord(f, r, ClassTag::CoordConvex, opts)
            .into_iter()
            .collect(),
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// Three terms for co-ordinated Godunova-Levin functions:
/// `f(center)/16 <= (x-midline mean + y-midline mean)/8 <= double mean`.
///
/// The details carry the two midline averages and `4 × double mean`, the
/// common bound each midline average satisfies on its own.
pub fn eval_coord_gl<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    opts.quad.validate()?;
    let cfg = &opts.quad;
    let (cx, cy) = r.center();
    let mx = mean_along_x(f, r, cy, cfg);
    let my = mean_along_y(f, r, cx, cfg);
    let dm = double_mean(f, r, cfg);
    let terms = vec![
        Q::point(f.at_xy(cx, cy))
            .scale(1.0 / 16.0)
            .term("f_center_div16"),
        (mx + my).scale(1.0 / 8.0).term("midline_means_div8"),
        dm.term("double_mean"),
    ];
    let details = vec![
        mx.term("x_midline_mean"),
        my.term("y_midline_mean"),
        dm.scale(4.0).term("double_mean_x4"),
    ];
    Ok(Assembly {
        chain: ChainId::CoordGl,
        domain: r.into(),
        terms,
        details,
        preconditions: pre_coord(f, r, ClassTag::CoordGL, opts)
            .into_iter()
            .collect(),
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// `CoordGl` on `[a, b]²` with the midline integrals merged into one:
/// `(1/8)(1/(b-a)) ∫ {f(x, m) + f(m, x)} dx`.
pub fn eval_coord_gl_square<F: Bivariate + ?Sized>(
    f: &F,
    iv: Interval,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    opts.quad.validate()?;
    let cfg = &opts.quad;
    let r = iv.square();
    let m = iv.mid();
    let both = move |x: f64| -> Result<f64, EvalError> {
        finite_or(f.at_xy(x, m)? + f.at_xy(m, x)?, EvalPoint::x(x))
    };
    let terms = vec![
        Q::point(f.at_xy(m, m))
            .scale(1.0 / 16.0)
            .term("f_center_div16"),
        mean_1d(&both, iv, cfg)
            .scale(1.0 / 8.0)
            .term("midline_sum_mean_div8"),
        double_mean(f, r, cfg).term("double_mean"),
    ];
    Ok(Assembly {
        chain: ChainId::CoordGlSquare,
        domain: iv.into(),
        terms,
        details: vec![],
        preconditions: pre_coord(f, r, ClassTag::CoordGL, opts)
            .into_iter()
            .collect(),
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// Both variants of the symmetric specialisation on `[a, b]²`, sharing one
/// set of integrals. With `A` the midline average and `D` the double
/// average:
///
/// * stated: `f(m, m) <= A/4 <= D`, which already fails for `f = 1`;
/// * corrected: `f(m, m) <= 4A <= 16D`, the `CoordGl` chain multiplied by 16
///   after setting both midline averages to `A`.
pub fn eval_coord_gl_symmetric<F: Bivariate + ?Sized>(
    f: &F,
    iv: Interval,
    opts: &ChainOptions,
) -> Result<(ChainReport, ChainReport), ChainError> {
    opts.quad.validate()?;
    let cfg = &opts.quad;
    let r = iv.square();
    let m = iv.mid();
    let center = Q::point(f.at_xy(m, m));
    let a = mean_along_x(f, r, m, cfg);
    let dm = double_mean(f, r, cfg);
    let symmetry_violation = check_symmetry(f, iv, &opts.check);
    let preconditions: Vec<MembershipReport> = pre_coord(f, r, ClassTag::CoordGL, opts)
        .into_iter()
        .collect();
    let details = vec![a.term("midline_mean"), dm.term("double_mean")];
    let stated = Assembly {
        chain: ChainId::CoordGlSymStated,
        domain: iv.into(),
        terms: vec![
            center.term("f_center"),
            a.scale(0.25).term("midline_mean_div4"),
            dm.term("double_mean"),
        ],
        details: details.clone(),
        preconditions: preconditions.clone(),
        symmetry_violation: symmetry_violation.clone(),
    }
    .finish(opts.check.tol);
    let corrected = Assembly {
        chain: ChainId::CoordGlSymCorrected,
        domain: iv.into(),
        terms: vec![
            center.term("f_center"),
            a.scale(4.0).term("midline_mean_x4"),
            dm.scale(16.0).term("double_mean_x16"),
        ],
        details,
        preconditions,
        symmetry_violation,
    }
    .finish(opts.check.tol);
    Ok((stated, corrected))
}

/// Four terms for co-ordinated P-functions: centre value, sum of the two
/// midline averages, `4 × double mean`, and twice the sums of the edge
/// averages in each direction.
///
/// Adding the two per-direction steps gives `D <= (Sx + Sy)/2` for the
/// edge-average sums `Sx`, `Sy`; the last link is that inequality times 4.
pub fn eval_coord_p<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    opts.quad.validate()?;
    let cfg = &opts.quad;
    let (cx, cy) = r.center();
    let mx = mean_along_x(f, r, cy, cfg);
    let my = mean_along_y(f, r, cx, cfg);
    let dm = double_mean(f, r, cfg);
    let x_edges = (mean_along_x(f, r, r.c, cfg) + mean_along_x(f, r, r.d, cfg)).scale(2.0);
    let y_edges = (mean_along_y(f, r, r.a, cfg) + mean_along_y(f, r, r.b, cfg)).scale(2.0);
    let terms = vec![
        Q::point(f.at_xy(cx, cy)).term("f_center"),
        (mx + my).term("midline_means"),
        dm.scale(4.0).term("double_mean_x4"),
        (x_edges + y_edges).term("edge_means_x2"),
    ];
    let details = vec![
        mx.term("x_midline_mean"),
        my.term("y_midline_mean"),
        dm.scale(2.0).term("double_mean_x2"),
        x_edges.term("x_edge_means_x2"),
        y_edges.term("y_edge_means_x2"),
    ];
    Ok(Assembly {
        chain: ChainId::CoordP,
        domain: r.into(),
        terms,
        details,
        preconditions: pre_coord(f, r, ClassTag::CoordP, opts)
            .into_iter()
            .collect(),
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// Corner sums of the product bound. `L` pairs each corner with itself,
/// `M` pairs corners sharing an edge, `N` pairs opposite corners.
pub fn corner_sums(fc: [f64; 4], gc: [f64; 4]) -> (f64, f64, f64) {
    // index order: (a,c), (a,d), (b,c), (b,d)
    let [fac, fad, fbc, fbd] = fc;
    let [gac, gad, gbc, gbd] = gc;
    let l = fac * gac + fbc * gbc + fad * gad + fbd * gbd;
    let m = fac * gad
        + fad * gac
        + fbc * gbd
        + fbd * gbc
        + fbc * gac
        + fbd * gad
        + fac * gbc
        + fad * gbd;
    let n = fbc * gad + fbd * gac + fac * gbd + fad * gbc;
    (l, m, n)
}

/// `[double mean of fg, (L + M + N)/4]`.
///
/// Details: `L`, `M`, `N`, and the intermediate bound obtained by
/// integrating the per-x product inequality over `[a, b]`. In verbose mode
/// the per-x inequality itself is sampled on the x-grid.
pub fn eval_prod_coord<F, G>(
    f: &F,
    g: &G,
    r: Rect,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError>
where
    F: Bivariate + ?Sized,
    G: Bivariate + ?Sized,
{
    opts.quad.validate()?;
    let cfg = &opts.quad;
    let corners = r.corners();
    let fc: Vec<Result<f64, EvalError>> = corners.iter().map(|&(x, y)| f.at_xy(x, y)).collect();
    let gc: Vec<Result<f64, EvalError>> = corners.iter().map(|&(x, y)| g.at_xy(x, y)).collect();
    let lmn = if fc.iter().chain(&gc).all(|v| v.is_ok()) {
        let fv: [f64; 4] = std::array::from_fn(|i| *fc[i].as_ref().unwrap());
        let gv: [f64; 4] = std::array::from_fn(|i| *gc[i].as_ref().unwrap());
        let (l, m, n) = corner_sums(fv, gv);
        [Q::exact(l), Q::exact(m), Q::exact(n)]
    } else {
        [Q::point(Err(fc.iter().chain(&gc).find_map(|v| v.err()).unwrap())); 3]
    };
    let fg = product2(f, g);
    let terms = vec![
        double_mean(&fg, r, cfg).term("double_mean_fg"),
        sum(&lmn).scale(0.25).term("quarter_l_m_n"),
    ];

    let cross = |y1: f64, y2: f64| {
        move |x: f64| -> Result<f64, EvalError> {
            finite_or(f.at_xy(x, y1)? * g.at_xy(x, y2)?, EvalPoint::x(x))
        }
    };
    let edge_bound = (mean_1d(&cross(r.c, r.c), r.x_range(), cfg)
        + mean_1d(&cross(r.d, r.d), r.x_range(), cfg)
        + mean_1d(&cross(r.c, r.d), r.x_range(), cfg)
        + mean_1d(&cross(r.d, r.c), r.x_range(), cfg))
    .scale(0.5);
    let mut details = vec![
        lmn[0].term("l"),
        lmn[1].term("m"),
        lmn[2].term("n"),
        edge_bound.term("x_edge_product_bound"),
    ];
    if opts.verbose {
        let (min_slack, failures) = per_x_product_check(f, g, r, opts);
        details.push(min_slack.term("per_x_min_slack"));
        details.push(Q::exact(failures as f64).term("per_x_failures"));
    }
    let mut preconditions = Vec::new();
    preconditions.extend(pre_coord(f, r, ClassTag::CoordConvex, opts));
    preconditions.extend(pre_coord(g, r, ClassTag::CoordP, opts));
    Ok(Assembly {
        chain: ChainId::ProdCoord,
        domain: r.into(),
        terms,
        details,
        preconditions,
        symmetry_violation: None,
    }
    .finish(opts.check.tol))
}

/// Samples `1/(d-c) ∫ f(x0,y) g(x0,y) dy <= (M(x0) + N(x0))/2` on the
/// x-grid. Returns the smallest slack and the number of failing points.
fn per_x_product_check<F, G>(f: &F, g: &G, r: Rect, opts: &ChainOptions) -> (Q, usize)
where
    F: Bivariate + ?Sized,
    G: Bivariate + ?Sized,
{
    let tol = opts.check.tol;
    let mut worst: Option<Q> = None;
    let mut failures = 0;
    for x0 in r.x_range().grid(opts.check.grid.point_count) {
        let fx = partial_map_x(f, x0);
        let gx = partial_map_x(g, x0);
        let lhs = mean_1d(&product1(&fx, &gx), r.y_range(), &opts.quad);
        let rhs = (|| -> Result<f64, EvalError> {
            let (fc, fd, gc, gd) = (fx.at(r.c)?, fx.at(r.d)?, gx.at(r.c)?, gx.at(r.d)?);
            Ok(0.5 * (fc * gc + fd * gd + fc * gd + fd * gc))
        })();
        let slack = Q::point(rhs) + lhs.scale(-1.0);
        if let (Some(s), Some(l), Ok(rv)) = (slack.value, lhs.value, rhs) {
            if s < -(tol.allowance(l, rv) + slack.err) {
                failures += 1;
            }
        }
        let replace = match (&worst, slack.value) {
            (_, None) => worst.is_none(),
            (None, _) => true,
            (Some(w), Some(s)) => w.value.is_none_or(|wv| s < wv),
        };
        if replace {
            worst = Some(slack);
        }
    }
    (worst.unwrap_or(Q::exact(0.0)), failures)
}

/// Evaluates `chain` on parsed expressions, checking that the domain and
/// function arity match the chain.
pub fn evaluate(
    chain: ChainId,
    f: &Expr,
    g: Option<&Expr>,
    domain: Domain,
    opts: &ChainOptions,
) -> Result<ChainReport, ChainError> {
    match (chain.needs_g(), g.is_some()) {
        (true, false) => return Err(ChainError::MissingG(chain)),
        (false, true) => return Err(ChainError::UnexpectedG(chain)),
        _ => {}
    }
    if chain.univariate() && !(f.is_univariate() && g.is_none_or(|g| g.is_univariate())) {
        return Err(ChainError::NotUnivariate(chain));
    }
    let mismatch = |expected| ChainError::DomainMismatch { chain, expected };
    match (chain.takes_interval(), domain) {
        (true, Domain::Interval(iv)) => match chain {
            ChainId::Hq1d => eval_hq_1d(f as &dyn Univariate, iv, opts),
            ChainId::Hp1d => eval_hp_1d(f as &dyn Univariate, iv, opts),
            ChainId::Prod1d => eval_prod_1d(
                f as &dyn Univariate,
                g.unwrap() as &dyn Univariate,
                iv,
                opts,
            ),
            ChainId::CoordGlSquare => eval_coord_gl_square(f as &dyn Bivariate, iv, opts),
            ChainId::CoordGlSymStated => {
                eval_coord_gl_symmetric(f as &dyn Bivariate, iv, opts).map(|p| p.0)
            }
            ChainId::CoordGlSymCorrected => {
                eval_coord_gl_symmetric(f as &dyn Bivariate, iv, opts).map(|p| p.1)
            }
            _ => unreachable!("interval chains enumerated above"),
        },
        (false, Domain::Rect(r)) => match chain {
            ChainId::CoordConvex => eval_coord_convex(f as &dyn Bivariate, r, opts),
            ChainId::CoordGl => eval_coord_gl(f as &dyn Bivariate, r, opts),
            ChainId::CoordP => eval_coord_p(f as &dyn Bivariate, r, opts),
            ChainId::ProdCoord => {
                eval_prod_coord(f as &dyn Bivariate, g.unwrap() as &dyn Bivariate, r, opts)
            }
            _ => unreachable!("rectangle chains enumerated above"),
        },
        (true, Domain::Rect(_)) => Err(mismatch("an interval a,b")),
        (false, Domain::Interval(_)) => Err(mismatch("a rectangle a,b,c,d")),
    }
}
