//! Adaptive composite Gauss-Legendre quadrature on intervals and rectangles.
//!
//! Every panel is integrated twice: once with the base rule on the whole
//! panel and once on its two halves (four quarters in 2D). The panel with
//! the largest coarse/fine difference is bisected next, so refinement
//! concentrates at singularities and kinks; a panel is never bisected more
//! than `max_refinements` times. The reported error estimate is the sum of
//! the coarse/fine differences over the final partition. It is a two-grid
//! estimate, not a bound.
//!
//! Gauss nodes are interior, so the integrand is never evaluated on the
//! boundary of the domain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Interval, Rect};
use crate::expr::{EvalError, EvalPoint};
use crate::func::{Bivariate, Univariate};

pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("unsupported Gauss-Legendre order {0} (supported: 2..=64)")]
    UnsupportedOrder(usize),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("integrand not evaluable at interior node {point:?}: {source}")]
    NonIntegrable { point: EvalPoint, source: EvalError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub nodes_per_panel: usize,
    pub initial_panels: usize,
    pub max_refinements: u32,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            nodes_per_panel: 8,
            initial_panels: 4,
            max_refinements: 12,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), QuadError> {
        if !(2..=MAX_ORDER).contains(&self.nodes_per_panel) {
            return Err(QuadError::UnsupportedOrder(self.nodes_per_panel));
        }
        if self.initial_panels == 0 {
            return Err(QuadError::InvalidConfig("initial_panels must be >= 1"));
        }
        if self.max_refinements > 30 {
            return Err(QuadError::InvalidConfig("max_refinements must be <= 30"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(QuadError::InvalidConfig("abs_tol must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(QuadError::InvalidConfig("rel_tol must be positive"));
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol + self.rel_tol * value.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    /// Panels in the final (finest) partition.
    pub panels_used: usize,
    /// Deepest bisection level that was needed.
    pub refinements: u32,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending by node.
///
/// Roots of `P_n` are found by Newton iteration from the Tricomi initial
/// guesses; the weights are `2 / ((1 - x^2) P_n'(x)^2)`.
pub fn gauss_nodes(n: usize) -> Result<Vec<(f64, f64)>, QuadError> {
    if !(2..=MAX_ORDER).contains(&n) {
        return Err(QuadError::UnsupportedOrder(n));
    }
    let nf = n as f64;
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // Refresh the derivative at the converged root.
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    Ok(out)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Compensated running sum, so the result does not depend on how many
/// panels contributed.
#[derive(Default, Clone, Copy)]
struct Sum {
    hi: f64,
    lo: f64,
}

impl Sum {
    fn add(&mut self, v: f64) {
        let t = self.hi + v;
        if self.hi.abs() >= v.abs() {
            self.lo += (self.hi - t) + v;
        } else {
            self.lo += (v - t) + self.hi;
        }
        self.hi = t;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

fn nonintegrable(source: EvalError) -> QuadError {
    QuadError::NonIntegrable {
        point: source.point,
        source,
    }
}

/// Upper bound on the number of leaves in the partition, so a nowhere
/// smooth integrand cannot exhaust memory in 2D.
const MAX_LEAVES: usize = 1 << 14;

trait Panel: Copy {
    fn split(&self) -> Vec<Self>;
    /// Lower-left corner; leaves are summed in this order.
    fn origin(&self) -> (f64, f64);
}

struct Leaf<P> {
    parts: Vec<(P, f64)>,
    err: f64,
    depth: u32,
}

/// Heap entry ordered by error, ties broken towards the earlier leaf.
struct Candidate {
    err: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Globally adaptive driver: the leaf with the largest coarse/fine
/// difference is split until the summed difference meets the tolerance,
/// the worst leaf sits at `max_refinements`, or the leaf budget is spent.
fn adapt<P, E>(initial: Vec<P>, eval: E, cfg: &QuadConfig) -> Result<QuadResult, QuadError>
where
    P: Panel,
    E: Fn(P) -> Result<f64, QuadError>,
{
    let make = |panel: P, coarse: f64, depth: u32| -> Result<Leaf<P>, QuadError> {
        let parts = panel
            .split()
            .into_iter()
            .map(|c| eval(c).map(|v| (c, v)))
            .collect::<Result<Vec<_>, _>>()?;
        let fine: f64 = parts.iter().map(|p| p.1).sum();
        Ok(Leaf {
            parts,
            err: (fine - coarse).abs(),
            depth,
        })
    };

    let mut leaves: Vec<Option<Leaf<P>>> = Vec::new();
    let mut heap = std::collections::BinaryHeap::new();
    let mut value = Sum::default();
    let mut error = Sum::default();
    for p in initial {
        let leaf = make(p, eval(p)?, 0)?;
        leaf.parts.iter().for_each(|c| value.add(c.1));
        error.add(leaf.err);
        heap.push(Candidate {
            err: leaf.err,
            index: leaves.len(),
        });
        leaves.push(Some(leaf));
    }
    let mut live = leaves.len();
    let mut frozen = 0.0;
    while error.value() > cfg.tolerance(value.value()) && frozen <= cfg.tolerance(value.value()) {
        let Some(top) = heap.pop() else { break };
        let depth = leaves[top.index].as_ref().expect("live leaf").depth;
        if depth >= cfg.max_refinements {
            frozen += top.err;
            continue;
        }
        let fanout = leaves[top.index].as_ref().unwrap().parts.len();
        if live + fanout - 1 > MAX_LEAVES {
            break;
        }
        let leaf = leaves[top.index].take().unwrap();
        leaf.parts.iter().for_each(|c| value.add(-c.1));
        error.add(-leaf.err);
        live -= 1;
        for (panel, coarse) in leaf.parts {
            let child = make(panel, coarse, depth + 1)?;
            child.parts.iter().for_each(|c| value.add(c.1));
            error.add(child.err);
            heap.push(Candidate {
                err: child.err,
                index: leaves.len(),
            });
            leaves.push(Some(child));
            live += 1;
        }
    }

    // Re-sum from scratch in a fixed spatial order.
    let mut finals: Vec<Leaf<P>> = leaves.into_iter().flatten().collect();
    finals.sort_by(|a, b| {
        let (ax, ay) = a.parts[0].0.origin();
        let (bx, by) = b.parts[0].0.origin();
        ax.total_cmp(&bx).then(ay.total_cmp(&by))
    });
    let mut value = Sum::default();
    let mut error = Sum::default();
    let mut panels = 0;
    let mut depth = 0;
    for leaf in &finals {
        leaf.parts.iter().for_each(|c| value.add(c.1));
        error.add(leaf.err);
        panels += leaf.parts.len();
        depth = depth.max(leaf.depth);
    }
    let value = value.value();
    let error_estimate = error.value().max(0.0);
    Ok(QuadResult {
        value,
        error_estimate,
        converged: error_estimate <= cfg.tolerance(value),
        panels_used: panels,
        refinements: depth,
    })
}

#[derive(Clone, Copy)]
struct Span {
    lo: f64,
    hi: f64,
}

impl Panel for Span {
    fn split(&self) -> Vec<Span> {
        let m = 0.5 * (self.lo + self.hi);
        vec![Span { lo: self.lo, hi: m }, Span { lo: m, hi: self.hi }]
    }

    fn origin(&self) -> (f64, f64) {
        (self.lo, 0.0)
    }
}

fn rule1<F: Univariate + ?Sized>(f: &F, rule: &[(f64, f64)], s: Span) -> Result<f64, QuadError> {
    let half = 0.5 * (s.hi - s.lo);
    let mid = 0.5 * (s.hi + s.lo);
    let mut acc = 0.0;
    for &(x, w) in rule {
        acc += w * f.at(mid + half * x).map_err(nonintegrable)?;
    }
    Ok(acc * half)
}

/// Integrates `f` over `iv`.
pub fn integrate_1d<F: Univariate + ?Sized>(
    f: &F,
    iv: Interval,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    cfg.validate()?;
    let rule = gauss_nodes(cfg.nodes_per_panel)?;
    let edges = crate::domain::uniform(iv.a, iv.b, cfg.initial_panels + 1);
    let spans = edges
        .windows(2)
        .map(|w| Span { lo: w[0], hi: w[1] })
        .collect();
    adapt(spans, |s| rule1(f, &rule, s), cfg)
}

#[derive(Clone, Copy)]
struct Cell {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Panel for Cell {
    fn split(&self) -> Vec<Cell> {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        vec![
            Cell {
                x0: self.x0,
                x1: xm,
                y0: self.y0,
                y1: ym,
            },
            Cell {
                x0: self.x0,
                x1: xm,
                y0: ym,
                y1: self.y1,
            },
            Cell {
                x0: xm,
                x1: self.x1,
                y0: self.y0,
                y1: ym,
            },
            Cell {
                x0: xm,
                x1: self.x1,
                y0: ym,
                y1: self.y1,
            },
        ]
    }

    fn origin(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }
}

fn rule2<F: Bivariate + ?Sized>(f: &F, rule: &[(f64, f64)], c: Cell) -> Result<f64, QuadError> {
    let hx = 0.5 * (c.x1 - c.x0);
    let mx = 0.5 * (c.x1 + c.x0);
    let hy = 0.5 * (c.y1 - c.y0);
    let my = 0.5 * (c.y1 + c.y0);
    let mut s = 0.0;
    for &(u, wu) in rule {
        let x = mx + hx * u;
        let mut row = 0.0;
        for &(v, wv) in rule {
            row += wv * f.at_xy(x, my + hy * v).map_err(nonintegrable)?;
        }
        s += wu * row;
    }
    Ok(s * hx * hy)
}

/// Integrates `f` over the rectangle `r` with tensor-product panels.
pub fn integrate_2d<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    cfg.validate()?;
    let rule = gauss_nodes(cfg.nodes_per_panel)?;
    let p = cfg.initial_panels;
    let xs = crate::domain::uniform(r.a, r.b, p + 1);
    let ys = crate::domain::uniform(r.c, r.d, p + 1);
    let mut cells = Vec::with_capacity(p * p);
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            cells.push(Cell {
                x0: xw[0],
                x1: xw[1],
                y0: yw[0],
                y1: yw[1],
            });
        }
    }
    adapt(cells, |c| rule2(f, &rule, c), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{total1, total2};

    #[test]
    fn two_point_rule_closed_form() {
        let r = gauss_nodes(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r[0].0 + s).abs() < 1e-15 && (r[1].0 - s).abs() < 1e-15);
        assert!((r[0].1 - 1.0).abs() < 1e-15 && (r[1].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_rule_closed_form() {
        let r = gauss_nodes(3).unwrap();
        let s = (0.6f64).sqrt();
        assert!((r[0].0 + s).abs() < 1e-15);
        assert_eq!(r[1].0, 0.0);
        assert!((r[2].0 - s).abs() < 1e-15);
        assert!((r[0].1 - 5.0 / 9.0).abs() < 1e-15);
        assert!((r[1].1 - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsupported_orders() {
        assert_eq!(gauss_nodes(1), Err(QuadError::UnsupportedOrder(1)));
        assert_eq!(gauss_nodes(0), Err(QuadError::UnsupportedOrder(0)));
        assert_eq!(gauss_nodes(65), Err(QuadError::UnsupportedOrder(65)));
    }

    #[test]
    fn weights_sum_to_two_and_nodes_are_symmetric() {
        for n in 2..=MAX_ORDER {
            let r = gauss_nodes(n).unwrap();
            let sum: f64 = r.iter().map(|p| p.1).sum();
            assert!((sum - 2.0).abs() < 1e-14, "n={n} sum={sum}");
            for i in 0..n {
                assert!((r[i].0 + r[n - 1 - i].0).abs() < 1e-15, "n={n}");
                assert!(r[i].0 > -1.0 && r[i].0 < 1.0);
            }
            assert!(r.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn nodes_are_legendre_roots() {
        for n in [5, 17, 40, 64] {
            for (x, _) in gauss_nodes(n).unwrap() {
                // |P_n| near a simple root is about |P_n'| * dx.
                let (p, d) = legendre(n, x);
                assert!((p / d).abs() < 1e-14, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn monomials_are_exact_up_to_degree_2n_minus_1() {
        let rule = gauss_nodes(8).unwrap();
        let (a, b) = (-0.3f64, 1.7f64);
        for k in 0..=15i32 {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let approx: f64 = rule
                .iter()
                .map(|&(x, w)| w * (mid + half * x).powi(k))
                .sum::<f64>()
                * half;
            let exact = (b.powi(k + 1) - a.powi(k + 1)) / (k + 1) as f64;
            assert!(
                (approx - exact).abs() <= 1e-12 * exact.abs().max(1e-300),
                "k={k} approx={approx} exact={exact}"
            );
        }
    }

    #[test]
    fn square_on_unit_interval() {
        let r = integrate_1d(&total1(|x| x * x), Interval::unit(), &QuadConfig::default()).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() <= 1e-12);
        assert!(r.converged);
        assert!(r.error_estimate <= 1e-12);
    }

    #[test]
    fn constant_converges_without_refinement() {
        let r = integrate_1d(&total1(|_| 1.0), Interval::unit(), &QuadConfig::default()).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.converged);
        assert_eq!(r.refinements, 0);
        assert_eq!(r.panels_used, 8);
    }

    #[test]
    fn endpoint_singularity_is_flagged() {
        let cfg = QuadConfig::default();
        let r = integrate_1d(&total1(|x| 1.0 / x.sqrt()), Interval::unit(), &cfg).unwrap();
        assert!((r.value - 2.0).abs() < 1e-2, "{r:?}");
        assert!(!r.converged || r.error_estimate > cfg.abs_tol + cfg.rel_tol * r.value);
        assert!(!r.converged);
    }

    #[test]
    fn interior_eval_error_is_nonintegrable() {
        let f = |x: f64| -> Result<f64, EvalError> {
            crate::expr::parse("1/(x-0.3)")
                .unwrap()
                .eval(EvalPoint::x(x))
        };
        // 0.3 is not a node of the initial panels, so integration succeeds numerically
        // but never converges; a function failing everywhere must bubble the error.
        let always = |x: f64| -> Result<f64, EvalError> {
            crate::expr::parse("log(x-2)")
                .unwrap()
                .eval(EvalPoint::x(x))
        };
        assert!(integrate_1d(&f, Interval::unit(), &QuadConfig::default()).is_ok());
        let err = integrate_1d(&always, Interval::unit(), &QuadConfig::default()).unwrap_err();
        assert!(matches!(err, QuadError::NonIntegrable { .. }));
    }

    #[test]
    fn rectangle_closed_forms() {
        let cfg = QuadConfig::default();
        let xy = integrate_2d(&total2(|x, y| x * y), Rect::unit(), &cfg).unwrap();
        assert!((xy.value - 0.25).abs() < 1e-14 && xy.converged);
        let sq = integrate_2d(&total2(|x, y| x * x * y * y), Rect::unit(), &cfg).unwrap();
        assert!((sq.value - 1.0 / 9.0).abs() < 1e-14 && sq.converged);
        let one = integrate_2d(&total2(|_, _| 1.0), Rect::unit(), &cfg).unwrap();
        assert_eq!(one.value, 1.0);
        assert_eq!(one.refinements, 0);
    }

    #[test]
    fn config_validation() {
        let bad = QuadConfig {
            nodes_per_panel: 1,
            ..QuadConfig::default()
        };
        assert_eq!(
            integrate_1d(&total1(|x| x), Interval::unit(), &bad),
            Err(QuadError::UnsupportedOrder(1))
        );
        let bad = QuadConfig {
            initial_panels: 0,
            ..QuadConfig::default()
        };
        assert!(matches!(bad.validate(), Err(QuadError::InvalidConfig(_))));
    }
}
