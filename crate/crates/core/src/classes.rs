//! Sampled membership checks for the convex, P- and Godunova-Levin classes,
//! in one dimension, jointly on a rectangle, and on the co-ordinates.
//!
//! A check evaluates the defining inequality
//!
//! * convex: `f(λx + (1-λ)y) <= λ f(x) + (1-λ) f(y)`
//! * P: `f(λx + (1-λ)y) <= f(x) + f(y)`, plus `f >= 0`
//! * Godunova-Levin: `f(λx + (1-λ)y) <= f(x)/λ + f(y)/(1-λ)`, plus `f >= 0`
//!
//! at every pair of grid points and every λ of the λ-grid. Passing a check
//! means "holds on samples", never a proof of membership.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Interval, Rect};
use crate::expr::EvalError;
use crate::func::{Bivariate, Univariate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassTag {
    #[serde(rename = "convex")]
    Convex1D,
    #[serde(rename = "p")]
    P1D,
    #[serde(rename = "gl")]
    GL1D,
    JointConvex,
    JointP,
    #[serde(rename = "joint-gl")]
    JointGL,
    CoordConvex,
    CoordP,
    #[serde(rename = "coord-gl")]
    CoordGL,
}

/// Which defining inequality a class uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Convex,
    P,
    GodunovaLevin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    OneDim,
    Joint,
    Coordinated,
}

impl ClassTag {
    pub const ALL: [ClassTag; 9] = [
        ClassTag::Convex1D,
        ClassTag::P1D,
        ClassTag::GL1D,
        ClassTag::JointConvex,
        ClassTag::JointP,
        ClassTag::JointGL,
        ClassTag::CoordConvex,
        ClassTag::CoordP,
        ClassTag::CoordGL,
    ];

    pub fn family(self) -> Family {
        use ClassTag::*;
        match self {
            Convex1D | JointConvex | CoordConvex => Family::Convex,
            P1D | JointP | CoordP => Family::P,
            GL1D | JointGL | CoordGL => Family::GodunovaLevin,
        }
    }

    pub fn scope(self) -> Scope {
        use ClassTag::*;
        match self {
            Convex1D | P1D | GL1D => Scope::OneDim,
            JointConvex | JointP | JointGL => Scope::Joint,
            CoordConvex | CoordP | CoordGL => Scope::Coordinated,
        }
    }

    pub fn dimension(self) -> usize {
        match self.scope() {
            Scope::OneDim => 1,
            _ => 2,
        }
    }

    pub fn from_parts(family: Family, scope: Scope) -> ClassTag {
        use ClassTag::*;
        match (scope, family) {
            (Scope::OneDim, Family::Convex) => Convex1D,
            (Scope::OneDim, Family::P) => P1D,
            (Scope::OneDim, Family::GodunovaLevin) => GL1D,
            (Scope::Joint, Family::Convex) => JointConvex,
            (Scope::Joint, Family::P) => JointP,
            (Scope::Joint, Family::GodunovaLevin) => JointGL,
            (Scope::Coordinated, Family::Convex) => CoordConvex,
            (Scope::Coordinated, Family::P) => CoordP,
            (Scope::Coordinated, Family::GodunovaLevin) => CoordGL,
        }
    }

    pub fn name(self) -> &'static str {
        use ClassTag::*;
        match self {
            Convex1D => "convex",
            P1D => "p",
            GL1D => "gl",
            JointConvex => "joint-convex",
            JointP => "joint-p",
            JointGL => "joint-gl",
            CoordConvex => "coord-convex",
            CoordP => "coord-p",
            CoordGL => "coord-gl",
        }
    }

    pub fn from_name(name: &str) -> Option<ClassTag> {
        ClassTag::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Family {
    pub fn requires_nonnegativity(self) -> bool {
        !matches!(self, Family::Convex)
    }

    /// Right-hand side of the defining inequality for `f(x) = fx`,
    /// `f(y) = fy` at weight `lambda` on `x`.
    pub fn bound(self, fx: f64, fy: f64, lambda: f64) -> f64 {
        match self {
            Family::Convex => lambda * fx + (1.0 - lambda) * fy,
            Family::P => fx + fy,
            Family::GodunovaLevin => fx / lambda + fy / (1.0 - lambda),
        }
    }
}

/// Comparison slack for `lhs <= rhs`: `atol + rtol * max(|lhs|, |rhs|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            atol: 1e-12,
            rtol: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn allowance(&self, lhs: f64, rhs: f64) -> f64 {
        self.atol + self.rtol * lhs.abs().max(rhs.abs())
    }

    /// Amount by which `lhs <= rhs` fails beyond the allowance; positive
    /// means violated.
    pub fn excess(&self, lhs: f64, rhs: f64) -> f64 {
        lhs - rhs - self.allowance(lhs, rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub point_count: usize,
    pub lambda_count: usize,
    pub lambda_open: bool,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid {
            point_count: 17,
            lambda_count: 9,
            lambda_open: true,
        }
    }
}

impl SampleGrid {
    /// λ values for a family. Godunova-Levin checks always use the open
    /// grid `k/(m+1)`, `k = 1..m`, so λ is never 0 or 1.
    pub fn lambdas(&self, family: Family) -> Vec<f64> {
        let m = self.lambda_count.max(1);
        if self.lambda_open || family == Family::GodunovaLevin {
            (1..=m).map(|k| k as f64 / (m + 1) as f64).collect()
        } else {
            (0..=m).map(|k| k as f64 / m as f64).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// The defining λ-inequality fails.
    Inequality,
    /// A nonnegativity requirement fails; `lhs` is 0 and `rhs` is `f(p)`.
    Negative,
    /// `f(x, y) != f(y, x)`; `lhs` and `rhs` are the two values.
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub points: Vec<Vec<f64>>,
    pub lambda: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    HoldsOnSamples,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::HoldsOnSamples => "holds-on-samples",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub class: ClassTag,
    pub verdict: Verdict,
    /// The worst violations, largest first, capped at the configured count.
    pub witnesses: Vec<Witness>,
    pub samples_tested: u64,
    pub violations_found: u64,
    pub eval_faults: u64,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub grid: SampleGrid,
    pub tol: Tolerance,
    pub witness_cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            grid: SampleGrid::default(),
            tol: Tolerance::default(),
            witness_cap: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassError {
    #[error("class `{class}` cannot be checked by {expected} check")]
    WrongScope {
        class: ClassTag,
        expected: &'static str,
    },
}

/// Keeps the `cap` largest violations; ties keep the earlier sample.
#[derive(Debug, Clone)]
struct Witnesses {
    cap: usize,
    best: Vec<Witness>,
    count: u64,
}

impl Witnesses {
    fn new(cap: usize) -> Self {
        Witnesses {
            cap,
            best: Vec::new(),
            count: 0,
        }
    }

    fn offer(&mut self, w: Witness) {
        self.count += 1;
        self.keep(w);
    }

    fn keep(&mut self, w: Witness) {
        if self.cap == 0 {
            return;
        }
        if self.best.len() == self.cap {
            if w.violation <= self.best[self.cap - 1].violation {
                return;
            }
            self.best.pop();
        }
        let at = self.best.partition_point(|b| b.violation >= w.violation);
        self.best.insert(at, w);
    }

    fn merge(&mut self, other: Witnesses) {
        self.count += other.count;
        for w in other.best {
            self.keep(w);
        }
    }
}

#[derive(Debug, Clone)]
struct Tally {
    witnesses: Witnesses,
    samples: u64,
    faults: u64,
}

impl Tally {
    fn new(cap: usize) -> Self {
        Tally {
            witnesses: Witnesses::new(cap),
            samples: 0,
            faults: 0,
        }
    }

    fn merge(&mut self, other: Tally) {
        self.witnesses.merge(other.witnesses);
        self.samples += other.samples;
        self.faults += other.faults;
    }

    fn into_report(self, class: ClassTag, tol: Tolerance) -> MembershipReport {
        let verdict = if self.witnesses.count > 0 {
            Verdict::Violated
        } else if self.faults > 0 {
            Verdict::Inconclusive
        } else {
            Verdict::HoldsOnSamples
        };
        MembershipReport {
            class,
            verdict,
            witnesses: self.witnesses.best,
            samples_tested: self.samples,
            violations_found: self.witnesses.count,
            eval_faults: self.faults,
            tolerance: tol,
        }
    }
}

/// Checks the defining inequality along one line segment.
///
/// `eval(t)` is the function on the line parametrised by `t ∈ ts`; the
/// λ-combination of `ts[i]` and `ts[j]` is formed as `tj + λ(ti - tj)`,
/// matching [`combine`] so joint and line checks share sample points.
fn check_line(
    eval: &dyn Fn(f64) -> Result<f64, EvalError>,
    ts: &[f64],
    to_point: &dyn Fn(f64) -> Vec<f64>,
    family: Family,
    check_sign: bool,
    lambdas: &[f64],
    opts: &CheckOptions,
) -> Tally {
    let tol = opts.tol;
    let mut tally = Tally::new(opts.witness_cap);
    let vals: Vec<Option<f64>> = ts.iter().map(|&t| eval(t).ok()).collect();
    tally.faults += vals.iter().filter(|v| v.is_none()).count() as u64;
    if check_sign {
        for (&t, v) in ts.iter().zip(&vals) {
            if let Some(v) = *v {
                tally.samples += 1;
                sign_witness(v, to_point(t), tol, &mut tally.witnesses);
            }
        }
    }
    for i in 0..ts.len() {
        for j in (i + 1)..ts.len() {
            let (Some(fi), Some(fj)) = (vals[i], vals[j]) else {
                continue;
            };
            for &lambda in lambdas {
                let t = combine(ts[i], ts[j], lambda);
                let Ok(lhs) = eval(t) else {
                    tally.faults += 1;
                    continue;
                };
                tally.samples += 1;
                let rhs = family.bound(fi, fj, lambda);
                let excess = tol.excess(lhs, rhs);
                if excess > 0.0 {
                    tally.witnesses.offer(Witness {
                        kind: WitnessKind::Inequality,
                        points: vec![to_point(ts[i]), to_point(ts[j])],
                        lambda: Some(lambda),
                        lhs,
                        rhs,
                        violation: excess,
                    });
                }
            }
        }
    }
    tally
}

fn sign_witness(v: f64, point: Vec<f64>, tol: Tolerance, sink: &mut Witnesses) {
    let excess = tol.excess(0.0, v);
    if excess > 0.0 {
        sink.offer(Witness {
            kind: WitnessKind::Negative,
            points: vec![point],
            lambda: None,
            lhs: 0.0,
            rhs: v,
            violation: excess,
        });
    }
}

/// `λp + (1-λ)q`, computed so that equal coordinates are reproduced exactly.
#[inline]
pub fn combine(p: f64, q: f64, lambda: f64) -> f64 {
    q + lambda * (p - q)
}

/// Partial map `v ↦ f(x0, v)`.
pub struct PartialX<'a, F: ?Sized> {
    f: &'a F,
    x0: f64,
}

/// Partial map `u ↦ f(u, y0)`.
pub struct PartialY<'a, F: ?Sized> {
    f: &'a F,
    y0: f64,
}

impl<F: Bivariate + ?Sized> Univariate for PartialX<'_, F> {
    fn at(&self, v: f64) -> Result<f64, EvalError> {
        self.f.at_xy(self.x0, v)
    }
}

impl<F: Bivariate + ?Sized> Univariate for PartialY<'_, F> {
    fn at(&self, u: f64) -> Result<f64, EvalError> {
        self.f.at_xy(u, self.y0)
    }
}

pub fn partial_map_x<F: Bivariate + ?Sized>(f: &F, x0: f64) -> PartialX<'_, F> {
    PartialX { f, x0 }
}

pub fn partial_map_y<F: Bivariate + ?Sized>(f: &F, y0: f64) -> PartialY<'_, F> {
    PartialY { f, y0 }
}

/// Sampled check of a one-dimensional class on `iv`.
pub fn check_1d<F: Univariate + ?Sized>(
    f: &F,
    iv: Interval,
    class: ClassTag,
    opts: &CheckOptions,
) -> Result<MembershipReport, ClassError> {
    if class.scope() != Scope::OneDim {
        return Err(ClassError::WrongScope {
            class,
            expected: "a one-dimensional",
        });
    }
    let family = class.family();
    let ts = iv.grid(opts.grid.point_count);
    let tally = check_line(
        &|t| f.at(t),
        &ts,
        &|t| vec![t],
        family,
        family.requires_nonnegativity(),
        &opts.grid.lambdas(family),
        opts,
    );
    Ok(tally.into_report(class, opts.tol))
}

/// Sampled check of the joint (whole-rectangle) inequality over all pairs
/// of grid points.
pub fn check_joint<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    class: ClassTag,
    opts: &CheckOptions,
) -> Result<MembershipReport, ClassError> {
    if class.scope() != Scope::Joint {
        return Err(ClassError::WrongScope {
            class,
            expected: "a joint",
        });
    }
    let family = class.family();
    let tol = opts.tol;
    let lambdas = opts.grid.lambdas(family);
    let xs = r.x_range().grid(opts.grid.point_count);
    let ys = r.y_range().grid(opts.grid.point_count);
    let points: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .collect();
    let vals: Vec<Option<f64>> = points.iter().map(|&(x, y)| f.at_xy(x, y).ok()).collect();

    let mut tally = Tally::new(opts.witness_cap);
    tally.faults += vals.iter().filter(|v| v.is_none()).count() as u64;
    if family.requires_nonnegativity() {
        for (&(x, y), v) in points.iter().zip(&vals) {
            if let Some(v) = *v {
                tally.samples += 1;
                sign_witness(v, vec![x, y], tol, &mut tally.witnesses);
            }
        }
    }
    let rows: Vec<Tally> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut t = Tally::new(opts.witness_cap);
            let Some(fp) = vals[i] else { return t };
            let p = points[i];
            for j in (i + 1)..points.len() {
                let Some(fq) = vals[j] else { continue };
                let q = points[j];
                for &lambda in &lambdas {
                    let mx = combine(p.0, q.0, lambda);
                    let my = combine(p.1, q.1, lambda);
                    let Ok(lhs) = f.at_xy(mx, my) else {
                        t.faults += 1;
                        continue;
                    };
                    t.samples += 1;
                    let rhs = family.bound(fp, fq, lambda);
                    let excess = tol.excess(lhs, rhs);
                    if excess > 0.0 {
                        t.witnesses.offer(Witness {
                            kind: WitnessKind::Inequality,
                            points: vec![vec![p.0, p.1], vec![q.0, q.1]],
                            lambda: Some(lambda),
                            lhs,
                            rhs,
                            violation: excess,
                        });
                    }
                }
            }
            t
        })
        .collect();
    rows.into_iter().for_each(|t| tally.merge(t));
    Ok(tally.into_report(class, tol))
}

/// Sampled check on the co-ordinates: every partial map `f(x0, ·)` over
/// `[c, d]` and `f(·, y0)` over `[a, b]`, for `x0`, `y0` on the grid.
pub fn check_coordinated<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    class: ClassTag,
    opts: &CheckOptions,
) -> Result<MembershipReport, ClassError> {
    if class.scope() != Scope::Coordinated {
        return Err(ClassError::WrongScope {
            class,
            expected: "a coordinated",
        });
    }
    let family = class.family();
    let lambdas = opts.grid.lambdas(family);
    let xs = r.x_range().grid(opts.grid.point_count);
    let ys = r.y_range().grid(opts.grid.point_count);
    // Nonnegativity is checked once per grid point, on the x-lines.
    let sign = family.requires_nonnegativity();

    let along_y: Vec<Tally> = xs
        .par_iter()
        .map(|&x0| {
            let g = partial_map_x(f, x0);
            check_line(
                &|v| g.at(v),
                &ys,
                &|v| vec![x0, v],
                family,
                sign,
                &lambdas,
                opts,
            )
        })
        .collect();
    let along_x: Vec<Tally> = ys
        .par_iter()
        .map(|&y0| {
            let g = partial_map_y(f, y0);
            check_line(
                &|u| g.at(u),
                &xs,
                &|u| vec![u, y0],
                family,
                false,
                &lambdas,
                opts,
            )
        })
        .collect();
    let mut tally = Tally::new(opts.witness_cap);
    along_y
        .into_iter()
        .chain(along_x)
        .for_each(|t| tally.merge(t));
    Ok(tally.into_report(class, opts.tol))
}

/// Dispatches on the scope of `class`. One-dimensional classes are checked
/// on `[a, b]` using the partial map at `y = c`.
pub fn check_class<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    class: ClassTag,
    opts: &CheckOptions,
) -> Result<MembershipReport, ClassError> {
    match class.scope() {
        Scope::OneDim => check_1d(&partial_map_y(f, r.c), r.x_range(), class, opts),
        Scope::Joint => check_joint(f, r, class, opts),
        Scope::Coordinated => check_coordinated(f, r, class, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaAudit {
    pub joint: MembershipReport,
    pub coordinated: MembershipReport,
    /// Joint membership held on samples but coordinated membership did not.
    /// On matched grids this cannot happen for a correct checker.
    pub implication_broken: bool,
}

/// Runs the joint and coordinated checks on the same grid and audits the
/// implication "joint holds-on-samples => coordinated holds-on-samples".
pub fn verify_lemma_reduction<F: Bivariate + ?Sized>(
    f: &F,
    r: Rect,
    joint_class: ClassTag,
    opts: &CheckOptions,
) -> Result<LemmaAudit, ClassError> {
    if joint_class.scope() != Scope::Joint {
        return Err(ClassError::WrongScope {
            class: joint_class,
            expected: "a joint",
        });
    }
    let joint = check_joint(f, r, joint_class, opts)?;
    let coord_class = ClassTag::from_parts(joint_class.family(), Scope::Coordinated);
    let coordinated = check_coordinated(f, r, coord_class, opts)?;
    let implication_broken =
        joint.verdict == Verdict::HoldsOnSamples && coordinated.verdict != Verdict::HoldsOnSamples;
    Ok(LemmaAudit {
        joint,
        coordinated,
        implication_broken,
    })
}

/// Checks `f(x, y) = f(y, x)` on the grid of the square `iv x iv`. Returns
/// the worst asymmetry beyond tolerance, if any.
pub fn check_symmetry<F: Bivariate + ?Sized>(
    f: &F,
    iv: Interval,
    opts: &CheckOptions,
) -> Option<Witness> {
    let ts = iv.grid(opts.grid.point_count);
    let mut worst: Option<Witness> = None;
    for (i, &x) in ts.iter().enumerate() {
        for &y in &ts[i + 1..] {
            let (Ok(u), Ok(v)) = (f.at_xy(x, y), f.at_xy(y, x)) else {
                continue;
            };
            let excess = (u - v).abs() - opts.tol.allowance(u, v);
            if excess > 0.0 && worst.as_ref().is_none_or(|w| excess > w.violation) {
                worst = Some(Witness {
                    kind: WitnessKind::Asymmetric,
                    points: vec![vec![x, y], vec![y, x]],
                    lambda: None,
                    lhs: u,
                    rhs: v,
                    violation: excess,
                });
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn check(text: &str, class: ClassTag) -> MembershipReport {
        let e = parse(text).unwrap();
        let opts = CheckOptions::default();
        match class.scope() {
            Scope::OneDim => check_1d(&e, Interval::unit(), class, &opts).unwrap(),
            _ => check_class(&e, Rect::unit(), class, &opts).unwrap(),
        }
    }

    #[test]
    fn lambda_grids() {
        let g = SampleGrid {
            point_count: 5,
            lambda_count: 3,
            lambda_open: false,
        };
        assert_eq!(g.lambdas(Family::P), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(g.lambdas(Family::GodunovaLevin), vec![0.25, 0.5, 0.75]);
        let default = SampleGrid::default().lambdas(Family::Convex);
        assert_eq!(default.len(), 9);
        assert!(default.contains(&0.5));
    }

    #[test]
    fn square_is_convex() {
        assert_eq!(
            check("x^2", ClassTag::Convex1D).verdict,
            Verdict::HoldsOnSamples
        );
    }

    #[test]
    fn sqrt_is_not_convex() {
        let r = check("sqrt(x)", ClassTag::Convex1D);
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.witnesses[0].violation >= 0.2);
        // The pair (0, 1) at λ = 0.5 fails: √0.5 ≈ 0.70711 > 0.5.
        let tol = Tolerance::default();
        let lhs = 0.5f64.sqrt();
        let rhs = Family::Convex.bound(0.0, 1.0, 0.5);
        assert!((lhs - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12 && rhs == 0.5);
        assert!(tol.excess(lhs, rhs) > 0.2);
    }

    #[test]
    fn sqrt_is_a_p_function() {
        assert_eq!(
            check("sqrt(x)", ClassTag::P1D).verdict,
            Verdict::HoldsOnSamples
        );
    }

    #[test]
    fn negative_function_fails_p_and_gl() {
        let opts = CheckOptions {
            witness_cap: 100_000,
            ..CheckOptions::default()
        };
        for class in [ClassTag::P1D, ClassTag::GL1D] {
            let r = check_1d(&parse("x - 0.5").unwrap(), Interval::unit(), class, &opts).unwrap();
            assert_eq!(r.verdict, Verdict::Violated);
            assert!(r.witnesses.iter().any(|w| w.kind == WitnessKind::Negative));
        }
        assert_eq!(
            check("x - 0.5", ClassTag::Convex1D).verdict,
            Verdict::HoldsOnSamples
        );
    }

    #[test]
    fn product_is_not_jointly_convex() {
        let r = check("x*y", ClassTag::JointConvex);
        assert_eq!(r.verdict, Verdict::Violated);
        let w = &r.witnesses[0];
        assert!(w.violation >= 0.25 - 1e-9);
        assert_eq!(w.lambda, Some(0.5));
        let mut pts = w.points.clone();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn joint_examples() {
        assert_eq!(
            check("x+y", ClassTag::JointConvex).verdict,
            Verdict::HoldsOnSamples
        );
        assert_eq!(
            check("1", ClassTag::JointGL).verdict,
            Verdict::HoldsOnSamples
        );
    }

    #[test]
    fn coordinated_examples() {
        assert_eq!(
            check("x*y", ClassTag::CoordConvex).verdict,
            Verdict::HoldsOnSamples
        );
        assert_eq!(
            check("x^2*y^2", ClassTag::CoordP).verdict,
            Verdict::HoldsOnSamples
        );
        let r = check("x^2-y^2", ClassTag::CoordP);
        assert_eq!(r.verdict, Verdict::Violated);
        let neg = r
            .witnesses
            .iter()
            .find(|w| w.kind == WitnessKind::Negative)
            .unwrap();
        assert_eq!(neg.points, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn partial_maps() {
        let f = parse("x^2*y^2").unwrap();
        let g = partial_map_x(&f, 0.5);
        assert!((g.at(0.8).unwrap() - 0.25 * 0.64).abs() < 1e-15);
        let h = partial_map_y(&f, 0.5);
        assert!((h.at(0.8).unwrap() - 0.64 * 0.25).abs() < 1e-15);
        let f = parse("x+y").unwrap();
        assert_eq!(partial_map_x(&f, 0.0).at(0.3).unwrap(), 0.3);
        assert_eq!(partial_map_y(&f, 0.0).at(0.3).unwrap(), 0.3);
        let f = parse("min(x,y)").unwrap();
        for v in [0.0, 0.2, 0.7, 1.0] {
            assert_eq!(partial_map_x(&f, 1.0).at(v).unwrap(), v);
            assert_eq!(partial_map_y(&f, 1.0).at(v).unwrap(), v);
        }
    }

    #[test]
    fn lemma_audits() {
        let opts = CheckOptions::default();
        let audit = |t: &str, c| {
            verify_lemma_reduction(&parse(t).unwrap(), Rect::unit(), c, &opts).unwrap()
        };
        let a = audit("1", ClassTag::JointGL);
        assert_eq!(a.joint.verdict, Verdict::HoldsOnSamples);
        assert_eq!(a.coordinated.verdict, Verdict::HoldsOnSamples);
        assert!(!a.implication_broken);

        let a = audit("x*y", ClassTag::JointConvex);
        assert_eq!(a.joint.verdict, Verdict::Violated);
        assert_eq!(a.coordinated.verdict, Verdict::HoldsOnSamples);
        assert!(!a.implication_broken);
    }

    #[test]
    fn squared_product_joint_p() {
        // Oracle: brute-force the joint P inequality on the default grid.
        let f = |x: f64, y: f64| x * x * y * y;
        let g = Interval::unit().grid(17);
        let lams = SampleGrid::default().lambdas(Family::P);
        let mut worst = f64::NEG_INFINITY;
        for &x in &g {
            for &y in &g {
                for &z in &g {
                    for &w in &g {
                        for &l in &lams {
                            let m = f(l * x + (1.0 - l) * z, l * y + (1.0 - l) * w);
                            worst = worst.max(m - f(x, y) - f(z, w));
                        }
                    }
                }
            }
        }
        let oracle_holds = worst <= 1e-12;
        let opts = CheckOptions::default();
        let a = verify_lemma_reduction(
            &parse("x^2*y^2").unwrap(),
            Rect::unit(),
            ClassTag::JointP,
            &opts,
        )
        .unwrap();
        assert_eq!(a.joint.verdict == Verdict::HoldsOnSamples, oracle_holds);
        assert_eq!(a.coordinated.verdict, Verdict::HoldsOnSamples);
        assert!(!a.implication_broken);
    }

    #[test]
    fn faults_make_checks_inconclusive() {
        let r = check("log(x)", ClassTag::P1D);
        assert_eq!(r.verdict, Verdict::Violated); // log is negative on (0, 1)
        let r = check("1/(x-0.5)^2", ClassTag::Convex1D);
        assert!(r.eval_faults > 0);
        let r = check("1/x + 1", ClassTag::Convex1D);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn wrong_scope_is_rejected() {
        let e = parse("x").unwrap();
        let opts = CheckOptions::default();
        assert!(check_1d(&e, Interval::unit(), ClassTag::JointP, &opts).is_err());
        assert!(check_joint(&e, Rect::unit(), ClassTag::CoordP, &opts).is_err());
        assert!(check_coordinated(&e, Rect::unit(), ClassTag::P1D, &opts).is_err());
    }

    #[test]
    fn symmetry() {
        let opts = CheckOptions::default();
        assert!(check_symmetry(&parse("x*y + x + y").unwrap(), Interval::unit(), &opts).is_none());
        let w = check_symmetry(&parse("x").unwrap(), Interval::unit(), &opts).unwrap();
        assert_eq!(w.kind, WitnessKind::Asymmetric);
        assert!((w.violation - 1.0).abs() < 1e-6);
    }

    #[test]
    fn witness_cap_keeps_worst() {
        let mut s = Witnesses::new(2);
        for v in [0.1, 0.5, 0.3, 0.5, 0.9] {
            s.offer(Witness {
                kind: WitnessKind::Inequality,
                points: vec![vec![v]],
                lambda: None,
                lhs: v,
                rhs: 0.0,
                violation: v,
            });
        }
        assert_eq!(s.count, 5);
        let v: Vec<f64> = s.best.iter().map(|w| w.violation).collect();
        assert_eq!(v, vec![0.9, 0.5]);
    }
}
