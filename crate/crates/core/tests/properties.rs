use hadamard_lab::chains::{evaluate, ChainId, ChainOptions, ChainVerdict};
use hadamard_lab::classes::{
    check_1d, check_class, check_symmetry, CheckOptions, ClassTag, SampleGrid, Verdict,
};
use hadamard_lab::expr::{BinOp, Expr, Func, Var};
use hadamard_lab::func::{total1, total2, Bivariate, Univariate};
use hadamard_lab::probe::{fuzz_chain, gen_function, symmetrize, FuzzConfig, GenSpec};
use hadamard_lab::quadrature::{integrate_1d, integrate_2d, QuadConfig};
use hadamard_lab::{parse, Domain, Interval, Rect};
use proptest::prelude::*;

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..10_000).prop_map(|n| Expr::Number(n as f64 / 100.0)),
        Just(Expr::Var(Var::X)),
        Just(Expr::Var(Var::Y)),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        let unary = prop_oneof![
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Log),
            Just(Func::Sqrt),
            Just(Func::Abs),
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::Binary(
                op,
                Box::new(l),
                Box::new(r)
            )),
            (unary, inner.clone()).prop_map(|(f, e)| Expr::Call(f, vec![e])),
            (prop::bool::ANY, inner.clone(), inner).prop_map(|(max, l, r)| Expr::Call(
                if max { Func::Max } else { Func::Min },
                vec![l, r]
            )),
        ]
    })
}

fn arb_interval() -> impl Strategy<Value = Interval> {
    (-3.0..3.0f64, 0.05..4.0f64).prop_map(|(a, w)| Interval::new(a, a + w).unwrap())
}

fn arb_rect() -> impl Strategy<Value = Rect> {
    (arb_interval(), arb_interval()).prop_map(|(x, y)| Rect::new(x.a, x.b, y.a, y.b).unwrap())
}

/// Smooth test integrands: a cubic times an exponential.
fn arb_smooth() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-2.0..2.0f64)
}

fn smooth(c: [f64; 5], t: f64) -> f64 {
    (c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t) * (c[4] * t / 4.0).exp()
}

fn sum_tol(a: f64, b: f64, errs: f64) -> f64 {
    errs + 64.0 * f64::EPSILON * (a.abs() + b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_then_parsing_is_identity(e in arb_expr()) {
        let text = e.to_string();
        let back = parse(&text).unwrap_or_else(|err| panic!("`{text}`: {err}"));
        prop_assert_eq!(back, e);
    }

    #[test]
    fn printed_form_is_a_fixed_point(e in arb_expr()) {
        let once = e.to_string();
        prop_assert_eq!(parse(&once).unwrap().to_string(), once);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrals_add_over_adjacent_intervals(c in arb_smooth(), iv in arb_interval(), cut in 0.05..0.95f64) {
        let cfg = QuadConfig::default();
        let f = total1(|t| smooth(c, t));
        let m = iv.a + cut * iv.width();
        let whole = integrate_1d(&f, iv, &cfg).unwrap();
        let left = integrate_1d(&f, Interval::new(iv.a, m).unwrap(), &cfg).unwrap();
        let right = integrate_1d(&f, Interval::new(m, iv.b).unwrap(), &cfg).unwrap();
        prop_assert!(whole.converged && left.converged && right.converged);
        let parts = left.value + right.value;
        let tol = sum_tol(whole.value, parts, whole.error_estimate + left.error_estimate + right.error_estimate);
        prop_assert!((whole.value - parts).abs() <= tol, "{} vs {}", whole.value, parts);
    }

    #[test]
    fn integrals_scale_linearly(c in arb_smooth(), iv in arb_interval(), k in -5.0..5.0f64) {
        let cfg = QuadConfig::default();
        let base = integrate_1d(&total1(|t| smooth(c, t)), iv, &cfg).unwrap();
        let scaled = integrate_1d(&total1(|t| k * smooth(c, t)), iv, &cfg).unwrap();
        let tol = 1e-13 * (k * base.value).abs() + 1e-15 * k.abs();
        prop_assert!((k * base.value - scaled.value).abs() <= tol, "{} vs {}", k * base.value, scaled.value);
    }

    #[test]
    fn double_integral_matches_iterated(cx in arb_smooth(), cy in arb_smooth(), r in arb_rect()) {
        let cfg = QuadConfig::default();
        let f = total2(|x, y| smooth(cx, x) * smooth(cy, y) + x * y);
        let double = integrate_2d(&f, r, &cfg).unwrap();
        let ix = integrate_1d(&total1(|x| smooth(cx, x)), r.x_range(), &cfg).unwrap();
        let iy = integrate_1d(&total1(|y| smooth(cy, y)), r.y_range(), &cfg).unwrap();
        let cross = (r.b * r.b - r.a * r.a) * (r.d * r.d - r.c * r.c) / 4.0;
        let iterated = ix.value * iy.value + cross;
        let errs = double.error_estimate
            + ix.error_estimate * iy.value.abs()
            + iy.error_estimate * ix.value.abs()
            + 64.0 * f64::EPSILON * (ix.value * iy.value).abs();
        prop_assert!(double.converged);
        prop_assert!((double.value - iterated).abs() <= sum_tol(double.value, iterated, errs));
    }

    /// Doubling the sample grid keeps every coarse sample, so it can only
    /// find more and larger violations.
    #[test]
    fn refining_the_grid_never_hides_violations(
        a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64,
        n in 3usize..9, m in 1usize..5,
    ) {
        let f = parse(&format!("({a})*x^2 + ({b})*sin(3*x) + ({c})*abs(x - 0.3)")).unwrap();
        let opts = |points: usize, lambdas: usize| CheckOptions {
            grid: SampleGrid { point_count: points, lambda_count: lambdas, lambda_open: true },
            ..CheckOptions::default()
        };
        let coarse = check_1d(&f as &dyn Univariate, Interval::unit(), ClassTag::Convex1D, &opts(n, m)).unwrap();
        let fine = check_1d(&f as &dyn Univariate, Interval::unit(), ClassTag::Convex1D, &opts(2 * n - 1, 2 * m + 1)).unwrap();
        prop_assert!(fine.samples_tested >= coarse.samples_tested);
        prop_assert!(fine.violations_found >= coarse.violations_found);
        if coarse.verdict == Verdict::Violated {
            prop_assert_eq!(fine.verdict, Verdict::Violated);
            let worst = |r: &hadamard_lab::classes::MembershipReport| r.witnesses[0].violation;
            prop_assert!(worst(&fine) >= worst(&coarse) - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetrized_members_are_symmetric(seed in any::<u64>()) {
        let (f, _) = gen_function(&GenSpec::new(ClassTag::CoordGL, seed, Rect::unit().into())).unwrap();
        let s = symmetrize(&f);
        prop_assert!(check_symmetry(&s as &dyn Bivariate, Interval::unit(), &CheckOptions::default()).is_none());
    }

    /// Every chain term is linear in `f`, so scaling `f` by `k > 0` scales
    /// every term and leaves the verdict alone.
    #[test]
    fn chain_terms_scale_with_f(seed in any::<u64>(), k in 0.1..10.0f64, idx in 0usize..3) {
        let (chain, class) = [
            (ChainId::CoordConvex, ClassTag::CoordConvex),
            (ChainId::Hq1d, ClassTag::GL1D),
            (ChainId::Hp1d, ClassTag::P1D),
        ][idx];
        let domain: Domain = if chain.takes_interval() { Interval::unit().into() } else { Rect::unit().into() };
        let (f, _) = gen_function(&GenSpec::new(class, seed, domain)).unwrap();
        let kf = Expr::binary(BinOp::Mul, Expr::num(k), f.clone());
        let opts = ChainOptions { preconditions: false, ..ChainOptions::default() };
        let base = evaluate(chain, &f, None, domain, &opts).unwrap();
        let scaled = evaluate(chain, &kf, None, domain, &opts).unwrap();
        for (t, s) in base.terms.iter().zip(&scaled.terms) {
            let (Some(t), Some(s)) = (t.value, s.value) else { continue };
            prop_assert!((k * t - s).abs() <= 1e-8 * (k * t).abs().max(1e-12), "{} vs {}", k * t, s);
        }
        if base.verdict != ChainVerdict::Inconclusive && scaled.verdict != ChainVerdict::Inconclusive {
            prop_assert_eq!(base.verdict, scaled.verdict);
        }
    }

    #[test]
    fn generated_members_pass_their_class_check(seed in any::<u64>(), idx in 0usize..9, r in arb_rect()) {
        let class = [
            ClassTag::Convex1D, ClassTag::P1D, ClassTag::GL1D,
            ClassTag::JointConvex, ClassTag::JointP, ClassTag::JointGL,
            ClassTag::CoordConvex, ClassTag::CoordP, ClassTag::CoordGL,
        ][idx];
        let domain: Domain = if class.dimension() == 1 { r.x_range().into() } else { r.into() };
        let (f, cert) = gen_function(&GenSpec::new(class, seed, domain)).unwrap();
        prop_assert_eq!(cert.class, class);
        let report = check_class(&f as &dyn Bivariate, r, class, &CheckOptions::default()).unwrap();
        prop_assert_eq!(report.verdict, Verdict::HoldsOnSamples, "{} ({})", f, cert.construction);
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>(), idx in 0usize..9) {
        let class = [
            ClassTag::Convex1D, ClassTag::P1D, ClassTag::GL1D,
            ClassTag::JointConvex, ClassTag::JointP, ClassTag::JointGL,
            ClassTag::CoordConvex, ClassTag::CoordP, ClassTag::CoordGL,
        ][idx];
        let domain: Domain = if class.dimension() == 1 { Interval::unit().into() } else { Rect::unit().into() };
        let spec = GenSpec::new(class, seed, domain);
        prop_assert_eq!(gen_function(&spec).unwrap(), gen_function(&spec).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fuzzing_is_reproducible(seed in any::<u64>()) {
        let cfg = FuzzConfig::default();
        let opts = ChainOptions::default();
        let a = fuzz_chain(ChainId::Prod1d, &cfg, 6, seed, &opts).unwrap();
        let b = fuzz_chain(ChainId::Prod1d, &cfg, 6, seed, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}
