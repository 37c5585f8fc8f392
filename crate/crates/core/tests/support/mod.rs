//! Property suites shared by the `properties` and `acceptance` targets. Each
//! suite runs a deterministic proptest runner and reports the first failure.

#![allow(dead_code)]

use eal_core::dd::DoubleDouble;
use eal_core::engine::{
    floor_iterates, hits_linear_floor, invariance_defect, multiple_average, occupancy, ExperimentSpec, Factor,
    IterateSequence,
};
use eal_core::expr::{parse, Expr, FunctionSpec, Func};
use eal_core::limits::{fourier_coefficient, mean_ergodic_limit, sliding_window_oracle, Normalization};
use eal_core::systems::{Observable, PointState, SystemSpec, TrigPoly};
use eal_core::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: [Suite; 10] = [
    ("expr round-trip", expr_round_trip),
    ("expr derivatives vs finite differences", expr_derivatives),
    ("engine boundedness and mass 1", engine_bounded),
    ("engine occupancy partition", occupancy_partition),
    ("engine hit-set exactness", hit_set_exact),
    ("engine bit-reproducibility under 1/2/8 workers", bit_reproducible),
    ("limits coefficient modulus bound", coefficient_bound),
    ("limits consistency triangle", consistency_triangle),
    ("systems group law", group_law),
    ("systems conditional-expectation projections", projections),
];

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Var),
        (-6i32..7).prop_map(|v| Expr::Const(v as f64 / 4.0)),
        (0.01f64..100.0).prop_map(Expr::Const),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let func = prop_oneof![
            Just(Func::Exp),
            Just(Func::Log),
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Sqrt)
        ];
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Pow(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (func, inner).prop_map(|(f, a)| Expr::Func(f, Box::new(a))),
        ]
    })
}

fn same_value(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(u), Ok(v)) => u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

pub fn expr_round_trip() -> Result<(), String> {
    run(256, expr_tree(), |e| {
        let text = e.to_string();
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("`{text}`: {err}")))?;
        for x in [0.5, 2.5, 7.0, 31.0] {
            prop_assert!(same_value(e.eval(x), back.eval(x)), "`{}` at {}", text, x);
        }
        prop_assert_eq!(back.to_string(), text);
        Ok(())
    })
}

fn smooth_function() -> impl Strategy<Value = String> {
    (0.1f64..3.0, 0.05f64..0.95, 0.1f64..2.0, 1u32..4, 0.0f64..1.0).prop_map(|(a, p, b, q, c)| {
        format!("{a}*x^{p} + {b}*log(x)^{q} + {c}*sqrt(x)*log(log(x))")
    })
}

pub fn expr_derivatives() -> Result<(), String> {
    run(128, (smooth_function(), 5.0f64..1e4), |(text, x)| {
        let f = FunctionSpec::parse(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let h = 1e-4 * x;
        for k in 1..=3usize {
            let lower = |t: f64| if k == 1 { f.value(t) } else { f.derivative(k - 1, t) };
            let (up, down, exact) = (lower(x + h), lower(x - h), f.derivative(k, x));
            let (up, down, exact) = match (up, down, exact) {
                (Ok(u), Ok(d), Ok(v)) => (u, d, v),
                _ => return Err(TestCaseError::fail(format!("{text} not evaluable near {x}"))),
            };
            let fd = (up - down) / (2.0 * h);
            let scale = exact.abs() + lower(x).unwrap().abs() / x;
            prop_assert!((fd - exact).abs() <= 1e-5 * scale, "{} order {} at {}: {} vs {}", text, k, x, fd, exact);
        }
        Ok(())
    })
}

fn trig_poly(max_degree: i64) -> impl Strategy<Value = TrigPoly> {
    prop::collection::vec((-max_degree..=max_degree, -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|modes| {
        let modes: Vec<(i64, Complex64)> = modes.into_iter().map(|(m, re, im)| (m, Complex64::new(re, im))).collect();
        TrigPoly::from_modes(&modes)
    })
}

fn two_factor_spec(f1: TrigPoly, f2: TrigPoly, x1: f64, x2: f64, c1: f64, c2: f64) -> ExperimentSpec {
    let it = |c: f64| IterateSequence::sublinear(FunctionSpec::parse(&format!("x^{c}")).unwrap());
    ExperimentSpec::new(vec![
        Factor {
            system: SystemSpec::rotation(eal_core::dd::consts::SQRT2),
            observable: Observable::TrigPoly(f1),
            iterate: it(c1),
            start: PointState::Circle(x1),
        },
        Factor {
            system: SystemSpec::rotation(eal_core::dd::consts::SQRT3),
            observable: Observable::TrigPoly(f2),
            iterate: it(c2),
            start: PointState::Circle(x2),
        },
    ])
    .unwrap()
}

pub fn engine_bounded() -> Result<(), String> {
    let s = (trig_poly(4), trig_poly(4), 0.0f64..1.0, 0.0f64..1.0, 1u64..3000);
    run(48, s, |(f1, f2, x1, x2, n)| {
        let spec = two_factor_spec(f1, f2, x1, x2, 0.8, 0.3);
        let a = multiple_average(&spec, n, 1).unwrap();
        prop_assert!(a.norm() <= spec.sup_bound() * (1.0 + 1e-12));
        let one = Observable::TensorProduct(vec![Observable::constant(1.0), Observable::constant(1.0)]);
        prop_assert_eq!(invariance_defect(&spec, n, &one, 1).unwrap(), 0.0);
        let unit = two_factor_spec(
            TrigPoly::constant(Complex64::new(1.0, 0.0)),
            TrigPoly::constant(Complex64::new(1.0, 0.0)),
            x1,
            x2,
            0.8,
            0.3,
        );
        prop_assert_eq!(multiple_average(&unit, n, 1).unwrap(), Complex64::new(1.0, 0.0));
        Ok(())
    })
}

pub fn occupancy_partition() -> Result<(), String> {
    run(48, (0.1f64..0.95, 0.05f64..0.09, 1u64..20_000), |(c1, c2, n)| {
        let it = |c: f64| IterateSequence::sublinear(FunctionSpec::parse(&format!("x^{c}")).unwrap());
        let t = occupancy(&[it(c1), it(c2 * c1)], n).unwrap();
        prop_assert_eq!(t.total(), n);
        Ok(())
    })
}

pub fn hit_set_exact() -> Result<(), String> {
    run(48, (1.0001f64..6.0, -2.0f64..2.0), |(g, ell)| {
        let (gamma, ell) = (DoubleDouble::from_f64(g), DoubleDouble::from_f64(ell));
        let floors = floor_iterates(&IterateSequence::linear(gamma, ell), 20_000).unwrap();
        let seen: std::collections::BTreeSet<i64> = floors.iter().copied().collect();
        for m in floors[0]..=*floors.last().unwrap() {
            prop_assert_eq!(seen.contains(&m), hits_linear_floor(gamma, ell, m), "gamma {} m {}", g, m);
        }
        Ok(())
    })
}

pub fn bit_reproducible() -> Result<(), String> {
    run(12, (trig_poly(3), trig_poly(3), 0.0f64..1.0, 0.0f64..1.0, 1u64..50_000), |(f1, f2, x1, x2, n)| {
        let spec = two_factor_spec(f1, f2, x1, x2, 0.9, 0.5);
        let one = multiple_average(&spec, n, 1).unwrap();
        for w in [2, 8] {
            let many = multiple_average(&spec, n, w).unwrap();
            prop_assert_eq!(one.re.to_bits(), many.re.to_bits());
            prop_assert_eq!(one.im.to_bits(), many.im.to_bits());
        }
        Ok(())
    })
}

pub fn coefficient_bound() -> Result<(), String> {
    run(1024, (0.01f64..50.0, -10.0f64..10.0, -1000i64..1000), |(g, ell, m)| {
        let c = fourier_coefficient(DoubleDouble::from_f64(g), DoubleDouble::from_f64(ell), m);
        let bound = if m == 0 { 1.0 } else { (g / (std::f64::consts::PI * m.abs() as f64)).min(1.0) };
        prop_assert!(c.norm() <= bound * (1.0 + 1e-12), "{}", c.norm());
        Ok(())
    })
}

pub fn consistency_triangle() -> Result<(), String> {
    let gammas = prop_oneof![
        Just(eal_core::dd::consts::SQRT2),
        Just(eal_core::dd::consts::SQRT3),
        Just(eal_core::dd::consts::GOLDEN),
        Just(eal_core::dd::consts::E),
    ];
    run(4, (gammas, trig_poly(8), -1.0f64..1.0, 0.0f64..1.0), |(gamma, f, ell, x)| {
        let ell = DoubleDouble::from_f64(ell);
        let system = SystemSpec::rotation(gamma.recip());
        let observable = Observable::TrigPoly(f.clone());
        let series = mean_ergodic_limit(&system, gamma, ell, &observable)
            .unwrap()
            .eval(&PointState::Circle(x))
            .unwrap();
        let oracle = sliding_window_oracle(gamma, ell, &f, x).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(oracle.selected, Normalization::Scaled);
        let spec = ExperimentSpec::new(vec![Factor {
            system,
            observable,
            iterate: IterateSequence::linear(gamma, ell),
            start: PointState::Circle(x),
        }])
        .unwrap();
        let empirical = multiple_average(&spec, 1_000_000, 1).unwrap();
        prop_assert!((series - oracle.value()).norm() <= 1e-10, "{} vs {}", series, oracle.value());
        prop_assert!((series - empirical).norm() <= 2e-2);
        prop_assert!((oracle.value() - empirical).norm() <= 2e-2);
        Ok(())
    })
}

fn circle_distance(a: &PointState, b: &PointState) -> f64 {
    let d = (a.as_circle().unwrap() - b.as_circle().unwrap()).rem_euclid(1.0);
    d.min(1.0 - d)
}

pub fn group_law() -> Result<(), String> {
    let s = (0.0f64..1.0, 0.0f64..1.0, -1_000_000i64..1_000_000, -1_000_000i64..1_000_000, 1u64..50, 0u64..50);
    run(256, s, |(theta, x, j, k, q, step)| {
        let r = SystemSpec::rotation(theta);
        let p = PointState::Circle(x);
        let two = r.apply_power(j, &r.apply_power(k, &p).unwrap()).unwrap();
        let one = r.apply_power(j + k, &p).unwrap();
        prop_assert!(circle_distance(&two, &one) <= 1e-9);
        prop_assert!(circle_distance(&r.apply_power(0, &p).unwrap(), &p) == 0.0);
        let c = SystemSpec::FiniteCycle { q, step: step % q };
        let y = PointState::Cycle(x.to_bits() % q);
        prop_assert_eq!(
            c.apply_power(j, &c.apply_power(k, &y).unwrap()).unwrap(),
            c.apply_power(j + k, &y).unwrap()
        );
        Ok(())
    })
}

pub fn projections() -> Result<(), String> {
    let s = (trig_poly(12), 1i64..12, 1u64..12, 0.0f64..1.0);
    run(128, s, |(f, p, q, x)| {
        let f = Observable::TrigPoly(f);
        let systems = [
            SystemSpec::rational_rotation(p, q).unwrap(),
            SystemSpec::rotation(eal_core::dd::consts::SQRT2),
        ];
        for s in systems {
            let ef = s.cond_exp_invariant(&f).unwrap();
            prop_assert_eq!(s.cond_exp_invariant(&ef).unwrap(), ef.clone());
            let moved = ef.compose_power(&s, 1).unwrap();
            let pt = PointState::Circle(x);
            prop_assert!((moved.eval(&pt).unwrap() - ef.eval(&pt).unwrap()).norm() <= 1e-12);
            prop_assert!((s.space_average(&ef).unwrap() - s.space_average(&f).unwrap()).norm() <= 1e-15);
        }
        let vals: Vec<Complex64> = (0..q).map(|i| Complex64::new((i as f64 * x).sin(), 0.0)).collect();
        let cyc = SystemSpec::FiniteCycle { q, step: p as u64 % q };
        let g = Observable::Tabulated(vals);
        let eg = cyc.cond_exp_invariant(&g).unwrap();
        let close = |a: &Observable, b: &Observable| (0..q).all(|i| {
            let pt = PointState::Cycle(i);
            (a.eval(&pt).unwrap() - b.eval(&pt).unwrap()).norm() <= 1e-14
        });
        prop_assert!(close(&cyc.cond_exp_invariant(&eg).unwrap(), &eg));
        prop_assert_eq!(eg.compose_power(&cyc, 1).unwrap(), eg.clone());
        prop_assert!((cyc.space_average(&eg).unwrap() - cyc.space_average(&g).unwrap()).norm() <= 1e-12);
        Ok(())
    })
}
