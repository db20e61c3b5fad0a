use annihilator_core::extensions::{
    orthogonalize_real_line, ComplexRealLineFunction, RealLineFunction,
};
use annihilator_core::oracles::riemann_residual;
use annihilator_core::{
    solve_annihilating_phase, verify, CaseKind, Complex64, FunctionSet, FunctionSpec, Phase,
    SmoothPhase, SolveOptions,
};

fn unit(entries: Vec<FunctionSpec>) -> FunctionSet {
    FunctionSet::unit(entries).unwrap()
}

fn midpoint_inner(f: impl Fn(f64) -> Complex64, lo: f64, hi: f64, points: usize) -> Complex64 {
    let h = (hi - lo) / points as f64;
    (0..points).map(|i| f(lo + h * (i as f64 + 0.5)) * h).sum()
}

#[test]
fn solution_survives_json_and_verification() {
    let fset = unit(vec![
        FunctionSpec::polynomial(vec![0.5, -1.0, 3.0]),
        FunctionSpec::trigonometric(0.0, vec![[0.0, 1.0], [0.4, 0.0]]),
        FunctionSpec::polynomial(vec![0.0, 0.0, 0.0, 1.0]),
    ]);
    let opts = SolveOptions::default();
    let (g, report) = solve_annihilating_phase(&fset, &opts).unwrap();
    assert!(report.passed);
    assert_eq!(report.recursion_trace[0].case, CaseKind::Split);

    let reloaded = SmoothPhase::from_json(&g.to_json()).unwrap();
    let checked = verify(&fset, &reloaded, &opts).unwrap();
    assert!(checked.passed, "{:?}", checked.checks);

    let riemann = riemann_residual(&fset, Some(&reloaded), 400_000).unwrap();
    for (r, q) in riemann.iter().zip(&checked.residuals) {
        assert!((r - q).norm() < 1e-7, "{r} vs {q}");
    }
}

#[test]
fn mixed_dependence_recurses_and_annihilates() {
    // dependent on [0, 0.6] (both equal 1 there), independent after
    let bent = FunctionSpec::sampled(vec![0.0, 0.6, 1.0], vec![1.0, 1.0, 3.0]).unwrap();
    let fset = unit(vec![FunctionSpec::constant(1.0), bent]);
    let (g, report) = solve_annihilating_phase(&fset, &SolveOptions::default()).unwrap();
    assert!(report.max_residual < 1e-9, "{report:?}");
    let riemann = riemann_residual(&fset, Some(&g), 400_000).unwrap();
    assert!(riemann.iter().all(|r| r.norm() < 1e-7), "{riemann:?}");
    assert!(g.continuity_defect() < 1e-5);
}

#[test]
fn phase_on_a_shifted_domain() {
    let fset = FunctionSet::new(
        vec![
            FunctionSpec::constant(1.0),
            FunctionSpec::polynomial(vec![0.0, 1.0]),
        ],
        [0.2, 0.7],
    )
    .unwrap();
    let (g, report) = solve_annihilating_phase(&fset, &SolveOptions::default()).unwrap();
    assert_eq!(g.domain(), [0.2, 0.7]);
    assert!(report.max_residual < 1e-9);
    let direct = midpoint_inner(|x| Complex64::from_polar(x, g.value(x)), 0.2, 0.7, 200_000);
    assert!(direct.norm() < 1e-7, "{direct}");
}

#[test]
fn real_line_orthogonalization_decorrelates_a_pair() {
    let functions = vec![
        ComplexRealLineFunction {
            re: RealLineFunction::gaussian(0.0, 1.0),
            im: None,
        },
        ComplexRealLineFunction {
            re: RealLineFunction::gaussian(0.5, 0.8),
            im: Some(RealLineFunction::gaussian_polynomial(
                0.0,
                1.0,
                vec![0.0, 1.0],
            )),
        },
    ];
    let result = orthogonalize_real_line(&functions, 2049, &SolveOptions::default()).unwrap();
    let value = |f: &ComplexRealLineFunction, x: f64| {
        Complex64::new(f.re.value(x), f.im.as_ref().map_or(0.0, |g| g.value(x)))
    };
    let inner = midpoint_inner(
        |x| {
            let a = value(&functions[0], x) * Complex64::from_polar(1.0, result.phases[0].value(x));
            let b = value(&functions[1], x) * Complex64::from_polar(1.0, result.phases[1].value(x));
            a.conj() * b
        },
        -12.0,
        12.0,
        1_000_000,
    );
    // the sampled transform limits accuracy, not the solver
    assert!(inner.norm() < 1e-5, "{inner}");
    let plain = midpoint_inner(
        |x| value(&functions[0], x).conj() * value(&functions[1], x),
        -12.0,
        12.0,
        100_000,
    );
    assert!(plain.norm() > 0.1);
}
