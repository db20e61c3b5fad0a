//! Fixed problem families shared by the benchmarks.

use annihilator_core::{FunctionSet, FunctionSpec};

/// `{1, x, …, x^(n-1)}` on `[0, 1]`.
pub fn monomials(n: usize) -> FunctionSet {
    let entries = (0..n)
        .map(|k| {
            let mut c = vec![0.0; k + 1];
            c[k] = 1.0;
            FunctionSpec::polynomial(c)
        })
        .collect();
    FunctionSet::unit(entries).expect("monomials are valid")
}

/// A polynomial, a trigonometric function and a sampled kink, truncated to
/// the first `n` members (`n ≤ 3`).
pub fn mixed(n: usize) -> FunctionSet {
    let all = vec![
        FunctionSpec::polynomial(vec![0.3, -1.0, 2.0]),
        FunctionSpec::trigonometric(0.1, vec![[1.0, 0.0], [0.0, 0.5]]),
        FunctionSpec::sampled(vec![0.0, 0.4, 1.0], vec![1.0, -1.0, 0.5]).expect("valid samples"),
    ];
    FunctionSet::unit(all.into_iter().take(n).collect()).expect("fixture is valid")
}

/// Two functions with disjoint supports, which forces the recursive case.
pub fn disjoint_tapers() -> FunctionSet {
    FunctionSet::unit(vec![
        FunctionSpec::sampled(vec![0.0, 0.45, 0.5, 1.0], vec![1.0, 1.0, 0.0, 0.0])
            .expect("valid samples"),
        FunctionSpec::sampled(vec![0.0, 0.5, 0.55, 1.0], vec![0.0, 0.0, 1.0, 1.0])
            .expect("valid samples"),
    ])
    .expect("fixture is valid")
}
