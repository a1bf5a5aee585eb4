//! Aggregation of children importances and a sampling harness for the laws an
//! averaging operator must satisfy: symmetry, idempotence, monotonicity and the
//! compensative bounds `min λ <= A(λ) <= max λ` they imply.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of sampled tuples per law unless the caller says otherwise.
pub const DEFAULT_TRIALS: usize = 1000;
/// Longest tuple the default sampler draws.
pub const DEFAULT_MAX_LEN: usize = 8;

pub trait AggregationOperator<T: Scalar> {
    fn name(&self) -> &str;

    /// Aggregates a non-empty tuple of importances.
    fn apply(&self, values: &[T]) -> Result<T>;

    /// Value `c` such that assigning `c` to each of `unknown` extra children makes
    /// `apply(known ∪ {c; unknown}) == parent`. Only operators that support exact
    /// down-propagation return `Some`.
    fn invert(&self, _parent: T, _known: &[T], _unknown: usize) -> Option<T> {
        None
    }
}

/// Arithmetic mean, the default operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mean;

impl<T: Scalar> AggregationOperator<T> for Mean {
    fn name(&self) -> &str {
        "mean"
    }

    fn apply(&self, values: &[T]) -> Result<T> {
        mean_aggregate(values)
    }

    fn invert(&self, parent: T, known: &[T], unknown: usize) -> Option<T> {
        if unknown == 0 {
            return None;
        }
        let total = T::from_count(known.len() + unknown);
        let known_sum: T = known.iter().copied().sum();
        Some((parent * total - known_sum) / T::from_count(unknown))
    }
}

pub fn mean_aggregate<T: Scalar>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: T = values.iter().copied().sum();
    Ok(sum / T::from_count(values.len()))
}

/// Adapts a closure into an operator, e.g. to plant a deliberately broken one.
pub struct FnOperator<F> {
    name: String,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> T> AggregationOperator<T> for FnOperator<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn apply(&self, values: &[T]) -> Result<T> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok((self.f)(values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Law {
    Symmetry,
    Idempotence,
    Monotonicity,
    CompensativeBounds,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Law::Symmetry => "symmetry",
            Law::Idempotence => "idempotence",
            Law::Monotonicity => "monotonicity",
            Law::CompensativeBounds => "compensative-bounds",
        };
        f.write_str(name)
    }
}

/// Inputs that broke a law. `other` holds the permutation (symmetry) or the
/// dominating tuple (monotonicity).
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample<T> {
    pub input: Vec<T>,
    pub output: Option<T>,
    pub other: Option<Vec<T>>,
    pub other_output: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawReport<T> {
    pub law: Law,
    pub passed: bool,
    pub trials: usize,
    pub counterexample: Option<Counterexample<T>>,
}

impl<T> LawReport<T> {
    fn pass(law: Law, trials: usize) -> Self {
        Self {
            law,
            passed: true,
            trials,
            counterexample: None,
        }
    }

    fn fail(law: Law, trials: usize, counterexample: Counterexample<T>) -> Self {
        Self {
            law,
            passed: false,
            trials,
            counterexample: Some(counterexample),
        }
    }
}

/// Seeded generator of importance tuples with lengths in `[min_len, max_len]` and
/// values uniform in `[-1, 1]`; the endpoints and zero are drawn with extra weight.
#[derive(Debug, Clone)]
pub struct TupleSampler {
    rng: ChaCha8Rng,
    min_len: usize,
    max_len: usize,
}

impl TupleSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_lengths(seed, 1, DEFAULT_MAX_LEN)
    }

    pub fn with_lengths(seed: u64, min_len: usize, max_len: usize) -> Self {
        assert!(
            min_len >= 1 && min_len <= max_len,
            "tuple lengths must satisfy 1 <= min <= max"
        );
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            min_len,
            max_len,
        }
    }

    pub fn value<T: Scalar>(&mut self) -> T {
        match self.rng.gen_range(0..20) {
            0 => -T::one(),
            1 => T::one(),
            2 => T::zero(),
            _ => T::lit(self.rng.gen_range(-1.0..=1.0)),
        }
    }

    pub fn tuple_len(&mut self) -> usize {
        self.rng.gen_range(self.min_len..=self.max_len)
    }

    pub fn tuple<T: Scalar>(&mut self) -> Vec<T> {
        let n = self.tuple_len();
        (0..n).map(|_| self.value()).collect()
    }

    pub fn permutation_of<T: Clone>(&mut self, values: &[T]) -> Vec<T> {
        let mut shuffled = values.to_vec();
        shuffled.shuffle(&mut self.rng);
        shuffled
    }

    /// `(λ, λ')` with `λ_i <= λ'_i` for every position; roughly one pair in ten is equal.
    pub fn dominated_pair<T: Scalar>(&mut self) -> (Vec<T>, Vec<T>) {
        let low = self.tuple::<T>();
        let equal = self.rng.gen_range(0..10) == 0;
        let high = low
            .iter()
            .map(|&x| {
                if equal {
                    x
                } else {
                    let step: f64 = self.rng.gen_range(0.0..=1.0);
                    (x + T::lit(step) * (T::one() - x)).min(T::one())
                }
            })
            .collect();
        (low, high)
    }
}

fn within<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::law_tolerance()
}

pub fn check_symmetry<T: Scalar>(
    op: &impl AggregationOperator<T>,
    sampler: &mut TupleSampler,
    trials: usize,
) -> LawReport<T> {
    for _ in 0..trials {
        let input: Vec<T> = sampler.tuple();
        let permuted = sampler.permutation_of(&input);
        let (a, b) = (op.apply(&input).ok(), op.apply(&permuted).ok());
        let ok = matches!((a, b), (Some(a), Some(b)) if within(a, b));
        if !ok {
            return LawReport::fail(
                Law::Symmetry,
                trials,
                Counterexample {
                    input,
                    output: a,
                    other: Some(permuted),
                    other_output: b,
                },
            );
        }
    }
    LawReport::pass(Law::Symmetry, trials)
}

/// Always probes `i = -1`, `0` and `1` before the sampled trials.
pub fn check_idempotence<T: Scalar>(
    op: &impl AggregationOperator<T>,
    sampler: &mut TupleSampler,
    trials: usize,
) -> LawReport<T> {
    let boundary = [-T::one(), T::zero(), T::one()];
    let boundary_len = DEFAULT_MAX_LEN.min(sampler.max_len);
    let probes = boundary
        .iter()
        .map(|&v| (v, boundary_len))
        .chain((0..trials).map(|_| (sampler.value(), sampler.tuple_len())))
        .collect::<Vec<_>>();
    for (value, n) in probes {
        let input = vec![value; n];
        let out = op.apply(&input).ok();
        if !out.is_some_and(|o| within(o, value)) {
            return LawReport::fail(
                Law::Idempotence,
                trials,
                Counterexample {
                    input,
                    output: out,
                    other: None,
                    other_output: None,
                },
            );
        }
    }
    LawReport::pass(Law::Idempotence, trials)
}

pub fn check_monotonicity<T: Scalar>(
    op: &impl AggregationOperator<T>,
    sampler: &mut TupleSampler,
    trials: usize,
) -> LawReport<T> {
    for _ in 0..trials {
        let (low, high) = sampler.dominated_pair::<T>();
        let (a, b) = (op.apply(&low).ok(), op.apply(&high).ok());
        let ok = matches!((a, b), (Some(a), Some(b)) if a <= b + T::law_tolerance());
        if !ok {
            return LawReport::fail(
                Law::Monotonicity,
                trials,
                Counterexample {
                    input: low,
                    output: a,
                    other: Some(high),
                    other_output: b,
                },
            );
        }
    }
    LawReport::pass(Law::Monotonicity, trials)
}

pub fn check_compensative_bounds<T: Scalar>(
    op: &impl AggregationOperator<T>,
    sampler: &mut TupleSampler,
    trials: usize,
) -> LawReport<T> {
    for _ in 0..trials {
        let input: Vec<T> = sampler.tuple();
        let lo = input.iter().copied().fold(T::infinity(), T::min);
        let hi = input.iter().copied().fold(T::neg_infinity(), T::max);
        let out = op.apply(&input).ok();
        let tol = T::law_tolerance();
        if !out.is_some_and(|o| lo - tol <= o && o <= hi + tol) {
            return LawReport::fail(
                Law::CompensativeBounds,
                trials,
                Counterexample {
                    input,
                    output: out,
                    other: None,
                    other_output: None,
                },
            );
        }
    }
    LawReport::pass(Law::CompensativeBounds, trials)
}

/// Runs all four checks, each with its own sampler derived from `seed`.
pub fn check_all_laws<T: Scalar>(
    op: &impl AggregationOperator<T>,
    seed: u64,
    trials: usize,
) -> Vec<LawReport<T>> {
    vec![
        check_symmetry(op, &mut TupleSampler::new(seed), trials),
        check_idempotence(op, &mut TupleSampler::new(seed.wrapping_add(1)), trials),
        check_monotonicity(op, &mut TupleSampler::new(seed.wrapping_add(2)), trials),
        check_compensative_bounds(op, &mut TupleSampler::new(seed.wrapping_add(3)), trials),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first() -> FnOperator<fn(&[f64]) -> f64> {
        FnOperator::new("first", |v: &[f64]| v[0])
    }

    fn sum() -> FnOperator<fn(&[f64]) -> f64> {
        FnOperator::new("sum", |v: &[f64]| v.iter().sum())
    }

    fn negated_mean() -> FnOperator<fn(&[f64]) -> f64> {
        FnOperator::new("negated-mean", |v: &[f64]| {
            -v.iter().sum::<f64>() / v.len() as f64
        })
    }

    #[test]
    fn mean_values() {
        assert_eq!(mean_aggregate(&[0.8, 0.7]).unwrap(), 0.75);
        assert_eq!(mean_aggregate(&[-1.0, 1.0]).unwrap(), 0.0);
        for i in [-1.0, -0.3, 0.0, 0.42, 1.0] {
            assert_eq!(mean_aggregate(&[i, i, i]).unwrap(), i);
        }
        assert_eq!(mean_aggregate::<f64>(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn mean_passes_every_law() {
        for report in check_all_laws::<f64>(&Mean, 7, DEFAULT_TRIALS) {
            assert!(
                report.passed,
                "{} failed: {:?}",
                report.law, report.counterexample
            );
        }
        for report in check_all_laws::<f32>(&Mean, 7, DEFAULT_TRIALS) {
            assert!(report.passed, "f32 {} failed", report.law);
        }
    }

    #[test]
    fn first_element_breaks_symmetry() {
        let report = check_symmetry(&first(), &mut TupleSampler::with_lengths(1, 2, 8), 100);
        assert!(!report.passed);
        let ce = report.counterexample.unwrap();
        assert_ne!(ce.input, ce.other.unwrap());
    }

    #[test]
    fn singletons_are_vacuously_symmetric() {
        let report = check_symmetry(&first(), &mut TupleSampler::with_lengths(1, 1, 1), 100);
        assert!(report.passed);
    }

    #[test]
    fn sum_breaks_idempotence() {
        assert_eq!(sum().apply(&[0.5, 0.5]).unwrap(), 1.0);
        let report = check_idempotence(&sum(), &mut TupleSampler::new(3), 100);
        assert!(!report.passed);
        assert!(report.counterexample.is_some());
    }

    #[test]
    fn negated_mean_breaks_monotonicity() {
        let report = check_monotonicity(&negated_mean(), &mut TupleSampler::new(4), 100);
        assert!(!report.passed);
        let ce = report.counterexample.unwrap();
        assert!(ce.output.unwrap() > ce.other_output.unwrap());
    }

    #[test]
    fn shifted_max_breaks_bounds() {
        let op = FnOperator::new("max+0.1", |v: &[f64]| {
            (v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.1).min(1.0)
        });
        let report = check_compensative_bounds(&op, &mut TupleSampler::new(5), 100);
        assert!(!report.passed);
    }

    #[test]
    fn singleton_bounds_force_identity() {
        let report =
            check_compensative_bounds::<f64>(&Mean, &mut TupleSampler::with_lengths(6, 1, 1), 200);
        assert!(report.passed);
        let report =
            check_compensative_bounds(&sum(), &mut TupleSampler::with_lengths(6, 1, 1), 200);
        assert!(report.passed, "sum of one element is that element");
    }

    #[test]
    fn dominated_pairs_are_ordered() {
        let mut s = TupleSampler::new(9);
        for _ in 0..500 {
            let (lo, hi) = s.dominated_pair::<f64>();
            assert_eq!(lo.len(), hi.len());
            assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b && *b <= 1.0));
        }
    }

    #[test]
    fn mean_inversion() {
        let c = Mean.invert(0.6, &[0.8], 1).unwrap();
        assert!((c - 0.4f64).abs() < 1e-12);
        let c = Mean.invert(0.5, &[0.2, 0.4], 2).unwrap();
        assert!((mean_aggregate(&[0.2, 0.4, c, c]).unwrap() - 0.5f64).abs() < 1e-12);
        assert_eq!(
            <Mean as AggregationOperator<f64>>::invert(&Mean, 0.5, &[0.1], 0),
            None
        );
        assert_eq!(first().invert(0.5, &[0.1], 1), None);
    }
}
