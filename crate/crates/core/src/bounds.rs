//! Communication lower bounds and brute-force checks of the projection
//! inequalities behind them.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;

pub type Point3 = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HblCheck {
    pub holds: bool,
    pub lhs: u64,
    pub rhs: u64,
}

fn distinct(v: &[Point3]) -> BTreeSet<Point3> {
    v.iter().copied().collect()
}

fn projection(v: &BTreeSet<Point3>, axis: usize) -> BTreeSet<i64> {
    v.iter().map(|p| p[axis]).collect()
}

/// |V| ≤ |φ_i(V)|·|φ_j(V)|·|φ_k(V)|.
pub fn check_basic_hbl(v: &[Point3]) -> HblCheck {
    let set = distinct(v);
    let lhs = set.len() as u64;
    let rhs = (0..3).map(|a| projection(&set, a).len() as u64).product();
    HblCheck { holds: lhs <= rhs, lhs, rhs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymmHblCheck {
    pub holds: bool,
    /// 6|V|.
    pub lhs: u64,
    /// |φ_i(V) ∪ φ_j(V) ∪ φ_k(V)|³.
    pub rhs: u64,
    /// |Ṽ|, the size of the closure under coordinate permutations; equals 6|V|.
    pub expanded_len: u64,
    /// φ_i(Ṽ) = φ_j(Ṽ) = φ_k(Ṽ) = φ_i(V) ∪ φ_j(V) ∪ φ_k(V).
    pub projections_equal: bool,
}

impl SymmHblCheck {
    pub fn passed(&self) -> bool {
        self.holds && self.expanded_len == self.lhs && self.projections_equal
    }
}

/// All six coordinate permutations of every point.
pub fn expand(v: &[Point3]) -> BTreeSet<Point3> {
    v.iter()
        .flat_map(|&[i, j, k]| [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]])
        .collect()
}

/// 6|V| ≤ |φ_i(V) ∪ φ_j(V) ∪ φ_k(V)|³ for strictly ordered points.
pub fn check_symm_hbl(v: &[Point3]) -> Result<SymmHblCheck> {
    if let Some(p) = v.iter().find(|p| !(p[0] > p[1] && p[1] > p[2])) {
        return Err(Error::InvalidArgument(format!("point {p:?} is not strictly ordered i > j > k")));
    }
    let set = distinct(v);
    let union: BTreeSet<i64> = (0..3).flat_map(|a| projection(&set, a)).collect();
    let lhs = 6 * set.len() as u64;
    let rhs = (union.len() as u64).pow(3);
    let tilde = expand(v);
    let projections_equal = (0..3).all(|a| projection(&tilde, a) == union);
    Ok(SymmHblCheck { holds: lhs <= rhs, lhs, rhs, expanded_len: tilde.len() as u64, projections_equal })
}

/// Optimum (x1, x2) of min x1 + 2·x2 subject to
/// x1 ≥ n(n−1)(n−2)/(6P) and 6·x1 ≤ x2³.
pub fn opt_solution(n: u64, p: u64) -> (f64, f64) {
    let work = (n * (n - 1) * (n - 2)) as f64 / p as f64;
    (work / 6.0, work.cbrt())
}

/// Words a processor must move over both vectors.
pub fn lower_bound(n: u64, p: u64) -> f64 {
    let work = (n * (n - 1) * (n - 2)) as f64 / p as f64;
    2.0 * work.cbrt() - 2.0 * n as f64 / p as f64
}

fn lower_bound_f(n: f64, p: f64) -> f64 {
    2.0 * (n * (n - 1.0) * (n - 2.0) / p).cbrt() - 2.0 * n / p
}

/// Two-vector p2p volume of the spherical partition over the lower bound
/// at the same n and P = q(q²+1).
pub fn optimality_ratio(n: f64, q: u64) -> f64 {
    let qf = q as f64;
    let p = qf * (qf * qf + 1.0);
    2.0 * (n * (qf + 1.0) / (qf * qf + 1.0) - n / p) / lower_bound_f(n, p)
}

/// (q+1)(q(q²+1))^(1/3)/(q²+1).
pub fn limit_ratio(q: u64) -> f64 {
    let qf = q as f64;
    (qf + 1.0) * (qf * (qf * qf + 1.0)).cbrt() / (qf * qf + 1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FuzzSummary {
    pub trials: usize,
    pub basic_failures: usize,
    pub symm_failures: usize,
    pub identity_failures: usize,
    /// Trial index of the first failure, if any.
    pub first_failure: Option<usize>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.basic_failures == 0 && self.symm_failures == 0 && self.identity_failures == 0
    }
}

/// Random point sets with coordinates in [1, 50], at most `max_points` each.
/// Trial `t` draws from its own stream, so the result does not depend on
/// the execution policy.
pub fn fuzz_hbl(trials: usize, max_points: usize, seed: u64, exec: Exec) -> FuzzSummary {
    let outcomes = exec.map_range(trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let size = rng.gen_range(1..=max_points.max(1));
        let free: Vec<Point3> =
            (0..size).map(|_| [rng.gen_range(1..=50), rng.gen_range(1..=50), rng.gen_range(1..=50)]).collect();
        let strict: Vec<Point3> = (0..size)
            .map(|_| {
                let mut c = rand::seq::index::sample(&mut rng, 50, 3).into_vec();
                c.sort_unstable_by(|a, b| b.cmp(a));
                [c[0] as i64 + 1, c[1] as i64 + 1, c[2] as i64 + 1]
            })
            .collect();
        let basic = check_basic_hbl(&free).holds;
        let symm = check_symm_hbl(&strict).expect("strict by construction");
        let identity = symm.expanded_len == symm.lhs && symm.projections_equal;
        (basic, symm.holds, identity)
    });
    let mut s = FuzzSummary { trials, basic_failures: 0, symm_failures: 0, identity_failures: 0, first_failure: None };
    for (t, (basic, symm, identity)) in outcomes.into_iter().enumerate() {
        s.basic_failures += usize::from(!basic);
        s.symm_failures += usize::from(!symm);
        s.identity_failures += usize::from(!identity);
        if !(basic && symm && identity) && s.first_failure.is_none() {
            s.first_failure = Some(t);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn basic_examples() {
        assert_eq!(check_basic_hbl(&[[1, 1, 1]]), HblCheck { holds: true, lhs: 1, rhs: 1 });
        let boxed: Vec<Point3> =
            (1..=3).flat_map(|i| (1..=4).flat_map(move |j| (1..=5).map(move |k| [i, j, k]))).collect();
        assert_eq!(check_basic_hbl(&boxed), HblCheck { holds: true, lhs: 60, rhs: 60 });
    }

    #[test]
    fn symmetric_examples() {
        let c = check_symm_hbl(&[[3, 2, 1]]).unwrap();
        assert_eq!((c.lhs, c.rhs, c.expanded_len), (6, 27, 6));
        assert!(c.holds && c.projections_equal);

        let tb: Vec<Point3> = (1..=5)
            .flat_map(|i| (1..i).flat_map(move |j| (1..j).map(move |k| [i, j, k])))
            .collect();
        let c = check_symm_hbl(&tb).unwrap();
        assert_eq!((c.lhs, c.rhs, c.expanded_len), (60, 125, 60));

        assert!(check_symm_hbl(&[[2, 2, 1]]).is_err());
    }

    #[test]
    fn bound_values() {
        // 120·119·118/30 = 56,168
        assert_abs_diff_eq!(lower_bound(120, 30), 2.0 * 56_168f64.cbrt() - 8.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lower_bound(120, 30), 68.5937, epsilon = 1e-3);
        assert_abs_diff_eq!(lower_bound(30, 10), 20.9105, epsilon = 1e-3);
        let (x1, x2) = opt_solution(120, 30);
        assert_abs_diff_eq!(x1, 56_168.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x2, 38.2968, epsilon = 1e-3);
        let (x1, x2) = opt_solution(3, 1);
        assert_abs_diff_eq!(x1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x2, 6f64.cbrt(), epsilon = 1e-12);
    }

    #[test]
    fn single_processor_needs_nothing() {
        for n in 3..200 {
            assert!(lower_bound(n, 1) <= 0.0);
        }
    }

    #[test]
    fn ratio_at_small_sizes() {
        // 2·15 / lower_bound(30, 10)
        assert_abs_diff_eq!(optimality_ratio(30.0, 2), 30.0 / lower_bound(30, 10), epsilon = 1e-9);
        assert_abs_diff_eq!(optimality_ratio(120.0, 3), 88.0 / lower_bound(120, 30), epsilon = 1e-9);
    }

    #[test]
    fn fuzz_is_clean_and_policy_independent() {
        let s = fuzz_hbl(500, 20, 9, Exec::Sequential);
        assert!(s.passed());
        assert_eq!(s, fuzz_hbl(500, 20, 9, Exec::Parallel));
    }

    proptest! {
        #[test]
        fn opt_point_is_tight(n in 3u64..2000, p in 1u64..500) {
            let (x1, x2) = opt_solution(n, p);
            let work = (n * (n - 1) * (n - 2)) as f64 / p as f64;
            prop_assert!((x1 - work / 6.0).abs() <= 1e-9 * work.max(1.0));
            prop_assert!((6.0 * x1 - x2.powi(3)).abs() <= 1e-9 * work.max(1.0));
        }

        #[test]
        fn perturbation_raises_objective(n in 3u64..2000, p in 1u64..500, d in 1e-6f64..10.0) {
            let (x1, x2) = opt_solution(n, p);
            prop_assert!(x1 + d + 2.0 * x2 > x1 + 2.0 * x2);
            prop_assert!(x1 + 2.0 * (x2 + d) > x1 + 2.0 * x2);
        }
    }
}
