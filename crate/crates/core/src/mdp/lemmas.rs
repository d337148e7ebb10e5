//! Numeric oracles for the performance-difference identity and the
//! distribution-shift inequalities the improvement analysis rests on.

use super::{check_compatible, evaluate_exact, TabularMdp, TabularPolicy};
use crate::error::{DpiError, Result};

/// Both sides of the performance difference identity
/// `J(pi) - J(pi') = E_{(s,a) ~ d_pi pi}[A^{pi'}(s,a)] / (1 - gamma)`,
/// each computed from exact linear solves.
pub fn pdl_gap(
    mdp: &TabularMdp,
    pi: &TabularPolicy,
    pi_prime: &TabularPolicy,
) -> Result<(f64, f64)> {
    check_compatible(mdp, pi)?;
    check_compatible(mdp, pi_prime)?;
    let eval_pi = evaluate_exact(mdp, pi)?;
    let eval_prime = evaluate_exact(mdp, pi_prime)?;
    let lhs = eval_pi.j - eval_prime.j;
    let a_n = mdp.num_actions();
    let mut expect = 0.0;
    for s in 0..mdp.num_states() {
        let mut inner = 0.0;
        for a in 0..a_n {
            inner += pi.prob(s, a) * eval_prime.adv[s * a_n + a];
        }
        expect += eval_pi.d[s] * inner;
    }
    let rhs = expect / (1.0 - mdp.gamma());
    Ok((lhs, rhs))
}

/// Visitation-shift bound: with
/// `alpha = E_{s ~ d_pi1}[D_TV(pi1(.|s), pi2(.|s))]`, the L1 distance between
/// visitation distributions obeys `|d_pi1 - d_pi2|_1 <= 2 alpha / (1 - gamma)`.
///
/// Returns `(tv_d, alpha, bound)` where `tv_d` is the L1 norm.
pub fn visitation_tv_bound_check(
    mdp: &TabularMdp,
    pi1: &TabularPolicy,
    pi2: &TabularPolicy,
) -> Result<(f64, f64, f64)> {
    check_compatible(mdp, pi1)?;
    check_compatible(mdp, pi2)?;
    let e1 = evaluate_exact(mdp, pi1)?;
    let e2 = evaluate_exact(mdp, pi2)?;
    let tv_d: f64 = e1.d.iter().zip(&e2.d).map(|(a, b)| (a - b).abs()).sum();
    let alpha: f64 = (0..mdp.num_states())
        .map(|s| e1.d[s] * pi1.tv_distance_at(pi2, s))
        .sum();
    let bound = 2.0 * alpha / (1.0 - mdp.gamma());
    Ok((tv_d, alpha, bound))
}

/// Expectation-switch bound: for distributions `p, q` and a bounded `f`,
/// `|<p,f> - <q,f>| <= max|f| * |p - q|_1`. Returns `(diff, bound)`.
pub fn expectation_switch_check(p: &[f64], q: &[f64], f: &[f64]) -> Result<(f64, f64)> {
    if p.len() != q.len() || p.len() != f.len() || p.is_empty() {
        return Err(DpiError::invalid("p, q, f must share a nonempty support"));
    }
    for dist in [p, q] {
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|x| *x < 0.0) {
            return Err(DpiError::invalid("p and q must be probability vectors"));
        }
    }
    let c = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let ep: f64 = p.iter().zip(f).map(|(a, b)| a * b).sum();
    let eq: f64 = q.iter().zip(f).map(|(a, b)| a * b).sum();
    let l1: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok(((ep - eq).abs(), c * l1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_value_iteration, random_dense_mdp};
    use crate::seeding;

    #[test]
    fn pdl_zero_for_identical_policies() {
        let mdp = random_dense_mdp(1, 8, 3, 0.9).unwrap();
        let pol = TabularPolicy::uniform(8, 3);
        let (lhs, rhs) = pdl_gap(&mdp, &pol, &pol).unwrap();
        assert_eq!(lhs, 0.0);
        assert!(rhs.abs() <= 1e-12);
    }

    #[test]
    fn pdl_identity_random_instances() {
        for seed in 0..20u64 {
            let mdp = random_dense_mdp(seed, 20, 3, 0.9).unwrap();
            let mut rng = seeding::master_rng(1000 + seed);
            let pi = TabularPolicy::random(20, 3, &mut rng);
            let pi2 = TabularPolicy::random(20, 3, &mut rng);
            let (lhs, rhs) = pdl_gap(&mdp, &pi, &pi2).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8, "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn pdl_rhs_nonnegative_against_optimal() {
        let mdp = random_dense_mdp(5, 12, 3, 0.9).unwrap();
        let (_, greedy) = exact_value_iteration(&mdp, 1e-12).unwrap();
        let mut rng = seeding::master_rng(77);
        let pi = TabularPolicy::random(12, 3, &mut rng);
        let (_, rhs) = pdl_gap(&mdp, &pi, &greedy).unwrap();
        assert!(rhs >= -1e-9, "rhs against optimal must be nonnegative, got {rhs}");
    }

    #[test]
    fn lemma3_identical_policies() {
        let mdp = random_dense_mdp(2, 10, 2, 0.85).unwrap();
        let pol = TabularPolicy::uniform(10, 2);
        let (tv_d, alpha, _) = visitation_tv_bound_check(&mdp, &pol, &pol).unwrap();
        assert!(tv_d.abs() <= 1e-12);
        assert_eq!(alpha, 0.0);
    }

    #[test]
    fn lemma3_holds_on_random_pairs() {
        for seed in 0..100u64 {
            let mdp = random_dense_mdp(seed, 20, 3, 0.9).unwrap();
            let mut rng = seeding::master_rng(seed ^ 0xabcd);
            let pi1 = TabularPolicy::random(20, 3, &mut rng);
            let pi2 = TabularPolicy::random(20, 3, &mut rng);
            let (tv_d, _, bound) = visitation_tv_bound_check(&mdp, &pi1, &pi2).unwrap();
            assert!(tv_d <= bound + 1e-10, "seed {seed}: {tv_d} > {bound}");
        }
    }

    #[test]
    fn lemma3_single_state_deviation() {
        // Deterministic policies differing only in state 0:
        // alpha = d_pi1(0) (TV there is 1), bound = 2 d / (1 - gamma).
        let mdp = random_dense_mdp(3, 6, 2, 0.9).unwrap();
        let pi1 = TabularPolicy::deterministic(6, 2, &[0, 0, 0, 0, 0, 0]).unwrap();
        let pi2 = TabularPolicy::deterministic(6, 2, &[1, 0, 0, 0, 0, 0]).unwrap();
        let e1 = evaluate_exact(&mdp, &pi1).unwrap();
        let (tv_d, alpha, bound) = visitation_tv_bound_check(&mdp, &pi1, &pi2).unwrap();
        assert!((alpha - e1.d[0]).abs() <= 1e-12);
        assert!((bound - 2.0 * e1.d[0] / 0.1).abs() <= 1e-9);
        assert!(tv_d <= bound + 1e-10);
    }

    #[test]
    fn lemma4_cases() {
        let (diff, _) = expectation_switch_check(&[0.5, 0.5], &[0.5, 0.5], &[1.0, -3.0]).unwrap();
        assert_eq!(diff, 0.0);
        // tight case: p=(1,0), q=(0,1), f=(c,-c) -> diff = 2c = bound
        let c = 1.7;
        let (diff, bound) =
            expectation_switch_check(&[1.0, 0.0], &[0.0, 1.0], &[c, -c]).unwrap();
        assert!((diff - 2.0 * c).abs() <= 1e-12);
        assert!((bound - 2.0 * c).abs() <= 1e-12);
    }
}
