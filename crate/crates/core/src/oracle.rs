//! Closed-form analytics against the true means: the prophet allocation,
//! the optimal loss `L*(T)`, realized penalized loss and regret, and the
//! theoretical bound values used as diagnostics.
//!
//! The bound diagnostics evaluate the closed-form expressions only. The
//! sufficient conditions under which those bounds hold (gap margins relative
//! to `sqrt(log T / T)` terms) are not checked.

use serde::Serialize;
use thiserror::Error;

use crate::model::{classify_arms, ArmClassification, BanditInstance};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("counts sum to {got}, expected the horizon {expected}")]
    CountMismatch { expected: u64, got: u64 },
    #[error("expected one count per arm ({expected}), got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("brute force is limited to K <= 4 and T <= 30 (got K = {k}, T = {horizon})")]
    TooLarge { k: usize, horizon: u64 },
    #[error("horizon must be at least {min}, got {got}")]
    HorizonTooShort { min: u64, got: u64 },
    #[error("non-critical arm {0} has gap equal to its penalty")]
    DegenerateGap(usize),
    #[error(
        "arms {0} and {1} have equal mean-plus-penalty; maximal-deficit ordering is ambiguous"
    )]
    TiedSums(usize, usize),
}

/// Optimal fractional allocation of a prophet that knows every mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProphetAllocation {
    pub y: Vec<f64>,
    /// `L*(T) / T`.
    pub l_star_rate: f64,
    pub reference_opt_arm: usize,
}

/// Optimal allocation: critical arms and all optimal arms but the reference
/// one get exactly `tau_k`, non-critical arms get nothing, and the reference
/// (lowest-id optimal) arm takes the rest.
pub fn prophet_allocation(instance: &BanditInstance) -> ProphetAllocation {
    let class = classify_arms(instance);
    let reference = class.opt[0];
    let mut y = vec![0.0; instance.k()];
    for arm in instance.arms() {
        if arm.id != reference && class.gaps[arm.id] <= arm.penalty {
            y[arm.id] = arm.tau;
        }
    }
    let others: f64 = y.iter().sum();
    y[reference] = 1.0 - others;
    ProphetAllocation {
        y,
        l_star_rate: l_star_rate(instance, &class),
        reference_opt_arm: reference,
    }
}

fn l_star_rate(instance: &BanditInstance, class: &ArmClassification) -> f64 {
    instance
        .arms()
        .iter()
        .map(|a| class.gaps[a.id].min(a.penalty) * a.tau)
        .sum()
}

/// Normalized prophet objective `sum_k gap_k y_k + A_k (tau_k - y_k)_+`.
pub fn normalized_objective(instance: &BanditInstance, y: &[f64]) -> f64 {
    let class = classify_arms(instance);
    instance
        .arms()
        .iter()
        .zip(y)
        .map(|(a, &yk)| class.gaps[a.id] * yk + a.penalty * (a.tau - yk).max(0.0))
        .sum()
}

/// `L*(T) = T * sum_k min(gap_k, A_k) tau_k`.
pub fn l_star(instance: &BanditInstance, horizon: u64) -> f64 {
    horizon as f64 * l_star_rate(instance, &classify_arms(instance))
}

/// Realized penalized loss `sum_k gap_k N_k + A_k (tau_k T - N_k)_+`.
pub fn realized_loss(instance: &BanditInstance, horizon: u64, counts: &[u64]) -> f64 {
    let class = classify_arms(instance);
    realized_loss_with(instance, &class, horizon, counts)
}

fn realized_loss_with(
    instance: &BanditInstance,
    class: &ArmClassification,
    horizon: u64,
    counts: &[u64],
) -> f64 {
    let t = horizon as f64;
    instance
        .arms()
        .iter()
        .zip(counts)
        .map(|(a, &n)| {
            let n = n as f64;
            class.gaps[a.id] * n + a.penalty * (a.tau * t - n).max(0.0)
        })
        .sum()
}

/// Penalized regret evaluated class by class (optimal, critical,
/// non-critical terms), without forming `L*` explicitly.
pub fn regret_by_class(instance: &BanditInstance, horizon: u64, counts: &[u64]) -> f64 {
    let class = classify_arms(instance);
    let t = horizon as f64;
    let arms = instance.arms();
    let shortfall = |k: usize| (arms[k].tau * t - counts[k] as f64).max(0.0);
    let opt: f64 = class
        .opt
        .iter()
        .map(|&k| arms[k].penalty * shortfall(k))
        .sum();
    let cr: f64 = class
        .cr
        .iter()
        .map(|&k| {
            class.gaps[k] * (counts[k] as f64 - arms[k].tau * t) + arms[k].penalty * shortfall(k)
        })
        .sum();
    let non_cr: f64 = class
        .non_cr
        .iter()
        .map(|&k| {
            class.gaps[k] * counts[k] as f64 + arms[k].penalty * (shortfall(k) - arms[k].tau * t)
        })
        .sum();
    opt + cr + non_cr
}

/// Outcome of one run measured against the prophet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub horizon: u64,
    pub counts: Vec<u64>,
    /// Sum of realized rewards.
    pub total_reward: f64,
    /// `sum_k mu_k N_k(T)`.
    pub expected_reward: f64,
    pub realized_loss: f64,
    pub l_star: f64,
    pub penalized_regret: f64,
    /// `(tau_k T - N_k(T))_+`.
    pub per_arm_unfairness: Vec<f64>,
    /// `max_t (tau_k t - N_k(t))_+`, when tracked.
    pub max_deficit: Option<Vec<f64>>,
}

impl RegretReport {
    pub fn total_unfairness(&self) -> f64 {
        self.per_arm_unfairness.iter().sum()
    }

    /// `mu* T - S_pen` with expected rewards: the realized loss seen from the
    /// penalized-reward side.
    pub fn penalized_expected_reward(&self, instance: &BanditInstance) -> f64 {
        let penalties: f64 = instance
            .arms()
            .iter()
            .zip(&self.per_arm_unfairness)
            .map(|(a, u)| a.penalty * u)
            .sum();
        self.expected_reward - penalties
    }
}

pub fn penalized_regret(
    instance: &BanditInstance,
    horizon: u64,
    counts: &[u64],
    total_reward: f64,
    max_deficit: Option<Vec<f64>>,
) -> Result<RegretReport, OracleError> {
    if counts.len() != instance.k() {
        return Err(OracleError::WrongArity {
            expected: instance.k(),
            got: counts.len(),
        });
    }
    let got: u64 = counts.iter().sum();
    if got != horizon {
        return Err(OracleError::CountMismatch {
            expected: horizon,
            got,
        });
    }
    let class = classify_arms(instance);
    let t = horizon as f64;
    let loss = realized_loss_with(instance, &class, horizon, counts);
    let l_star = t * l_star_rate(instance, &class);
    Ok(RegretReport {
        horizon,
        counts: counts.to_vec(),
        total_reward,
        expected_reward: instance
            .arms()
            .iter()
            .zip(counts)
            .map(|(a, &n)| a.mu * n as f64)
            .sum(),
        realized_loss: loss,
        l_star,
        penalized_regret: loss - l_star,
        per_arm_unfairness: instance
            .arms()
            .iter()
            .zip(counts)
            .map(|(a, &n)| (a.tau * t - n as f64).max(0.0))
            .collect(),
        max_deficit,
    })
}

/// Minimum realized loss over every integer allocation of `horizon` pulls.
/// Exhaustive; only for small instances.
pub fn brute_force_l_star(instance: &BanditInstance, horizon: u64) -> Result<f64, OracleError> {
    let k = instance.k();
    if k > 4 || horizon > 30 {
        return Err(OracleError::TooLarge { k, horizon });
    }
    let class = classify_arms(instance);
    let mut counts = vec![0u64; k];
    let mut best = f64::INFINITY;
    fn walk(pos: usize, left: u64, counts: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            visit(counts);
            return;
        }
        for n in 0..=left {
            counts[pos] = n;
            walk(pos + 1, left - n, counts, visit);
        }
    }
    walk(0, horizon, &mut counts, &mut |c| {
        best = best.min(realized_loss_with(instance, &class, horizon, c));
    });
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapDependentBound {
    /// Logarithmic part of the bound.
    pub value: f64,
    /// Additive `O(K)` part: `K` times the per-arm constant.
    pub additive: f64,
}

/// Gap-dependent regret bound
/// `sum_{non-cr} max{min{8 ln T/(gap-A), (gap-A) tau T}, 8 ln T/gap} + sum_{cr} (8 ln T/gap - tau T)_+`.
pub fn gap_dependent_bound(
    instance: &BanditInstance,
    horizon: u64,
    per_arm_constant: f64,
) -> Result<GapDependentBound, OracleError> {
    if horizon < 2 {
        return Err(OracleError::HorizonTooShort {
            min: 2,
            got: horizon,
        });
    }
    let class = classify_arms(instance);
    let t = horizon as f64;
    let lt = 8.0 * t.ln();
    let arms = instance.arms();
    let mut value = 0.0;
    for &k in &class.non_cr {
        let gap = class.gaps[k];
        let margin = gap - arms[k].penalty;
        if margin <= 0.0 {
            return Err(OracleError::DegenerateGap(k));
        }
        value += (lt / margin).min(margin * arms[k].tau * t).max(lt / gap);
    }
    for &k in &class.cr {
        value += (lt / class.gaps[k] - arms[k].tau * t).max(0.0);
    }
    Ok(GapDependentBound {
        value,
        additive: per_arm_constant * instance.k() as f64,
    })
}

/// Gap-independent bound
/// `8 sqrt(T ln T) sum sqrt(tau_k) + 8 sqrt((1 - tau_min) K T ln T) + C sqrt(K T ln T)`.
pub fn gap_independent_bound(
    instance: &BanditInstance,
    horizon: u64,
    universal_constant: f64,
) -> Result<f64, OracleError> {
    if horizon < 2 {
        return Err(OracleError::HorizonTooShort {
            min: 2,
            got: horizon,
        });
    }
    let t = horizon as f64;
    let k = instance.k() as f64;
    let tlt = t * t.ln();
    let taus = instance.taus();
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let root_sum: f64 = taus.iter().map(|t| t.sqrt()).sum();
    Ok(8.0 * tlt.sqrt() * root_sum
        + 8.0 * ((1.0 - tau_min) * k * tlt).sqrt()
        + universal_constant * (k * tlt).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeficitCoefficient {
    pub arm: usize,
    /// 1-based position in the descending mean-plus-penalty order.
    pub rank: usize,
    pub coefficient: f64,
}

const TIE_TOL: f64 = 1e-12;

/// Orders arms by `mu_k + A_k`, descending, rejecting ties.
fn sum_order(instance: &BanditInstance) -> Result<Vec<usize>, OracleError> {
    let arms = instance.arms();
    let mut order: Vec<usize> = (0..arms.len()).collect();
    let score = |k: usize| arms[k].mu + arms[k].penalty;
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    for pair in order.windows(2) {
        if (score(pair[0]) - score(pair[1])).abs() <= TIE_TOL {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            return Err(OracleError::TiedSums(a, b));
        }
    }
    Ok(order)
}

/// Maximal-deficit coefficient for every rank `j = 1..K`, in rank order.
fn coefficients_by_rank(instance: &BanditInstance, order: &[usize]) -> Vec<f64> {
    let arms = instance.arms();
    let mu = |r: usize| arms[order[r]].mu;
    let lifted = |r: usize| arms[order[r]].mu + arms[order[r]].penalty;
    let kk = order.len();
    // inner[d] is the braced sum for rank d (0-based)
    let inner: Vec<f64> = (0..kk)
        .map(|d| {
            let above: f64 = (0..d).map(|m| (lifted(d) - mu(m)).powi(-2)).sum();
            let below: f64 = (d + 1..kk).map(|m| (lifted(d) - lifted(m)).powi(-2)).sum();
            above + below
        })
        .collect();
    (0..kk)
        .map(|j| 8.0 * (0..=j).map(|d| (j - d + 1) as f64 * inner[d]).sum::<f64>())
        .collect()
}

/// Coefficients `a_j` of the `a_j ln T` maximal-deficit bound for every arm
/// in the optimal or critical set, ordered by rank.
pub fn maximal_deficit_coefficients(
    instance: &BanditInstance,
) -> Result<Vec<DeficitCoefficient>, OracleError> {
    let order = sum_order(instance)?;
    let class = classify_arms(instance);
    let all = coefficients_by_rank(instance, &order);
    Ok(order
        .iter()
        .zip(all)
        .enumerate()
        .filter(|(_, (&arm, _))| class.gaps[arm] <= instance.arms()[arm].penalty)
        .map(|(j, (&arm, coefficient))| DeficitCoefficient {
            arm,
            rank: j + 1,
            coefficient,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{point_mass_arms, validate_instance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn instance(mus: &[f64], taus: &[f64], penalties: &[f64]) -> BanditInstance {
        validate_instance(point_mass_arms(mus, taus, penalties)).unwrap()
    }

    #[test]
    fn prophet_examples() {
        let p = prophet_allocation(&instance(&[0.9, 0.5, 0.2], &[0.1; 3], &[0.3; 3]));
        assert_eq!(p.y, vec![1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p.l_star_rate, 0.06, epsilon = 1e-15);

        let p = prophet_allocation(&instance(&[0.9, 0.5, 0.2], &[0.1; 3], &[0.5; 3]));
        assert_abs_diff_eq!(p.y[0], 0.9, epsilon = 1e-15);
        assert_eq!(&p.y[1..], &[0.1, 0.0]);
        assert_abs_diff_eq!(p.l_star_rate, 0.09, epsilon = 1e-15);

        let p = prophet_allocation(&instance(&[0.4, 0.9, 0.2], &[0.1; 3], &[0.0; 3]));
        assert_eq!(p.y, vec![0.0, 1.0, 0.0]);
        assert_eq!(p.l_star_rate, 0.0);
        assert_eq!(p.reference_opt_arm, 1);
    }

    #[test]
    fn tied_optimal_arms_keep_their_fraction() {
        let p = prophet_allocation(&instance(&[0.9, 0.2, 0.9], &[0.1, 0.2, 0.3], &[0.1; 3]));
        assert_eq!(p.reference_opt_arm, 0);
        assert_eq!(p.y[2], 0.3);
        assert_abs_diff_eq!(p.y[0], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn l_star_on_the_eight_arm_preset() {
        let mus = [0.9, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let inst = instance(&mus, &[1.0 / 16.0; 8], &[0.45; 8]);
        assert_abs_diff_eq!(l_star(&inst, 10_000), 1687.5, epsilon = 1e-9);
        assert_eq!(l_star(&inst.with_uniform_penalty(0.0).unwrap(), 777), 0.0);
        assert_eq!(l_star(&inst.with_taus(&[0.0; 8]).unwrap(), 777), 0.0);
    }

    #[test]
    fn regret_hand_example() {
        let inst = instance(&[0.9, 0.5], &[0.1, 0.1], &[0.3, 0.3]);
        let r = penalized_regret(&inst, 10, &[0, 10], 5.0, None).unwrap();
        assert_abs_diff_eq!(r.realized_loss, 4.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.l_star, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.penalized_regret, 4.0, epsilon = 1e-12);
        assert_eq!(r.per_arm_unfairness, vec![1.0, 0.0]);
        assert_abs_diff_eq!(r.expected_reward, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn prophet_counts_have_zero_regret() {
        // cr arm 1 gets tau T = 10 pulls, non-cr arm 2 none
        let inst = instance(&[0.9, 0.5, 0.2], &[0.1, 0.1, 0.1], &[0.5, 0.5, 0.5]);
        let r = penalized_regret(&inst, 100, &[90, 10, 0], 0.0, None).unwrap();
        assert_abs_diff_eq!(r.penalized_regret, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn count_mismatch() {
        let inst = instance(&[0.9, 0.5], &[0.1, 0.1], &[0.3, 0.3]);
        assert_eq!(
            penalized_regret(&inst, 10, &[3, 3], 0.0, None),
            Err(OracleError::CountMismatch {
                expected: 10,
                got: 6
            })
        );
    }

    #[test]
    fn brute_force_examples() {
        let inst = instance(&[0.9, 0.5], &[0.1, 0.1], &[0.3, 0.3]);
        let brute = brute_force_l_star(&inst, 10).unwrap();
        // all on arm 0 costs 0.3 * 1 = 0.3, equal to L*
        assert_abs_diff_eq!(brute, 0.3, epsilon = 1e-12);
        assert!(brute - l_star(&inst, 10) <= 0.4 + 1e-12);

        let zero = inst.with_uniform_penalty(0.0).unwrap();
        assert_eq!(brute_force_l_star(&zero, 17).unwrap(), 0.0);

        let inst = instance(&[0.9, 0.5, 0.2], &[0.1, 0.2, 0.1], &[0.5, 0.5, 0.5]);
        assert_abs_diff_eq!(
            brute_force_l_star(&inst, 20).unwrap(),
            l_star(&inst, 20),
            epsilon = 1e-12
        );

        let big = instance(&[0.9, 0.5, 0.2, 0.1, 0.0], &[0.1; 5], &[0.3; 5]);
        assert!(matches!(
            brute_force_l_star(&big, 10),
            Err(OracleError::TooLarge { .. })
        ));
        assert!(matches!(
            brute_force_l_star(&inst, 31),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn gap_dependent_examples() {
        let all_opt = instance(&[0.5, 0.5], &[0.1, 0.1], &[0.3, 0.3]);
        assert_eq!(gap_dependent_bound(&all_opt, 1000, 1.0).unwrap().value, 0.0);

        let inst = instance(&[0.9, 0.5], &[0.1, 0.1], &[0.3, 0.3]);
        let b = gap_dependent_bound(&inst, 10_000, 1.0).unwrap();
        let lt = 8.0 * 10_000f64.ln();
        assert_abs_diff_eq!(b.value, lt / 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(b.value, 184.2, epsilon = 0.05);
        assert_eq!(b.additive, 2.0);

        // critical arm whose log term is below tau T contributes nothing
        let cr = instance(&[0.9, 0.5], &[0.3, 0.3], &[0.5, 0.5]);
        assert_eq!(gap_dependent_bound(&cr, 10_000, 1.0).unwrap().value, 0.0);
        assert!(gap_dependent_bound(&cr, 1, 1.0).is_err());
    }

    #[test]
    fn gap_independent_examples() {
        let t = 10_000f64;
        let zero_tau = instance(&[0.9, 0.5, 0.1], &[0.0; 3], &[0.3; 3]);
        let root = (3.0 * t * t.ln()).sqrt();
        assert_abs_diff_eq!(
            gap_independent_bound(&zero_tau, 10_000, 1.0).unwrap(),
            9.0 * root,
            epsilon = 1e-9
        );

        let inst = instance(&[0.9, 0.7, 0.5, 0.3, 0.1], &[0.04; 5], &[0.3; 5]);
        let b1 = gap_independent_bound(&inst, 10_000, 1.0).unwrap();
        assert_abs_diff_eq!(b1, 8426.0, epsilon = 1.0);
        let b2 = gap_independent_bound(&inst, 10_000, 2.0).unwrap();
        assert_abs_diff_eq!(b2 - b1, (5.0 * t * t.ln()).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn maximal_deficit_examples() {
        let inst = instance(&[0.9, 0.5], &[0.1, 0.1], &[0.5, 0.5]);
        let a = maximal_deficit_coefficients(&inst).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].arm, a[0].rank), (0, 1));
        assert_abs_diff_eq!(a[0].coefficient, 50.0, epsilon = 1e-9);
        assert_eq!((a[1].arm, a[1].rank), (1, 2));
        assert_abs_diff_eq!(a[1].coefficient, 900.0, epsilon = 1e-9);

        let tied = instance(&[0.9, 0.5], &[0.1, 0.1], &[0.1, 0.5]);
        assert_eq!(
            maximal_deficit_coefficients(&tied),
            Err(OracleError::TiedSums(0, 1))
        );

        // non-critical arms are not reported
        let inst = instance(&[0.9, 0.5, 0.1], &[0.1; 3], &[0.5; 3]);
        let arms: Vec<usize> = maximal_deficit_coefficients(&inst)
            .unwrap()
            .iter()
            .map(|c| c.arm)
            .collect();
        assert_eq!(arms, vec![0, 1]);
    }

    fn random_instance() -> impl Strategy<Value = BanditInstance> {
        (2usize..6)
            .prop_flat_map(|k| {
                (
                    prop::collection::vec(0.0f64..1.0, k),
                    prop::collection::vec(0.0f64..1.0, k),
                    prop::collection::vec(0.0f64..1.0, k),
                    0.05f64..0.99,
                )
            })
            .prop_map(|(mus, raw_tau, pens, total)| {
                let s: f64 = raw_tau.iter().sum::<f64>() + 1e-9;
                let taus: Vec<f64> = raw_tau.iter().map(|t| t / s * total).collect();
                instance(&mus, &taus, &pens)
            })
    }

    proptest! {
        #[test]
        fn allocation_is_feasible_and_attains_l_star(inst in random_instance()) {
            let p = prophet_allocation(&inst);
            prop_assert!((p.y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.y.iter().all(|y| (0.0..=1.0).contains(y)));
            prop_assert!((normalized_objective(&inst, &p.y) - p.l_star_rate).abs() <= 1e-12);
            let class = classify_arms(&inst);
            for &k in &class.non_cr {
                prop_assert_eq!(p.y[k], 0.0);
            }
            for &k in &class.cr {
                prop_assert_eq!(p.y[k], inst.arms()[k].tau);
            }
        }

        #[test]
        fn coefficients_grow_with_rank(inst in random_instance()) {
            if let Ok(order) = sum_order(&inst) {
                let a = coefficients_by_rank(&inst, &order);
                for w in a.windows(2) {
                    prop_assert!(w[1] >= w[0]);
                }
            }
        }

        #[test]
        fn regret_is_nonnegative_and_matches_class_terms(
            inst in random_instance(),
            weights in prop::collection::vec(0u64..100, 6),
        ) {
            let counts: Vec<u64> = weights[..inst.k()].to_vec();
            let horizon: u64 = counts.iter().sum();
            prop_assume!(horizon > 0);
            let r = penalized_regret(&inst, horizon, &counts, 0.0, None).unwrap();
            prop_assert!(r.penalized_regret >= -1e-9);
            prop_assert!((regret_by_class(&inst, horizon, &counts) - r.penalized_regret).abs() <= 1e-9);
        }
    }
}
