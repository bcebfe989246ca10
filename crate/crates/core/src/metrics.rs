//! Per-slot run records and the regret / fit metrics computed from them.

use crate::environment::EnvSample;
use crate::model::Problem;
use crate::scalar::Scalar;

/// What one algorithm played and observed in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord<F> {
    /// `x^t`, the action played (before the update).
    pub action: Vec<F>,
    /// `f^t(x^t)`.
    pub cost: F,
    /// `g^t(x^t)`.
    pub constraints: Vec<F>,
    /// `h^t(x^t) = [g^t(x^t)]^+`.
    pub clipped: Vec<F>,
    /// `lambda^t`.
    pub duals: Vec<F>,
}

impl<F: Scalar> SlotRecord<F> {
    pub fn violation(&self) -> F {
        self.clipped.iter().copied().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord<F> {
    pub slots: Vec<SlotRecord<F>>,
}

impl<F: Scalar> RunRecord<F> {
    pub fn new() -> Self {
        RunRecord { slots: Vec::new() }
    }

    pub fn push(&mut self, slot: SlotRecord<F>) {
        self.slots.push(slot);
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The first `horizon` slots.
    pub fn prefix(&self, horizon: usize) -> &[SlotRecord<F>] {
        &self.slots[..horizon.min(self.slots.len())]
    }

    pub fn costs(&self) -> Vec<F> {
        self.slots.iter().map(|s| s.cost).collect()
    }
}

/// `Fit(T) = sum_t sum_m [g_m^t(x^t)]^+`.
pub fn fit<F: Scalar>(slots: &[SlotRecord<F>]) -> F {
    slots.iter().map(SlotRecord::violation).sum()
}

/// `Reg_S(T) = sum_t f^t(x^t) - sum_t f^t(x*)` with `T = slots.len()`.
pub fn static_regret<F: Scalar>(
    problem: &Problem<F>,
    slots: &[SlotRecord<F>],
    fixed: &[F],
    envs: &[EnvSample<F>],
) -> F {
    slots
        .iter()
        .zip(envs)
        .map(|(s, env)| s.cost - problem.total_cost(fixed, env))
        .sum()
}

/// `Reg_D(T) = sum_t (f^t(x^t) - f^t(x*_t))`.
pub fn dynamic_regret<F: Scalar>(
    problem: &Problem<F>,
    slots: &[SlotRecord<F>],
    per_slot: &[Vec<F>],
    envs: &[EnvSample<F>],
) -> F {
    slots
        .iter()
        .zip(per_slot)
        .zip(envs)
        .map(|((s, x), env)| s.cost - problem.total_cost(x, env))
        .sum()
}

/// `(1/T) sum_{t<=T} (f^t(x*) - f^t(x*_t))` for `T = envs.len()`.
pub fn cost_gap<F: Scalar>(
    problem: &Problem<F>,
    fixed: &[F],
    per_slot: &[Vec<F>],
    envs: &[EnvSample<F>],
) -> F {
    let total: F = per_slot
        .iter()
        .zip(envs)
        .map(|(x, env)| problem.total_cost(fixed, env) - problem.total_cost(x, env))
        .sum();
    total / F::of(envs.len().max(1) as f64)
}

/// The cost gap for every prefix `T = 1..=envs.len()` against one fixed action.
pub fn cost_gap_series<F: Scalar>(
    problem: &Problem<F>,
    fixed: &[F],
    per_slot: &[Vec<F>],
    envs: &[EnvSample<F>],
) -> Vec<F> {
    let mut acc = F::zero();
    per_slot
        .iter()
        .zip(envs)
        .enumerate()
        .map(|(i, (x, env))| {
            acc += problem.total_cost(fixed, env) - problem.total_cost(x, env);
            acc / F::of((i + 1) as f64)
        })
        .collect()
}

/// Running sums: `out[i] = sum(values[..=i])`.
pub fn prefix_sums<F: Scalar>(values: impl IntoIterator<Item = F>) -> Vec<F> {
    let mut acc = F::zero();
    values
        .into_iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Sample mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn slot(action: Vec<f64>, cost: f64, g: Vec<f64>) -> SlotRecord<f64> {
        let clipped = crate::model::clip(&g);
        SlotRecord {
            action,
            cost,
            constraints: g,
            duals: clipped.clone(),
            clipped,
        }
    }

    fn setup() -> (Problem<f64>, Vec<EnvSample<f64>>) {
        let p = Problem::with_defaults(Topology::full(1, 1, 1).unwrap()).unwrap();
        let envs = (0..3)
            .map(|i| EnvSample::constant(&p.topology, vec![1.0 + i as f64], 10.0, 4.0))
            .collect();
        (p, envs)
    }

    #[test]
    fn fit_examples() {
        let feasible = vec![slot(vec![], 0.0, vec![-1.0, 0.0]); 4];
        assert_eq!(fit(&feasible), 0.0);
        let one = vec![slot(vec![], 0.0, vec![-1.0, 2.0, -0.5])];
        assert_eq!(fit(&one), 2.0);
    }

    #[test]
    fn regret_is_zero_when_playing_the_comparator() {
        let (p, envs) = setup();
        let x = p.space.midpoint();
        let slots: Vec<_> = envs
            .iter()
            .map(|e| slot(x.clone(), p.total_cost(&x, e), p.constraints(&x, e)))
            .collect();
        assert_eq!(static_regret(&p, &slots, &x, &envs), 0.0);
        let per = vec![x.clone(); 3];
        assert_eq!(dynamic_regret(&p, &slots, &per, &envs), 0.0);
    }

    #[test]
    fn regret_is_additive_in_slot_costs() {
        let (p, envs) = setup();
        let x = p.space.midpoint();
        let mut slots: Vec<_> = envs
            .iter()
            .map(|e| slot(x.clone(), p.total_cost(&x, e), vec![]))
            .collect();
        let base = static_regret(&p, &slots, &x, &envs);
        slots[1].cost += 2.5;
        assert!((static_regret(&p, &slots, &x, &envs) - base - 2.5).abs() < 1e-12);
    }

    #[test]
    fn cost_gap_series_matches_pointwise() {
        let (p, envs) = setup();
        let fixed = p.space.midpoint();
        let per: Vec<_> = (0..3).map(|_| p.space.zeros()).collect();
        let series = cost_gap_series(&p, &fixed, &per, &envs);
        for t in 1..=3 {
            let direct = cost_gap(&p, &fixed, &per[..t], &envs[..t]);
            assert!((series[t - 1] - direct).abs() < 1e-12);
        }
        assert!(cost_gap(&p, &fixed, std::slice::from_ref(&fixed), &envs[..1]).abs() < 1e-15);
    }

    #[test]
    fn stats() {
        assert_eq!(prefix_sums(vec![1.0, 2.0, 3.0]), vec![1.0, 3.0, 6.0]);
        assert_eq!(mean_std(&[2.0, 4.0]), Some((3.0, 1.0)));
        assert_eq!(mean_std(&[]), None);
    }
}
