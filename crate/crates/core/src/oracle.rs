//! Benchmark comparators: the best fixed action in hindsight, the per-slot
//! optimal actions and the path length of the latter.
//!
//! The solver is an augmented Lagrangian method over the box with a
//! spectral projected gradient inner loop (Barzilai-Borwein steps, nonmonotone
//! Armijo backtracking). It works in double precision only.

use serde::{Deserialize, Serialize};

use crate::environment::EnvSample;
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::scalar::distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Contract: a converged solve violates no constraint by more than this.
    pub tol: f64,
    /// Violation the outer loop aims for (well inside `tol`).
    pub target_violation: f64,
    /// Inner stopping threshold on `||P(x - grad) - x||_inf`.
    pub stationarity: f64,
    pub rho0: f64,
    pub rho_max: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub armijo: f64,
    /// Nonmonotone line search window.
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            target_violation: 1e-9,
            stationarity: 1e-8,
            rho0: 10.0,
            rho_max: 1e10,
            max_outer: 60,
            max_inner: 20_000,
            armijo: 1e-4,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `sum_t f^t(x)` over the slots the solve covered.
    pub objective: f64,
    /// Largest `[g_m^t(x)]^+` over all constraints and slots.
    pub max_violation: f64,
    /// Total inner iterations.
    pub iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    /// Turns an unconverged solve into [`Error::Infeasible`].
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Infeasible {
                violation: self.max_violation,
                iterations: self.iterations,
            })
        }
    }
}

/// Smooth objective `(1/T) sum_t f^t` plus the augmented Lagrangian term of
/// the constraints of a single (worst case) environment.
struct Penalized<'a> {
    problem: &'a Problem<f64>,
    envs: &'a [EnvSample<f64>],
    worst: EnvSample<f64>,
    mu: Vec<f64>,
    rho: f64,
}

impl Penalized<'_> {
    fn cost(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .envs
            .iter()
            .map(|e| self.problem.total_cost(x, e))
            .sum();
        s / self.envs.len() as f64
    }

    fn value(&self, x: &[f64]) -> f64 {
        let g = self.problem.constraints(x, &self.worst);
        let pen: f64 = g
            .iter()
            .zip(&self.mu)
            .map(|(&gm, &mu)| {
                let s = (mu + self.rho * gm).max(0.0);
                s * s - mu * mu
            })
            .sum();
        self.cost(x) + pen / (2.0 * self.rho)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; x.len()];
        for e in self.envs {
            for (o, v) in grad.iter_mut().zip(self.problem.total_cost_gradient(x, e)) {
                *o += v;
            }
        }
        let k = 1.0 / self.envs.len() as f64;
        grad.iter_mut().for_each(|v| *v *= k);
        let g = self.problem.constraints(x, &self.worst);
        let jac = self.problem.constraint_jacobian(x, &self.worst);
        for ((row, &gm), &mu) in jac.iter().zip(&g).zip(&self.mu) {
            let w = (mu + self.rho * gm).max(0.0);
            if w > 0.0 {
                for &(j, v) in row {
                    grad[j] += w * v;
                }
            }
        }
        grad
    }
}

fn projected_step(x: &[f64], grad: &[f64], step: f64, upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .zip(upper)
        .map(|((&xi, &gi), &u)| (xi - step * gi).clamp(0.0, u))
        .collect()
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `phi` over the box from `x`. Returns the iterate, the final
/// stationarity measure and the number of iterations.
fn spg(
    phi: &Penalized<'_>,
    mut x: Vec<f64>,
    eps: f64,
    opts: &SolverOptions,
) -> (Vec<f64>, f64, usize) {
    const STEP_MIN: f64 = 1e-12;
    const STEP_MAX: f64 = 1e12;
    let upper = phi.problem.space.upper();
    let mut fx = phi.value(&x);
    let mut g = phi.gradient(&x);
    let mut hist = std::collections::VecDeque::with_capacity(opts.memory);
    hist.push_back(fx);
    let mut pg = inf_norm_diff(&projected_step(&x, &g, 1.0, upper), &x);
    let mut step = if pg > 0.0 {
        (1.0 / pg).clamp(STEP_MIN, STEP_MAX)
    } else {
        1.0
    };

    let mut it = 0;
    while it < opts.max_inner && pg > eps {
        it += 1;
        let trial = projected_step(&x, &g, step, upper);
        let d: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let slope = dot(&g, &d);
        let ref_val = hist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let (xn, fn_) = loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + lambda * di).collect();
            let fv = phi.value(&xn);
            if fv <= ref_val + opts.armijo * lambda * slope || lambda < 1e-20 {
                break (xn, fv);
            }
            lambda *= 0.5;
        };
        let gn = phi.gradient(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX
        };
        if s.iter().all(|&v| v == 0.0) {
            // no progress is possible at this precision
            x = xn;
            g = gn;
            pg = inf_norm_diff(&projected_step(&x, &g, 1.0, upper), &x);
            break;
        }
        x = xn;
        fx = fn_;
        g = gn;
        if hist.len() == opts.memory {
            hist.pop_front();
        }
        hist.push_back(fx);
        pg = inf_norm_diff(&projected_step(&x, &g, 1.0, upper), &x);
    }
    (x, pg, it)
}

fn max_violation(problem: &Problem<f64>, x: &[f64], envs: &[EnvSample<f64>]) -> f64 {
    envs.iter()
        .flat_map(|e| problem.constraints(x, e))
        .fold(0.0, f64::max)
}

/// Best fixed action for `envs`: minimizes `sum_t f^t(x)` over the box
/// subject to `g^t(x) <= 0` for every slot.
///
/// The constraints depend on the environment only through the demands
/// (increasing) and the gains (decreasing), so the feasible set of all slots
/// is the feasible set of the slot with the largest demands and smallest
/// gains. The solver starts from the box midpoint.
pub fn solve_static(
    problem: &Problem<f64>,
    envs: &[EnvSample<f64>],
    opts: &SolverOptions,
) -> SolveReport {
    assert!(!envs.is_empty(), "at least one slot is required");
    let mut phi = Penalized {
        problem,
        envs,
        worst: EnvSample::constraint_envelope(envs),
        mu: vec![0.0; problem.num_constraints()],
        rho: opts.rho0,
    };
    let mut x = problem.space.midpoint();
    let mut iterations = 0;
    let mut prev_viol = f64::INFINITY;
    let mut converged = false;
    for outer in 0..opts.max_outer {
        let eps = (0.1f64.powi(outer as i32 + 2)).max(opts.stationarity);
        let (xn, pg, it) = spg(&phi, x, eps, opts);
        x = xn;
        iterations += it;
        let g = problem.constraints(&x, &phi.worst);
        let viol = g.iter().copied().fold(0.0, f64::max);
        log::trace!(
            "outer {outer}: rho {:.3e} violation {viol:.3e} stationarity {pg:.3e}",
            phi.rho
        );
        if viol <= opts.target_violation && pg <= opts.stationarity {
            converged = true;
            break;
        }
        for (mu, &gm) in phi.mu.iter_mut().zip(&g) {
            *mu = (*mu + phi.rho * gm).max(0.0);
        }
        if viol > 0.25 * prev_viol {
            phi.rho = (phi.rho * 2.0).min(opts.rho_max);
        }
        prev_viol = viol;
    }
    let max_violation = max_violation(problem, &x, envs);
    let converged =
        max_violation <= opts.tol && (converged || max_violation <= opts.target_violation);
    let objective = envs.iter().map(|e| problem.total_cost(&x, e)).sum();
    SolveReport {
        solution: x,
        objective,
        max_violation,
        iterations,
        converged,
    }
}

/// Optimal action of one slot.
pub fn solve_dynamic(
    problem: &Problem<f64>,
    env: &EnvSample<f64>,
    opts: &SolverOptions,
) -> SolveReport {
    solve_static(problem, std::slice::from_ref(env), opts)
}

/// Per-slot optima of a whole sequence.
pub fn solve_dynamic_all(
    problem: &Problem<f64>,
    envs: &[EnvSample<f64>],
    opts: &SolverOptions,
) -> Vec<SolveReport> {
    envs.iter()
        .map(|e| solve_dynamic(problem, e, opts))
        .collect()
}

/// `sum_{t=1..T} ||x*_t - x*_{t-1}||` with `x*_0 = x*_1`.
pub fn path_length(solutions: &[Vec<f64>]) -> f64 {
    solutions.windows(2).map(|w| distance(&w[1], &w[0])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn problem(d: usize, b: usize, s: usize) -> Problem<f64> {
        Problem::with_defaults(Topology::full(d, b, s).unwrap()).unwrap()
    }

    #[test]
    fn path_length_examples() {
        assert_eq!(path_length(&vec![vec![1.0, 2.0]; 4]), 0.0);
        assert_eq!(path_length(&[vec![0.0, 0.0], vec![0.0, 1.0]]), 1.0);
        assert_eq!(path_length(&[vec![3.0]]), 0.0);
    }

    #[test]
    fn dynamic_solve_is_feasible_and_beats_the_midpoint() {
        let p = problem(2, 2, 2);
        let env = EnvSample::constant(&p.topology, vec![6.0, 9.0], 10.0, 5.0);
        let r = solve_dynamic(&p, &env, &SolverOptions::default());
        assert!(r.converged, "{r:?}");
        assert!(r.max_violation <= 1e-6);
        assert!(p.space.contains(&r.solution));
        let mid = p.space.midpoint();
        assert!(r.objective < p.total_cost(&mid, &env));
    }

    #[test]
    fn zero_demand_solution_costs_no_more_than_idling() {
        let p = problem(1, 1, 1);
        let env = EnvSample::constant(&p.topology, vec![0.0], 10.0, 5.0);
        let r = solve_dynamic(&p, &env, &SolverOptions::default());
        assert!(r.converged);
        assert!(r.objective <= p.total_cost(&p.space.zeros(), &env) + 1e-6);
    }

    #[test]
    fn static_with_one_slot_is_the_dynamic_solve() {
        let p = problem(1, 2, 1);
        let env = EnvSample::constant(&p.topology, vec![7.0], 9.0, 4.0);
        let opts = SolverOptions::default();
        let a = solve_static(&p, std::slice::from_ref(&env), &opts);
        let b = solve_dynamic(&p, &env, &opts);
        assert!(distance(&a.solution, &b.solution) <= 1e-5);
    }

    #[test]
    fn constant_environment_static_matches_single_slot() {
        let p = problem(2, 1, 2);
        let env = EnvSample::constant(&p.topology, vec![4.0, 5.0], 12.0, 6.0);
        let opts = SolverOptions::default();
        let envs = vec![env.clone(); 5];
        let s = solve_static(&p, &envs, &opts);
        let d = solve_dynamic(&p, &env, &opts);
        assert!(
            (s.objective - 5.0 * d.objective).abs() <= 1e-6,
            "{} {}",
            s.objective,
            d.objective
        );
    }

    #[test]
    fn unconverged_reports_are_errors() {
        let r = SolveReport {
            solution: vec![],
            objective: 0.0,
            max_violation: 1.0,
            iterations: 7,
            converged: false,
        };
        assert!(matches!(
            r.into_result(),
            Err(Error::Infeasible { iterations: 7, .. })
        ));
    }
}
