#![allow(dead_code)]

use edgealloc::agents::HyperParams;
use edgealloc::metrics::SlotRecord;
use edgealloc::{EnvSample, Problem, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn default_problem(d: usize, b: usize, s: usize) -> Problem<f64> {
    Problem::with_defaults(Topology::full(d, b, s).unwrap()).unwrap()
}

/// Uniform point of the box, each coordinate in `[lo, hi]` times its bound.
pub fn random_action(p: &Problem<f64>, rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<f64> {
    p.space
        .upper()
        .iter()
        .map(|&u| u * rng.gen_range(lo..=hi))
        .collect()
}

/// Environment drawn from the default ranges (gains 8..15, delays 3..10,
/// demands 1..10).
pub fn random_env(p: &Problem<f64>, rng: &mut impl Rng) -> EnvSample<f64> {
    let t = &p.topology;
    let mut e = EnvSample::constant(t, vec![0.0; t.num_devices()], 1.0, 1.0);
    e.requests
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(1.0..=10.0));
    e.gain_db
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(8.0..=15.0));
    e.gain_bs
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(8.0..=15.0));
    e.cloud_delay_b
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(3.0..=10.0));
    e.cloud_delay_s
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(3.0..=10.0));
    e.wired_delay
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(3.0..=10.0));
    e
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Reference implementation of the cooperative update on the global vector.
///
/// Local terms use this slot's multipliers, coupling terms owned by other
/// nodes use the previous slot's. Works from the global Jacobian and knows
/// nothing about agents or messages.
pub struct Monolithic {
    pub problem: Problem<f64>,
    pub x: Vec<f64>,
    prev_weights: Vec<f64>,
}

impl Monolithic {
    pub fn new(problem: Problem<f64>) -> Self {
        let m = problem.num_constraints();
        Monolithic {
            x: problem.space.zeros(),
            prev_weights: vec![0.0; m],
            problem,
        }
    }

    pub fn step(&mut self, env: &EnvSample<f64>, hp: &HyperParams<f64>) -> SlotRecord<f64> {
        let p = &self.problem;
        let t = &p.topology;
        let g = p.constraints(&self.x, env);
        let h: Vec<f64> = g.iter().map(|v| v.max(0.0)).collect();
        let lambda: Vec<f64> = h.iter().map(|v| v / (hp.step * hp.sigma)).collect();
        let jac = p.constraint_jacobian(&self.x, env);
        let mut grad = p.total_cost_gradient(&self.x, env);
        let owner_of_var: Vec<_> = (0..p.dim())
            .map(|j| t.nodes().find(|&n| t.action_range(n).contains(&j)).unwrap())
            .collect();
        for (m, row) in jac.iter().enumerate() {
            let (owner, _) = t.constraint_owner(m);
            let fresh = if g[m] > 0.0 { lambda[m] } else { 0.0 };
            for &(j, v) in row {
                let w = if owner_of_var[j] == owner {
                    fresh
                } else {
                    self.prev_weights[m]
                };
                grad[j] += w * v;
            }
        }
        let rec = SlotRecord {
            action: self.x.clone(),
            cost: p.total_cost(&self.x, env),
            constraints: g.clone(),
            clipped: h,
            duals: lambda.clone(),
        };
        for (j, gj) in grad.iter().enumerate() {
            self.x[j] = (self.x[j] - hp.step * gj).clamp(0.0, p.space.upper()[j]);
        }
        self.prev_weights = lambda
            .iter()
            .zip(&g)
            .map(|(l, gm)| if *gm > 0.0 { *l } else { 0.0 })
            .collect();
        rec
    }
}

/// Scalar re-implementation of the cost model for one device, base station
/// and server (default parameters), written directly from the formulas.
pub mod scalar_model {
    pub const DEV_CAP: f64 = 2.2;
    pub const DEV_MARGIN: f64 = 0.22;
    pub const SRV_CAP: f64 = 16.5;
    pub const SRV_MARGIN: f64 = 1.65;
    pub const Q_MARGIN: f64 = 0.5;

    pub fn inv_ext(u: f64, delta: f64) -> f64 {
        if u >= delta {
            1.0 / u
        } else {
            2.0 / delta - u / (delta * delta)
        }
    }

    pub fn rate(gain: f64, power: f64) -> f64 {
        (1.0 + gain * power).log2()
    }

    /// Wireless link: queue delay plus power cost.
    pub fn link(task: f64, power: f64, gain: f64) -> f64 {
        inv_ext(rate(gain, power) - task, Q_MARGIN) + 0.5 * power * power
    }
}

/// Independent optimum of the one-device, one-station, one-server problem.
///
/// With a single chain every link variable is pinned by the flow constraints
/// once the local processing `w0` and the forwarded amount `y1` are chosen,
/// and the powers and the server split solve one-dimensional convex problems.
/// The reduced objective is jointly convex in `(w0, y1)`, so nested ternary
/// searches find the optimum to machine precision.
pub mod chain {
    use super::scalar_model as sm;
    use super::{default_problem, random_env, rng};
    use edgealloc::EnvSample;
    use rand::Rng;

    const ITERS: usize = 100;

    pub fn ternary(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..ITERS {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if f(m1) <= f(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let x = 0.5 * (a + b);
        (x, f(x))
    }

    pub fn min_power(task: f64, gain: f64) -> f64 {
        (2f64.powf(task) - 1.0) / gain
    }

    /// `sum_t f^t` of the best chain action with local processing `w0` and
    /// `y1` forwarded from the station to the server.
    pub fn reduced(envs: &[EnvSample<f64>], w0: f64, y1: f64) -> f64 {
        let d_max = envs.iter().map(|e| e.requests[0]).fold(0.0, f64::max);
        let a_min = envs
            .iter()
            .map(|e| e.gain_db[0])
            .fold(f64::INFINITY, f64::min);
        let b_min = envs
            .iter()
            .map(|e| e.gain_bs[0])
            .fold(f64::INFINITY, f64::min);
        let w1 = (d_max - w0).max(0.0);
        let p_lo = min_power(w1, a_min);
        let q_lo = min_power(y1, b_min);
        if p_lo > 25.0 || q_lo > 25.0 || w1 > 25.0 {
            return f64::INFINITY;
        }
        let local = envs.len() as f64 * sm::inv_ext(sm::DEV_CAP - w0, sm::DEV_MARGIN);
        let (_, up) = ternary(p_lo, 25.0, |p| {
            envs.iter().map(|e| sm::link(w1, p, e.gain_db[0])).sum()
        });
        let yc = (w1 - y1).max(0.0);
        let (_, down) = ternary(q_lo, 25.0, |q| {
            envs.iter().map(|e| sm::link(y1, q, e.gain_bs[0])).sum()
        });
        let (_, server) = ternary(0.0, 15.0, |z| {
            let zc = (y1 - z).max(0.0);
            envs.iter()
                .map(|e| e.cloud_delay_s[0] * zc + sm::inv_ext(sm::SRV_CAP - z, sm::SRV_MARGIN))
                .sum()
        });
        local + up + envs.iter().map(|e| e.cloud_delay_b[0] * yc).sum::<f64>() + down + server
    }

    fn y_max(envs: &[EnvSample<f64>], w1: f64) -> f64 {
        let b_min = envs
            .iter()
            .map(|e| e.gain_bs[0])
            .fold(f64::INFINITY, f64::min);
        w1.min(25.0).min((1.0 + b_min * 25.0).log2())
    }

    fn w0_min(envs: &[EnvSample<f64>]) -> f64 {
        let d_max = envs.iter().map(|e| e.requests[0]).fold(0.0, f64::max);
        (d_max - 25.0).max(0.0)
    }

    /// Optimal `sum_t f^t` of the chain under `g^t <= 0` for every slot.
    pub fn chain_optimum(envs: &[EnvSample<f64>]) -> f64 {
        let d_max = envs.iter().map(|e| e.requests[0]).fold(0.0, f64::max);
        ternary(w0_min(envs), 2.0, |w0| {
            let ym = y_max(envs, (d_max - w0).max(0.0));
            ternary(0.0, ym, |y1| reduced(envs, w0, y1)).1
        })
        .1
    }

    /// Brute force over a `(w0, y1)` grid of the given pitch.
    pub fn chain_grid_optimum(envs: &[EnvSample<f64>], pitch: f64) -> f64 {
        let d_max = envs.iter().map(|e| e.requests[0]).fold(0.0, f64::max);
        let lo = w0_min(envs);
        let steps = ((2.0 - lo) / pitch).round() as usize;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            let w0 = lo + (2.0 - lo) * i as f64 / steps as f64;
            let ym = y_max(envs, (d_max - w0).max(0.0));
            let ys = (ym / pitch).ceil().max(1.0) as usize;
            for j in 0..=ys {
                best = best.min(reduced(envs, w0, ym * j as f64 / ys as f64));
            }
        }
        best
    }

    pub fn chain_envs(seed: u64, n: usize) -> Vec<EnvSample<f64>> {
        let p = default_problem(1, 1, 1);
        let mut r = rng(seed);
        (0..n)
            .map(|_| {
                let mut e = random_env(&p, &mut r);
                e.requests[0] = r.gen_range(1.0..7.0);
                e
            })
            .collect()
    }
}
