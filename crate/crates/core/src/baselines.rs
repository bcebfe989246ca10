//! Reference controllers the distributed algorithm is compared against, and a
//! common interface for running any of them slot by slot.

use serde::{Deserialize, Serialize};

use crate::agents::{Feedback, HyperParams, InitialAction, Network};
use crate::environment::EnvSample;
use crate::metrics::{RunRecord, SlotRecord};
use crate::model::{clip, Problem};
use crate::scalar::Scalar;

/// Something that plays an action each slot and learns from what it sees.
pub trait OnlineController<F: Scalar> {
    /// The action that will be played in the next slot.
    fn action(&self) -> Vec<F>;

    /// Plays, observes `env` and updates. Returns the record of the slot.
    fn step(&mut self, env: &EnvSample<F>, hp: &HyperParams<F>) -> SlotRecord<F>;

    fn run(&mut self, envs: &[EnvSample<F>], hp: &HyperParams<F>) -> RunRecord<F> {
        let mut rec = RunRecord::new();
        for env in envs {
            rec.push(self.step(env, hp));
        }
        rec
    }
}

impl<F: Scalar> OnlineController<F> for Network<F> {
    fn action(&self) -> Vec<F> {
        Network::action(self)
    }

    fn step(&mut self, env: &EnvSample<F>, hp: &HyperParams<F>) -> SlotRecord<F> {
        self.run_slot(env, hp)
    }
}

/// One primal-dual step with full, instantaneous information:
/// `lambda = h / (eta sigma)`, `x' = P(x - eta (grad f + J^T (lambda 1{g > 0})))`.
/// Returns the slot record for `x` and the next action.
pub fn centralized_step<F: Scalar>(
    problem: &Problem<F>,
    x: &[F],
    env: &EnvSample<F>,
    hp: &HyperParams<F>,
) -> (SlotRecord<F>, Vec<F>) {
    let g = problem.constraints(x, env);
    let h = clip(&g);
    let duals: Vec<F> = h.iter().map(|&v| hp.dual(v)).collect();
    let grad = problem.lagrangian_gradient(x, &duals, env);
    let mut next: Vec<F> = x
        .iter()
        .zip(&grad)
        .map(|(&xi, &gi)| xi - hp.step * gi)
        .collect();
    problem.space.project(&mut next);
    let rec = SlotRecord {
        action: x.to_vec(),
        cost: problem.total_cost(x, env),
        constraints: g,
        clipped: h,
        duals,
    };
    (rec, next)
}

/// A single controller that sees the whole network.
#[derive(Debug, Clone)]
pub struct Centralized<F> {
    problem: Problem<F>,
    x: Vec<F>,
}

impl<F: Scalar> Centralized<F> {
    pub fn new(problem: Problem<F>, init: InitialAction) -> Self {
        let x = match init {
            InitialAction::Zeros => problem.space.zeros(),
            InitialAction::Midpoint => problem.space.midpoint(),
        };
        Centralized { problem, x }
    }
}

impl<F: Scalar> OnlineController<F> for Centralized<F> {
    fn action(&self) -> Vec<F> {
        self.x.clone()
    }

    fn step(&mut self, env: &EnvSample<F>, hp: &HyperParams<F>) -> SlotRecord<F> {
        let (rec, next) = centralized_step(&self.problem, &self.x, env, hp);
        self.x = next;
        rec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cooperative,
    Centralized,
    Selfish,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Cooperative,
        Algorithm::Centralized,
        Algorithm::Selfish,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cooperative => "cooperative",
            Algorithm::Centralized => "centralized",
            Algorithm::Selfish => "selfish",
        }
    }

    pub fn controller<F: Scalar>(
        self,
        problem: &Problem<F>,
        init: InitialAction,
    ) -> Box<dyn OnlineController<F>> {
        match self {
            Algorithm::Cooperative => {
                Box::new(Network::new(problem.clone(), Feedback::Delayed, init))
            }
            Algorithm::Selfish => Box::new(Network::new(problem.clone(), Feedback::Selfish, init)),
            Algorithm::Centralized => Box::new(Centralized::new(problem.clone(), init)),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs `algorithm` from its initial action over `envs`.
pub fn simulate<F: Scalar>(
    algorithm: Algorithm,
    problem: &Problem<F>,
    envs: &[EnvSample<F>],
    hp: &HyperParams<F>,
    init: InitialAction,
) -> RunRecord<F> {
    algorithm.controller(problem, init).run(envs, hp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    #[test]
    fn fresh_feedback_reproduces_the_centralized_update() {
        let p = Problem::<f64>::with_defaults(Topology::full(2, 2, 2).unwrap()).unwrap();
        let envs: Vec<_> = (0..40)
            .map(|t| EnvSample::constant(&p.topology, vec![3.0 + (t % 5) as f64, 6.0], 9.0, 4.0))
            .collect();
        let hp = HyperParams::new(0.03, 4.0);
        let a = Network::new(p.clone(), Feedback::Fresh, InitialAction::Zeros).run(&envs, &hp);
        let b = Centralized::new(p, InitialAction::Zeros).run(&envs, &hp);
        for (sa, sb) in a.slots.iter().zip(&b.slots) {
            for (x, y) in sa.action.iter().zip(&sb.action) {
                assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(s, format!("\"{}\"", a.name()));
            assert_eq!(serde_json::from_str::<Algorithm>(&s).unwrap(), a);
        }
    }
}
