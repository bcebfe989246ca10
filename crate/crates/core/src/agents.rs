//! Per-node agents of the distributed primal-dual algorithm and the
//! slot-synchronous message exchange between them.
//!
//! Each slot every agent transmits exactly once, at the start of the slot:
//!
//! * `m1`: its currently played coupled variables (`w_db`, `y_bs`, `z_ss'`)
//!   to the node whose flow constraint contains them;
//! * `m2`: `lambda_{n0} 1{h_{n0} > 0}` of the *previous* slot to every node
//!   whose variables enter its own flow constraint.
//!
//! The external part of the Lagrangian gradient is therefore one slot stale.
//! Agents only ever see other agents through the contents of their inboxes.

use serde::{Deserialize, Serialize};

use crate::environment::EnvSample;
use crate::metrics::{RunRecord, SlotRecord};
use crate::model::{clip, clipped_gradient_factor, project_box, Problem};
use crate::scalar::Scalar;
use crate::topology::{NodeId, NodeKind};

/// Step size `eta` and dual scaling `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams<F> {
    pub step: F,
    pub sigma: F,
}

impl<F: Scalar> HyperParams<F> {
    pub fn new(step: F, sigma: F) -> Self {
        HyperParams { step, sigma }
    }

    /// `eta = eta0 / sqrt(T)`.
    pub fn for_horizon(eta0: F, horizon: usize, sigma: F) -> Self {
        HyperParams {
            step: eta0 / F::of(horizon as f64).sqrt(),
            sigma,
        }
    }

    /// `lambda = h / (eta sigma)`.
    #[inline]
    pub fn dual(&self, clipped: F) -> F {
        clipped / (self.step * self.sigma)
    }
}

/// How the external gradient reaches an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// One exchange per slot; feedback describes the previous slot.
    Delayed,
    /// Debug mode: a second exchange within the slot carries the current
    /// multipliers. Reproduces the centralized update.
    Fresh,
    /// No feedback. Receivers cannot evaluate their coupling flow constraint,
    /// so they leave it out of their decisions (it is still measured).
    Selfish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialAction {
    #[default]
    Zeros,
    Midpoint,
}

/// Shared variable `sender -> receiver`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageM1<F> {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub value: F,
}

/// Scaled multiplier feedback `sender -> receiver`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageM2<F> {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub value: F,
}

#[derive(Debug, Clone)]
pub struct AgentState<F> {
    pub node: NodeId,
    x: Vec<F>,
    upper: Vec<F>,
    constraints: Vec<F>,
    lambda: Vec<F>,
    /// `lambda_{n0} 1{h_{n0} > 0}` of the last completed slot.
    flow_feedback: F,
    /// Delayed external gradient assembled from the m2 inbox.
    external: Vec<F>,
    inbox_m1: Vec<MessageM1<F>>,
    inbox_m2: Vec<MessageM2<F>>,
    // scratch
    grad: Vec<F>,
}

impl<F: Scalar> AgentState<F> {
    pub fn new(problem: &Problem<F>, node: NodeId, init: InitialAction) -> Self {
        let t = &problem.topology;
        let upper = problem.space.node_upper(t, node).to_vec();
        let x = match init {
            InitialAction::Zeros => vec![F::zero(); upper.len()],
            InitialAction::Midpoint => upper.iter().map(|&u| u * F::of(0.5)).collect(),
        };
        let m = t.local_constraint_count(node.kind);
        AgentState {
            node,
            grad: vec![F::zero(); x.len()],
            external: vec![F::zero(); x.len()],
            x,
            upper,
            constraints: vec![F::zero(); m],
            lambda: vec![F::zero(); m],
            flow_feedback: F::zero(),
            inbox_m1: Vec::new(),
            inbox_m2: Vec::new(),
        }
    }

    pub fn action(&self) -> &[F] {
        &self.x
    }

    pub fn duals(&self) -> &[F] {
        &self.lambda
    }

    pub fn constraints(&self) -> &[F] {
        &self.constraints
    }

    /// Delayed external gradient used by the last primal update.
    pub fn external_gradient(&self) -> &[F] {
        &self.external
    }

    /// Current coupled variables, one message per receiving node.
    pub fn emit_m1(&self, problem: &Problem<F>) -> Vec<MessageM1<F>> {
        problem
            .coupled_outputs(self.node)
            .into_iter()
            .map(|(pos, receiver)| MessageM1 {
                sender: self.node,
                receiver,
                value: self.x[pos],
            })
            .collect()
    }

    /// Feedback about the previous slot (zero in the first slot) to every node
    /// whose variables appear in this node's flow constraint.
    pub fn emit_m2(&self, problem: &Problem<F>) -> Vec<MessageM2<F>> {
        self.feedback_messages(problem, self.flow_feedback)
    }

    fn feedback_messages(&self, problem: &Problem<F>, value: F) -> Vec<MessageM2<F>> {
        problem
            .topology
            .required_by(self.node)
            .into_iter()
            .map(|receiver| MessageM2 {
                sender: self.node,
                receiver,
                value,
            })
            .collect()
    }

    pub fn deliver_m1(&mut self, m: MessageM1<F>) {
        self.inbox_m1.push(m);
    }

    pub fn deliver_m2(&mut self, m: MessageM2<F>) {
        self.inbox_m2.push(m);
    }

    /// Evaluates the node's constraints at the played action; coupling inflows
    /// come from the m1 inbox.
    pub fn evaluate(&mut self, problem: &Problem<F>, env: &EnvSample<F>) {
        let inflow = match self.node.kind {
            NodeKind::Device => env.requests[self.node.index],
            _ => self.inbox_m1.iter().map(|m| m.value).sum(),
        };
        problem.local_constraints_into(self.node, &self.x, inflow, env, &mut self.constraints);
    }

    /// `lambda_n = h_n / (eta sigma)`.
    pub fn dual_update(&mut self, hp: &HyperParams<F>) {
        for (l, &g) in self.lambda.iter_mut().zip(&self.constraints) {
            *l = hp.dual(g.max(F::zero()));
        }
    }

    /// Current-slot feedback value, used by the fresh (zero-delay) mode.
    pub fn fresh_feedback(&self) -> F {
        self.lambda[0] * clipped_gradient_factor(self.constraints[0])
    }

    /// Projected step on `H_nL + H_nE`, where `H_nE` is assembled from the m2
    /// inbox (unless `feedback` is [`Feedback::Selfish`]).
    pub fn primal_update(
        &mut self,
        problem: &Problem<F>,
        env: &EnvSample<F>,
        hp: &HyperParams<F>,
        feedback: Feedback,
    ) {
        problem.cost_gradient_into(self.node, &self.x, env, &mut self.grad);
        let rows = problem.local_constraint_gradients(self.node, &self.x, env);
        let skip_flow = feedback == Feedback::Selfish && self.node.kind != NodeKind::Device;
        for (i, row) in rows.iter().enumerate() {
            if i == 0 && skip_flow {
                continue;
            }
            let k = self.lambda[i] * clipped_gradient_factor(self.constraints[i]);
            if k != F::zero() {
                for (g, &r) in self.grad.iter_mut().zip(row) {
                    *g += k * r;
                }
            }
        }

        self.external.iter_mut().for_each(|v| *v = F::zero());
        if feedback != Feedback::Selfish {
            for (pos, receiver) in problem.coupled_outputs(self.node) {
                // d g_{v0} / d x = +1 for an inflow variable of v
                let fb: F = self
                    .inbox_m2
                    .iter()
                    .filter(|m| m.sender == receiver)
                    .map(|m| m.value)
                    .sum();
                self.external[pos] += fb;
            }
        }

        for ((x, &g), &e) in self.x.iter_mut().zip(&self.grad).zip(&self.external) {
            *x -= hp.step * (g + e);
        }
        project_box(&mut self.x, &self.upper);
    }

    /// Closes the slot: stores next slot's feedback and clears the inboxes.
    pub fn finish_slot(&mut self) {
        self.flow_feedback = self.fresh_feedback();
        self.inbox_m1.clear();
        self.inbox_m2.clear();
    }
}

/// Messages observed on the wire during one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WireLog<F> {
    pub m1: Vec<MessageM1<F>>,
    pub m2: Vec<MessageM2<F>>,
}

/// All agents of one run plus the synchronous message bus between them.
#[derive(Debug, Clone)]
pub struct Network<F> {
    problem: Problem<F>,
    agents: Vec<AgentState<F>>,
    feedback: Feedback,
    slot: usize,
    tap: Option<Vec<WireLog<F>>>,
}

impl<F: Scalar> Network<F> {
    pub fn new(problem: Problem<F>, feedback: Feedback, init: InitialAction) -> Self {
        let agents = problem
            .topology
            .nodes()
            .map(|n| AgentState::new(&problem, n, init))
            .collect();
        Network {
            problem,
            agents,
            feedback,
            slot: 0,
            tap: None,
        }
    }

    pub fn problem(&self) -> &Problem<F> {
        &self.problem
    }

    pub fn feedback(&self) -> Feedback {
        self.feedback
    }

    pub fn agents(&self) -> &[AgentState<F>] {
        &self.agents
    }

    /// Number of completed slots.
    pub fn slot(&self) -> usize {
        self.slot
    }

    /// Starts recording every message put on the wire.
    pub fn enable_tap(&mut self) {
        self.tap = Some(Vec::new());
    }

    pub fn wire_log(&self) -> Option<&[WireLog<F>]> {
        self.tap.as_deref()
    }

    /// The global action about to be played.
    pub fn action(&self) -> Vec<F> {
        self.agents
            .iter()
            .flat_map(|a| a.x.iter().copied())
            .collect()
    }

    fn agent_mut(&mut self, n: NodeId) -> &mut AgentState<F> {
        let p = self.problem.topology.position(n);
        &mut self.agents[p]
    }

    /// One slot of the algorithm.
    pub fn run_slot(&mut self, env: &EnvSample<F>, hp: &HyperParams<F>) -> SlotRecord<F> {
        self.run_slot_with(env, hp, |_| {})
    }

    /// Like [`Network::run_slot`], but `tamper` may rewrite (or add to) the m2
    /// messages while they are in transit.
    pub fn run_slot_with(
        &mut self,
        env: &EnvSample<F>,
        hp: &HyperParams<F>,
        mut tamper: impl FnMut(&mut Vec<MessageM2<F>>),
    ) -> SlotRecord<F> {
        let played = self.action();

        // (1) single transmission at the start of the slot
        let m1: Vec<_> = self
            .agents
            .iter()
            .flat_map(|a| a.emit_m1(&self.problem))
            .collect();
        let mut m2: Vec<_> = match self.feedback {
            Feedback::Delayed => self
                .agents
                .iter()
                .flat_map(|a| a.emit_m2(&self.problem))
                .collect(),
            Feedback::Fresh | Feedback::Selfish => Vec::new(),
        };
        tamper(&mut m2);
        if let Some(tap) = &mut self.tap {
            tap.push(WireLog {
                m1: m1.clone(),
                m2: m2.clone(),
            });
        }
        for m in m1 {
            self.agent_mut(m.receiver).deliver_m1(m);
        }
        for m in m2 {
            self.agent_mut(m.receiver).deliver_m2(m);
        }

        // (2)-(4) environment revealed, local evaluation, dual update
        let problem = &self.problem;
        for a in &mut self.agents {
            a.evaluate(problem, env);
            a.dual_update(hp);
        }

        if self.feedback == Feedback::Fresh {
            let fresh: Vec<_> = self
                .agents
                .iter()
                .flat_map(|a| a.feedback_messages(&self.problem, a.fresh_feedback()))
                .collect();
            if let Some(log) = self.tap.as_mut().and_then(|t| t.last_mut()) {
                log.m2.extend(fresh.iter().copied());
            }
            for m in fresh {
                self.agent_mut(m.receiver).deliver_m2(m);
            }
        }

        let problem = &self.problem;
        let cost = self
            .agents
            .iter()
            .map(|a| problem.node_cost(a.node, &a.x, env))
            .sum();
        let constraints: Vec<F> = self
            .agents
            .iter()
            .flat_map(|a| a.constraints.iter().copied())
            .collect();
        let duals = self
            .agents
            .iter()
            .flat_map(|a| a.lambda.iter().copied())
            .collect();

        // (5) primal update with the (delayed) external feedback
        let feedback = self.feedback;
        for a in &mut self.agents {
            a.primal_update(problem, env, hp, feedback);
            a.finish_slot();
        }
        self.slot += 1;

        SlotRecord {
            action: played,
            cost,
            clipped: clip(&constraints),
            constraints,
            duals,
        }
    }

    /// Runs over a whole environment sequence.
    pub fn run(&mut self, envs: &[EnvSample<F>], hp: &HyperParams<F>) -> RunRecord<F> {
        let mut rec = RunRecord::new();
        for env in envs {
            rec.push(self.run_slot(env, hp));
        }
        rec
    }
}
