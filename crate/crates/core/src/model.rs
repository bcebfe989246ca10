//! Action layout, box constraints, per-node costs with analytic gradients and
//! the (possibly coupling) constraint functions.
//!
//! Node action blocks:
//!
//! | node   | layout                                      | length |
//! |--------|---------------------------------------------|--------|
//! | device | `[w_d0, w_d1..w_dB, p_d1..p_dB]`            | 2B+1   |
//! | BS     | `[y_bC, y_b1..y_bS, q_b1..q_bS]`            | 2S+1   |
//! | server | `[z_sC, z_s1..z_sS]` (`z_ss` = local work)  | S+1    |
//!
//! Every node owns a flow conservation constraint `g_n0 = inflow - outflow`
//! (local index 0). Devices and base stations also own one rate constraint
//! per wireless link. Inflows of base stations and servers are other nodes'
//! variables; those are the coupling constraints.

use serde::{Deserialize, Serialize};

use crate::environment::EnvSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::{NodeId, NodeKind, Topology};

/// Positions inside a node's action block.
pub mod layout {
    /// `w_d0`, `y_bC` and `z_sC` all sit at position 0.
    pub const FIRST: usize = 0;

    /// Device: `w_db`. Base station: `y_bs`. Server: `z_ss'`.
    #[inline]
    pub const fn link(target: usize) -> usize {
        1 + target
    }

    /// Device: `p_db` (`fanout` = B). Base station: `q_bs` (`fanout` = S).
    #[inline]
    pub const fn power(fanout: usize, target: usize) -> usize {
        1 + fanout + target
    }
}

/// Upper bounds of the control variables, uniform across nodes of one kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxBounds {
    pub w_local: f64,
    pub w_offload: f64,
    pub p: f64,
    pub y_cloud: f64,
    pub y_offload: f64,
    pub q: f64,
    pub z_cloud: f64,
    pub z_local: f64,
    pub z_reroute: f64,
}

impl Default for BoxBounds {
    fn default() -> Self {
        BoxBounds {
            w_local: 2.0,
            w_offload: 25.0,
            p: 25.0,
            y_cloud: 30.0,
            y_offload: 25.0,
            q: 25.0,
            z_cloud: 50.0,
            z_local: 15.0,
            z_reroute: 10.0,
        }
    }
}

/// The box `0 <= x <= upper` over the flattened action vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace<F> {
    upper: Vec<F>,
}

impl<F: Scalar> ActionSpace<F> {
    /// Explicit per-entry bounds. Entries of missing links must be zero,
    /// every other entry strictly positive.
    pub fn new(topology: &Topology, upper: Vec<F>) -> Result<Self> {
        if upper.len() != topology.dim() {
            return Err(Error::InvalidConfig(format!(
                "bound vector has {} entries, expected {}",
                upper.len(),
                topology.dim()
            )));
        }
        let active = active_mask(topology);
        for (i, (&u, &on)) in upper.iter().zip(&active).enumerate() {
            let ok = if on { u > F::zero() } else { u == F::zero() };
            if !ok || !u.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "bad upper bound at entry {i}"
                )));
            }
        }
        Ok(ActionSpace { upper })
    }

    pub fn from_bounds(topology: &Topology, b: &BoxBounds) -> Result<Self> {
        let (nb, ns) = (topology.num_bs(), topology.num_servers());
        let mut upper = Vec::with_capacity(topology.dim());
        for n in topology.nodes() {
            match n.kind {
                NodeKind::Device => {
                    upper.push(b.w_local);
                    upper.extend((0..nb).map(|_| b.w_offload));
                    upper.extend((0..nb).map(|_| b.p));
                }
                NodeKind::BaseStation => {
                    upper.push(b.y_cloud);
                    upper.extend((0..ns).map(|_| b.y_offload));
                    upper.extend((0..ns).map(|_| b.q));
                }
                NodeKind::Server => {
                    upper.push(b.z_cloud);
                    upper.extend(
                        (0..ns).map(|s| if s == n.index { b.z_local } else { b.z_reroute }),
                    );
                }
            }
        }
        let mask = active_mask(topology);
        let upper = upper
            .into_iter()
            .zip(mask)
            .map(|(u, on)| if on { F::of(u) } else { F::zero() })
            .collect();
        Self::new(topology, upper)
    }

    pub fn upper(&self) -> &[F] {
        &self.upper
    }

    pub fn node_upper<'a>(&'a self, topology: &Topology, n: NodeId) -> &'a [F] {
        &self.upper[topology.action_range(n)]
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    /// Euclidean projection onto the box (componentwise clamp).
    pub fn project(&self, x: &mut [F]) {
        project_box(x, &self.upper);
    }

    pub fn contains(&self, x: &[F]) -> bool {
        x.len() == self.upper.len()
            && x.iter()
                .zip(&self.upper)
                .all(|(&v, &u)| v >= F::zero() && v <= u)
    }

    pub fn midpoint(&self) -> Vec<F> {
        self.upper.iter().map(|&u| u * F::of(0.5)).collect()
    }

    pub fn zeros(&self) -> Vec<F> {
        vec![F::zero(); self.upper.len()]
    }

    /// `||upper||`: the largest distance between two points of the box.
    pub fn diameter(&self) -> F {
        crate::scalar::norm(&self.upper)
    }

    pub fn cast<G: Scalar>(&self) -> ActionSpace<G> {
        ActionSpace {
            upper: self.upper.iter().map(|u| G::of(u.to_f64_lossy())).collect(),
        }
    }
}

/// Componentwise clamp of `x` to `[0, upper]`.
pub fn project_box<F: Scalar>(x: &mut [F], upper: &[F]) {
    for (v, &u) in x.iter_mut().zip(upper) {
        *v = v.max(F::zero()).min(u);
    }
}

/// `true` for every entry of the flattened action that belongs to an existing
/// link (or to a node-local variable).
pub fn active_mask(topology: &Topology) -> Vec<bool> {
    let (nb, ns) = (topology.num_bs(), topology.num_servers());
    let mut mask = Vec::with_capacity(topology.dim());
    for n in topology.nodes() {
        match n.kind {
            NodeKind::Device => {
                mask.push(true);
                let links: Vec<bool> = (0..nb)
                    .map(|b| topology.has_device_link(n.index, b))
                    .collect();
                mask.extend(&links);
                mask.extend(&links);
            }
            NodeKind::BaseStation => {
                mask.push(true);
                let links: Vec<bool> = (0..ns).map(|s| topology.has_bs_link(n.index, s)).collect();
                mask.extend(&links);
                mask.extend(&links);
            }
            NodeKind::Server => {
                mask.push(true);
                mask.extend((0..ns).map(|s| s == n.index || topology.has_server_link(n.index, s)));
            }
        }
    }
    mask
}

/// Cost model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams<F> {
    /// `b_w`: rate units per log2 unit.
    pub bandwidth: F,
    /// Processing capacity of `w_d0`.
    pub device_capacity: F,
    /// Processing capacity of `z_ss`.
    pub server_capacity: F,
    /// Extension knee of the device processing delay.
    pub device_margin: F,
    /// Extension knee of the server processing delay.
    pub server_margin: F,
    /// Extension knee of the wireless queue delay `1/(R(p) - w)`.
    pub queue_margin: F,
    /// Weight of the quadratic power cost.
    pub power_weight: F,
}

impl<F: Scalar> CostParams<F> {
    /// Capacities at 1.1x the processed-task bounds, knees at 10% of capacity
    /// for processing and 0.5 for queues, unit bandwidth, power weight 1/2.
    pub fn defaults_for(bounds: &BoxBounds) -> Self {
        let dc = 1.1 * bounds.w_local;
        let sc = 1.1 * bounds.z_local;
        CostParams {
            bandwidth: F::one(),
            device_capacity: F::of(dc),
            server_capacity: F::of(sc),
            device_margin: F::of(0.1 * dc),
            server_margin: F::of(0.1 * sc),
            queue_margin: F::of(0.5),
            power_weight: F::of(0.5),
        }
    }

    pub fn validate(&self, bounds: &BoxBounds) -> Result<()> {
        let pos = |v: F, what: &str| {
            if v > F::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what} must be positive")))
            }
        };
        pos(self.bandwidth, "bandwidth")?;
        pos(self.device_margin, "device margin")?;
        pos(self.server_margin, "server margin")?;
        pos(self.queue_margin, "queue margin")?;
        pos(self.power_weight, "power weight")?;
        if self.device_capacity <= F::of(bounds.w_local) {
            return Err(Error::InvalidConfig(
                "device capacity must exceed the local processing bound".into(),
            ));
        }
        if self.server_capacity <= F::of(bounds.z_local) {
            return Err(Error::InvalidConfig(
                "server capacity must exceed the local processing bound".into(),
            ));
        }
        if self.device_margin >= self.device_capacity || self.server_margin >= self.server_capacity
        {
            return Err(Error::InvalidConfig(
                "margins must be below capacities".into(),
            ));
        }
        Ok(())
    }

    pub fn cast<G: Scalar>(&self) -> CostParams<G> {
        let c = |v: F| G::of(v.to_f64_lossy());
        CostParams {
            bandwidth: c(self.bandwidth),
            device_capacity: c(self.device_capacity),
            server_capacity: c(self.server_capacity),
            device_margin: c(self.device_margin),
            server_margin: c(self.server_margin),
            queue_margin: c(self.queue_margin),
            power_weight: c(self.power_weight),
        }
    }
}

/// `1/u` for `u >= margin`, its tangent line at `margin` below. Returns the
/// value and the derivative in `u`. Convex, decreasing and C1 on all of R.
#[inline]
pub fn safe_inv<F: Scalar>(u: F, margin: F) -> (F, F) {
    if u >= margin {
        let inv = u.recip();
        (inv, -inv * inv)
    } else {
        let inv = margin.recip();
        (inv - (u - margin) * inv * inv, -inv * inv)
    }
}

/// Shannon rate `b_w log2(1 + alpha p)` and its derivative in `p`.
#[inline]
pub fn shannon_rate<F: Scalar>(bandwidth: F, gain: F, power: F) -> (F, F) {
    let arg = F::one() + gain * power;
    let rate = bandwidth * arg.ln() / F::LN_2();
    let slope = bandwidth * gain / (F::LN_2() * arg);
    (rate, slope)
}

/// `[g]^+` componentwise.
pub fn clip<F: Scalar>(g: &[F]) -> Vec<F> {
    g.iter().map(|&v| v.max(F::zero())).collect()
}

/// Factor relating the gradient of `[g]^+` to that of `g`: 0 when `g <= 0`.
#[inline]
pub fn clipped_gradient_factor<F: Scalar>(g: F) -> F {
    if g > F::zero() {
        F::one()
    } else {
        F::zero()
    }
}

/// Topology, box and cost constants: everything that stays fixed over a run.
#[derive(Debug, Clone)]
pub struct Problem<F> {
    pub topology: Topology,
    pub space: ActionSpace<F>,
    pub params: CostParams<F>,
}

impl<F: Scalar> Problem<F> {
    pub fn new(topology: Topology, space: ActionSpace<F>, params: CostParams<F>) -> Result<Self> {
        if space.dim() != topology.dim() {
            return Err(Error::InvalidConfig(
                "action space does not match topology".into(),
            ));
        }
        Ok(Problem {
            topology,
            space,
            params,
        })
    }

    /// The default experiment setup on `topology`.
    pub fn with_defaults(topology: Topology) -> Result<Self> {
        let bounds = BoxBounds::default();
        let space = ActionSpace::from_bounds(&topology, &bounds)?;
        Self::new(topology, space, CostParams::defaults_for(&bounds))
    }

    pub fn cast<G: Scalar>(&self) -> Problem<G> {
        Problem {
            topology: self.topology.clone(),
            space: self.space.cast(),
            params: self.params.cast(),
        }
    }

    pub fn dim(&self) -> usize {
        self.topology.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.topology.num_constraints()
    }

    pub fn node_slice<'a>(&self, x: &'a [F], n: NodeId) -> &'a [F] {
        &x[self.topology.action_range(n)]
    }

    fn queue_term(&self, task: F, power: F, gain: F) -> F {
        let (rate, _) = shannon_rate(self.params.bandwidth, gain, power);
        safe_inv(rate - task, self.params.queue_margin).0 + self.params.power_weight * power * power
    }

    /// Cost `f_n` of one node.
    pub fn node_cost(&self, n: NodeId, xn: &[F], env: &EnvSample<F>) -> F {
        let t = &self.topology;
        let p = &self.params;
        match n.kind {
            NodeKind::Device => {
                let nb = t.num_bs();
                let mut c = safe_inv(p.device_capacity - xn[layout::FIRST], p.device_margin).0;
                for b in (0..nb).filter(|&b| t.has_device_link(n.index, b)) {
                    c += self.queue_term(
                        xn[layout::link(b)],
                        xn[layout::power(nb, b)],
                        env.gain_db(n.index, b),
                    );
                }
                c
            }
            NodeKind::BaseStation => {
                let ns = t.num_servers();
                let mut c = env.cloud_delay_b[n.index] * xn[layout::FIRST];
                for s in (0..ns).filter(|&s| t.has_bs_link(n.index, s)) {
                    c += self.queue_term(
                        xn[layout::link(s)],
                        xn[layout::power(ns, s)],
                        env.gain_bs(n.index, s),
                    );
                }
                c
            }
            NodeKind::Server => {
                let me = n.index;
                let mut c = env.cloud_delay_s[me] * xn[layout::FIRST]
                    + safe_inv(p.server_capacity - xn[layout::link(me)], p.server_margin).0;
                for s in (0..t.num_servers()).filter(|&s| s != me && t.has_server_link(me, s)) {
                    c += env.wired_delay(me, s) * xn[layout::link(s)];
                }
                c
            }
        }
    }

    fn queue_gradient(&self, task: F, power: F, gain: F) -> (F, F) {
        let (rate, slope) = shannon_rate(self.params.bandwidth, gain, power);
        let (_, d) = safe_inv(rate - task, self.params.queue_margin);
        (
            -d,
            d * slope + F::of(2.0) * self.params.power_weight * power,
        )
    }

    /// Gradient of `f_n` with respect to the node's own block, written to `out`.
    pub fn cost_gradient_into(&self, n: NodeId, xn: &[F], env: &EnvSample<F>, out: &mut [F]) {
        let t = &self.topology;
        let p = &self.params;
        out.iter_mut().for_each(|v| *v = F::zero());
        match n.kind {
            NodeKind::Device => {
                let nb = t.num_bs();
                out[layout::FIRST] =
                    -safe_inv(p.device_capacity - xn[layout::FIRST], p.device_margin).1;
                for b in (0..nb).filter(|&b| t.has_device_link(n.index, b)) {
                    let (gw, gp) = self.queue_gradient(
                        xn[layout::link(b)],
                        xn[layout::power(nb, b)],
                        env.gain_db(n.index, b),
                    );
                    out[layout::link(b)] = gw;
                    out[layout::power(nb, b)] = gp;
                }
            }
            NodeKind::BaseStation => {
                let ns = t.num_servers();
                out[layout::FIRST] = env.cloud_delay_b[n.index];
                for s in (0..ns).filter(|&s| t.has_bs_link(n.index, s)) {
                    let (gy, gq) = self.queue_gradient(
                        xn[layout::link(s)],
                        xn[layout::power(ns, s)],
                        env.gain_bs(n.index, s),
                    );
                    out[layout::link(s)] = gy;
                    out[layout::power(ns, s)] = gq;
                }
            }
            NodeKind::Server => {
                let me = n.index;
                out[layout::FIRST] = env.cloud_delay_s[me];
                out[layout::link(me)] =
                    -safe_inv(p.server_capacity - xn[layout::link(me)], p.server_margin).1;
                for s in (0..t.num_servers()).filter(|&s| s != me && t.has_server_link(me, s)) {
                    out[layout::link(s)] = env.wired_delay(me, s);
                }
            }
        }
    }

    pub fn cost_gradient(&self, n: NodeId, xn: &[F], env: &EnvSample<F>) -> Vec<F> {
        let mut out = vec![F::zero(); xn.len()];
        self.cost_gradient_into(n, xn, env, &mut out);
        out
    }

    /// `f = sum_n f_n`.
    pub fn total_cost(&self, x: &[F], env: &EnvSample<F>) -> F {
        self.topology
            .nodes()
            .map(|n| self.node_cost(n, self.node_slice(x, n), env))
            .sum()
    }

    /// Gradient of `f` over the flattened action.
    pub fn total_cost_gradient(&self, x: &[F], env: &EnvSample<F>) -> Vec<F> {
        let mut out = vec![F::zero(); x.len()];
        for n in self.topology.nodes() {
            let r = self.topology.action_range(n);
            self.cost_gradient_into(n, &x[r.clone()], env, &mut out[r]);
        }
        out
    }

    /// Inflow term of `g_n0`: the demand for devices, the sum of the incoming
    /// task variables of other nodes for base stations and servers.
    pub fn inflow(&self, n: NodeId, x: &[F], env: &EnvSample<F>) -> F {
        let t = &self.topology;
        match n.kind {
            NodeKind::Device => env.requests[n.index],
            NodeKind::BaseStation => t
                .required_by(n)
                .into_iter()
                .map(|d| x[t.action_offset(d) + layout::link(n.index)])
                .sum(),
            NodeKind::Server => t
                .required_by(n)
                .into_iter()
                .map(|v| x[t.action_offset(v) + layout::link(n.index)])
                .sum(),
        }
    }

    /// The node's own constraint values, flow constraint first. `inflow` is
    /// the first term of the flow constraint (see [`Problem::inflow`]).
    pub fn local_constraints_into(
        &self,
        n: NodeId,
        xn: &[F],
        inflow: F,
        env: &EnvSample<F>,
        out: &mut [F],
    ) {
        let t = &self.topology;
        let bw = self.params.bandwidth;
        match n.kind {
            NodeKind::Device => {
                let nb = t.num_bs();
                out[0] =
                    inflow - xn[layout::FIRST] - (0..nb).map(|b| xn[layout::link(b)]).sum::<F>();
                for b in 0..nb {
                    out[1 + b] = if t.has_device_link(n.index, b) {
                        let (rate, _) =
                            shannon_rate(bw, env.gain_db(n.index, b), xn[layout::power(nb, b)]);
                        xn[layout::link(b)] - rate
                    } else {
                        F::zero()
                    };
                }
            }
            NodeKind::BaseStation => {
                let ns = t.num_servers();
                out[0] =
                    inflow - xn[layout::FIRST] - (0..ns).map(|s| xn[layout::link(s)]).sum::<F>();
                for s in 0..ns {
                    out[1 + s] = if t.has_bs_link(n.index, s) {
                        let (rate, _) =
                            shannon_rate(bw, env.gain_bs(n.index, s), xn[layout::power(ns, s)]);
                        xn[layout::link(s)] - rate
                    } else {
                        F::zero()
                    };
                }
            }
            NodeKind::Server => {
                out[0] = inflow - xn.iter().copied().sum::<F>();
            }
        }
    }

    pub fn local_constraints(&self, n: NodeId, xn: &[F], inflow: F, env: &EnvSample<F>) -> Vec<F> {
        let mut out = vec![F::zero(); self.topology.local_constraint_count(n.kind)];
        self.local_constraints_into(n, xn, inflow, env, &mut out);
        out
    }

    /// Gradients of the node's own constraints with respect to its own block,
    /// one dense row per local constraint.
    pub fn local_constraint_gradients(
        &self,
        n: NodeId,
        xn: &[F],
        env: &EnvSample<F>,
    ) -> Vec<Vec<F>> {
        let t = &self.topology;
        let len = xn.len();
        let bw = self.params.bandwidth;
        let fanout = match n.kind {
            NodeKind::Device => t.num_bs(),
            NodeKind::BaseStation => t.num_servers(),
            NodeKind::Server => 0,
        };
        let mut rows = Vec::with_capacity(1 + fanout);
        let mut flow = vec![F::zero(); len];
        let outflow = match n.kind {
            NodeKind::Server => len,
            _ => 1 + fanout,
        };
        flow[..outflow].iter_mut().for_each(|v| *v = -F::one());
        rows.push(flow);
        for k in 0..fanout {
            let mut row = vec![F::zero(); len];
            let (linked, gain) = match n.kind {
                NodeKind::Device => (t.has_device_link(n.index, k), env.gain_db(n.index, k)),
                _ => (t.has_bs_link(n.index, k), env.gain_bs(n.index, k)),
            };
            if linked {
                let (_, slope) = shannon_rate(bw, gain, xn[layout::power(fanout, k)]);
                row[layout::link(k)] = F::one();
                row[layout::power(fanout, k)] = -slope;
            }
            rows.push(row);
        }
        rows
    }

    /// Variables of `n` that appear (with coefficient +1) in another node's
    /// flow constraint: `(position in n's block, receiving node)`.
    pub fn coupled_outputs(&self, n: NodeId) -> Vec<(usize, NodeId)> {
        self.topology
            .receivers_of(n)
            .into_iter()
            .map(|v| (layout::link(v.index), v))
            .collect()
    }

    /// All `M` constraint values.
    pub fn constraints(&self, x: &[F], env: &EnvSample<F>) -> Vec<F> {
        let mut g = vec![F::zero(); self.num_constraints()];
        for n in self.topology.nodes() {
            let inflow = self.inflow(n, x, env);
            let r = self.topology.constraint_range(n);
            self.local_constraints_into(n, self.node_slice(x, n), inflow, env, &mut g[r]);
        }
        g
    }

    /// Sparse Jacobian of the constraints over the flattened action: one row
    /// of `(global variable index, partial)` per constraint.
    pub fn constraint_jacobian(&self, x: &[F], env: &EnvSample<F>) -> Vec<Vec<(usize, F)>> {
        let t = &self.topology;
        let mut rows = Vec::with_capacity(self.num_constraints());
        for n in t.nodes() {
            let off = t.action_offset(n);
            let local = self.local_constraint_gradients(n, self.node_slice(x, n), env);
            for (i, row) in local.into_iter().enumerate() {
                let mut sparse: Vec<(usize, F)> = row
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != F::zero())
                    .map(|(j, v)| (off + j, v))
                    .collect();
                if i == 0 {
                    for v in t.required_by(n) {
                        sparse.push((t.action_offset(v) + layout::link(n.index), F::one()));
                    }
                }
                rows.push(sparse);
            }
        }
        rows
    }

    /// `grad f + sum_m weight_m 1{g_m > 0} grad g_m` over the flattened action.
    pub fn lagrangian_gradient(&self, x: &[F], weights: &[F], env: &EnvSample<F>) -> Vec<F> {
        let g = self.constraints(x, env);
        let jac = self.constraint_jacobian(x, env);
        let mut grad = self.total_cost_gradient(x, env);
        for ((row, &gm), &w) in jac.iter().zip(&g).zip(weights) {
            let k = w * clipped_gradient_factor(gm);
            if k != F::zero() {
                for &(j, v) in row {
                    grad[j] += k * v;
                }
            }
        }
        grad
    }
}
