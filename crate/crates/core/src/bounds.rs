//! Closed-form constants of the convergence guarantee and the resulting
//! regret and fit bounds.
//!
//! All maxima are analytic (monotonicity over the box and the environment
//! ranges), never sampled, so a bound computed here is a true upper bound.

use serde::{Deserialize, Serialize};

use crate::agents::HyperParams;
use crate::environment::EnvRanges;
use crate::error::{Error, Result};
use crate::model::{layout, safe_inv, Problem};
use crate::topology::{NodeId, NodeKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Diameter of the global box.
    pub r: f64,
    /// Bound on node cost values and node cost gradient norms.
    pub f: f64,
    /// Bound on clipped constraint values, constraint gradient norms and
    /// per-node clipped constraint norms.
    pub g: f64,
    pub k: usize,
    pub e: usize,
    pub m: usize,
    pub n: usize,
}

/// `U_sr`, `U_dr`, `U_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeBounds {
    pub static_regret: f64,
    pub dynamic_regret: f64,
    pub fit: f64,
}

/// `||grad (w - b_w log2(1 + alpha p))||` at `p = 0`, its largest value.
pub fn rate_gradient_bound(bandwidth: f64, gain_max: f64) -> f64 {
    (1.0 + (bandwidth * gain_max / std::f64::consts::LN_2).powi(2)).sqrt()
}

fn device_links(t: &Topology, d: usize) -> Vec<usize> {
    (0..t.num_bs())
        .filter(|&b| t.has_device_link(d, b))
        .collect()
}

fn bs_links(t: &Topology, b: usize) -> Vec<usize> {
    (0..t.num_servers())
        .filter(|&s| t.has_bs_link(b, s))
        .collect()
}

/// Norm of the full gradient of `g_n0` (own outflow entries and the inflow
/// entries owned by other nodes, all of magnitude one).
pub fn flow_gradient_bound(problem: &Problem<f64>, n: NodeId) -> f64 {
    let t = &problem.topology;
    let up = problem.space.node_upper(t, n);
    let outflow = match n.kind {
        NodeKind::Device => &up[..=t.num_bs()],
        NodeKind::BaseStation => &up[..=t.num_servers()],
        NodeKind::Server => up,
    };
    let own = outflow.iter().filter(|&&u| u > 0.0).count();
    ((own + t.required_by(n).len()) as f64).sqrt()
}

/// Largest clipped flow constraint value of node `n`.
fn flow_value_bound(problem: &Problem<f64>, n: NodeId, demand_max: f64) -> f64 {
    let t = &problem.topology;
    match n.kind {
        NodeKind::Device => demand_max,
        _ => t
            .required_by(n)
            .into_iter()
            .map(|v| problem.space.node_upper(t, v)[layout::link(n.index)])
            .sum(),
    }
}

/// Worst value and worst partials of one queue term over the box.
struct QueueBounds {
    value: f64,
    grad_sq: f64,
}

fn queue_bounds(
    problem: &Problem<f64>,
    task_max: f64,
    power_max: f64,
    gain_max: f64,
) -> QueueBounds {
    let p = &problem.params;
    let dq = p.queue_margin;
    // safe_inv is decreasing; its argument R(p) - w is at least -task_max
    let value = safe_inv(-task_max, dq).0 + p.power_weight * power_max * power_max;
    let task_partial = 1.0 / (dq * dq);
    let power_partial = (2.0 * p.power_weight * power_max)
        .max(p.bandwidth * gain_max / (std::f64::consts::LN_2 * dq * dq));
    QueueBounds {
        value,
        grad_sq: task_partial * task_partial + power_partial * power_partial,
    }
}

/// Computes `R, F, G, K, E, M, N` for `problem` under environments within
/// `ranges`.
pub fn estimate_constants(problem: &Problem<f64>, ranges: &EnvRanges) -> BoundConstants {
    let t = &problem.topology;
    let p = &problem.params;
    let gain_max = ranges.gain.hi;
    let delay_max = ranges.delay.hi;
    let demand_max = ranges.demand.hi;
    let rate_grad = rate_gradient_bound(p.bandwidth, gain_max);

    let mut f: f64 = 0.0;
    let mut g: f64 = 0.0;
    for n in t.nodes() {
        let up = problem.space.node_upper(t, n);
        let flow_h = flow_value_bound(problem, n, demand_max);
        let flow_grad = flow_gradient_bound(problem, n);
        let mut h_sq = flow_h * flow_h;
        let (value, grad_sq) = match n.kind {
            NodeKind::Device | NodeKind::BaseStation => {
                let (links, fanout) = match n.kind {
                    NodeKind::Device => (device_links(t, n.index), t.num_bs()),
                    _ => (bs_links(t, n.index), t.num_servers()),
                };
                let (mut value, mut grad_sq) = if n.kind == NodeKind::Device {
                    let dd = p.device_margin;
                    let slope = 1.0 / (dd * dd);
                    (
                        safe_inv(p.device_capacity - up[layout::FIRST], dd).0,
                        slope * slope,
                    )
                } else {
                    (delay_max * up[layout::FIRST], delay_max * delay_max)
                };
                for &k in &links {
                    let task = up[layout::link(k)];
                    let q = queue_bounds(problem, task, up[layout::power(fanout, k)], gain_max);
                    value += q.value;
                    grad_sq += q.grad_sq;
                    h_sq += task * task;
                    g = g.max(task);
                }
                if !links.is_empty() {
                    g = g.max(rate_grad);
                }
                (value, grad_sq)
            }
            NodeKind::Server => {
                let me = n.index;
                let ds = p.server_margin;
                let slope = 1.0 / (ds * ds);
                let mut value = delay_max * up[layout::FIRST]
                    + safe_inv(p.server_capacity - up[layout::link(me)], ds).0;
                let mut grad_sq = delay_max * delay_max + slope * slope;
                for s in (0..t.num_servers()).filter(|&s| s != me && t.has_server_link(me, s)) {
                    value += delay_max * up[layout::link(s)];
                    grad_sq += delay_max * delay_max;
                }
                (value, grad_sq)
            }
        };
        f = f.max(value).max(grad_sq.sqrt());
        g = g.max(flow_h).max(flow_grad).max(h_sq.sqrt());
    }

    BoundConstants {
        r: problem.space.diameter(),
        f,
        g,
        k: t.k_constant(),
        e: t.num_edges(),
        m: t.num_constraints(),
        n: t.num_nodes(),
    }
}

/// `3 K G^2`; the guarantee needs `sigma` strictly above it.
pub fn sigma_floor(c: &BoundConstants) -> f64 {
    3.0 * c.k as f64 * c.g * c.g
}

/// `1 - 3 K G^2 / sigma`.
pub fn beta(c: &BoundConstants, sigma: f64) -> f64 {
    1.0 - sigma_floor(c) / sigma
}

/// `sigma = factor * 3 K G^2`.
pub fn auto_sigma(c: &BoundConstants, factor: f64) -> f64 {
    factor * sigma_floor(c)
}

/// The static regret, dynamic regret and fit bounds after `horizon` slots
/// with path length `path`.
pub fn guarantee_bounds(
    c: &BoundConstants,
    hp: &HyperParams<f64>,
    horizon: usize,
    path: f64,
) -> Result<GuaranteeBounds> {
    let (eta, sigma) = (hp.step, hp.sigma);
    let b = beta(c, sigma);
    if b.is_nan() || b <= 0.0 {
        return Err(Error::InvalidSigma {
            sigma,
            floor: sigma_floor(c),
        });
    }
    let t = horizon as f64;
    let n = c.n as f64;
    let u_sr = c.r * c.r / (2.0 * eta)
        + 2.0 * c.r * c.e as f64 * c.g * c.g / (eta * sigma)
        + 3.5 * eta * n * c.f * c.f * t;
    let u_dr = u_sr + c.r / eta * path;
    let u_f = ((eta * sigma / b) * c.m as f64 * t * (u_sr + 2.0 * n * c.f * t)).sqrt();
    Ok(GuaranteeBounds {
        static_regret: u_sr,
        dynamic_regret: u_dr,
        fit: u_f,
    })
}
