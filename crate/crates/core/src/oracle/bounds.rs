//! Certification of the conservative envelopes: replay every
//! intermediate configuration of a plan under certificate and feasible
//! dispatches and verify voltages stay inside [passive, active] and
//! flows below the envelope magnitudes.

use serde::Serialize;

use crate::net::{BusIdx, Network};
use crate::oracle::{lindistflow_solve, StepConfig};
use crate::plan::{closed_lines, RestorationPlan};
use crate::scenario::RootSource;
use crate::schedule::Supply;
use crate::units::{to_pu, MONOTONE_TOL, SANDWICH_TOL};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum BoundViolation {
    VoltageBelowEnvelope { step: usize, bus: String, value: f64, bound: f64 },
    VoltageAboveEnvelope { step: usize, bus: String, value: f64, bound: f64 },
    FlowAboveEnvelope { step: usize, line: String, value: f64, bound: f64 },
    DispatchInfeasible { step: usize, island_root: String, detail: String },
    EnvelopeGap { bus: String, detail: String },
    Replay { step: usize, detail: String },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BoundReport {
    pub steps: usize,
    pub dispatches_checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Root buses of a plan's supply tree.
pub fn plan_roots(net: &Network, plan: &RestorationPlan) -> Vec<BusIdx> {
    let mut roots = Vec::new();
    for (z, s) in plan.supply.iter().enumerate() {
        match s {
            Supply::Root(RootSource::Substation) => {
                for b in &net.zones[z].buses {
                    if net.buses[b.idx()].is_substation {
                        roots.push(*b);
                    }
                }
            }
            Supply::Root(RootSource::MasterDg(bus)) => roots.push(*bus),
            Supply::Parent(_) => {}
        }
    }
    roots
}

/// Intermediate configurations in energization order: after each batch
/// of simultaneous energizations, the final closed-line set restricted
/// to the zones already back.
pub fn step_configs(net: &Network, plan: &RestorationPlan) -> Vec<StepConfig> {
    let closed = closed_lines(plan, net);
    let roots = plan_roots(net, plan);
    let mut order: Vec<(f64, usize)> = plan
        .energization
        .iter()
        .enumerate()
        .map(|(z, t)| (*t, z))
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut configs = Vec::new();
    let mut on = vec![false; net.zones.len()];
    let mut k = 0;
    while k < order.len() {
        let t = order[k].0;
        while k < order.len() && (order[k].0 - t).abs() <= 1e-9 {
            on[order[k].1] = true;
            k += 1;
        }
        let demand_active: Vec<bool> = net
            .buses
            .iter()
            .map(|b| on[b.zone.idx()])
            .collect();
        configs.push(StepConfig {
            step: configs.len() + 1,
            energized_zones: on.clone(),
            closed_lines: closed.clone(),
            demand_active,
            root_buses: roots.clone(),
        });
    }
    configs
}

/// Real aggregate injection bounds per bus in per-unit (DGs only; the
/// upstream grid behind a substation is handled as island slack).
fn real_gen_bounds(net: &Network) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut p = vec![(0.0, 0.0); net.buses.len()];
    let mut q = vec![(0.0, 0.0); net.buses.len()];
    for dg in &net.dgs {
        let bi = dg.bus.idx();
        p[bi].0 += to_pu(dg.p_min, net.base_kva);
        p[bi].1 += to_pu(dg.p_max, net.base_kva);
        q[bi].0 += to_pu(dg.q_min, net.base_kva);
        q[bi].1 += to_pu(dg.q_max, net.base_kva);
    }
    (p, q)
}

struct Islands {
    /// Component id per bus, usize::MAX off.
    comp: Vec<usize>,
    /// Root bus per component.
    roots: Vec<usize>,
}

fn islands(net: &Network, config: &StepConfig) -> Result<Islands, String> {
    let nb = net.buses.len();
    let energized: Vec<bool> = (0..nb)
        .map(|bi| config.energized_zones[net.buses[bi].zone.idx()])
        .collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (li, line) in net.lines.iter().enumerate() {
        if config.closed_lines[li] && energized[line.from.idx()] && energized[line.to.idx()] {
            adj[line.from.idx()].push(line.to.idx());
            adj[line.to.idx()].push(line.from.idx());
        }
    }
    let mut comp = vec![usize::MAX; nb];
    let mut roots = Vec::new();
    for r in &config.root_buses {
        if !energized[r.idx()] || comp[r.idx()] != usize::MAX {
            continue;
        }
        let ci = roots.len();
        roots.push(r.idx());
        comp[r.idx()] = ci;
        let mut queue = std::collections::VecDeque::from([r.idx()]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = ci;
                    queue.push_back(v);
                }
            }
        }
    }
    for bi in 0..nb {
        if energized[bi] && comp[bi] == usize::MAX {
            return Err(format!("bus {} energized without a root", net.buses[bi].id));
        }
    }
    Ok(Islands { comp, roots })
}

/// Proportional dispatch inside [max(lo_env, lo_real), min(hi_env,
/// hi_real)] per bus, meeting island balance; root buses act as slack.
#[allow(clippy::too_many_arguments)]
fn proportional_dispatch(
    net: &Network,
    config: &StepConfig,
    isl: &Islands,
    env_lo: &[f64],
    env_hi: &[f64],
    real: &[(f64, f64)],
    demand: &[f64],
    root_is_substation: &dyn Fn(usize) -> bool,
    root_real: &[(f64, f64)],
    violations: &mut Vec<BoundViolation>,
    step: usize,
) -> Vec<f64> {
    let nb = net.buses.len();
    let mut g = vec![0.0f64; nb];
    for ci in 0..isl.roots.len() {
        let members: Vec<usize> = (0..nb).filter(|b| isl.comp[*b] == ci).collect();
        let root = isl.roots[ci];
        let mut lo_sum = 0.0;
        let mut hi_sum = 0.0;
        let mut d_sum = 0.0;
        let mut bounds = Vec::new();
        for &b in &members {
            if config.demand_active[b] {
                d_sum += demand[b];
            }
            if b == root {
                continue;
            }
            let lo = env_lo[b].max(real[b].0);
            let hi = env_hi[b].min(real[b].1);
            if lo > hi + 1e-9 {
                violations.push(BoundViolation::EnvelopeGap {
                    bus: net.buses[b].id.clone(),
                    detail: format!("dispatch interval empty: [{lo}, {hi}]"),
                });
            }
            let hi = hi.max(lo);
            lo_sum += lo;
            hi_sum += hi;
            bounds.push((b, lo, hi));
        }
        // Aim the root slack at the middle of its own feasible range.
        let (r_lo, r_hi) = if root_is_substation(root) {
            (0.0, f64::INFINITY)
        } else {
            root_real[root]
        };
        let target_root = if r_hi.is_finite() {
            (r_lo + r_hi) / 2.0
        } else {
            0.0f64.max(r_lo)
        };
        let span = hi_sum - lo_sum;
        let alpha = if span > 1e-12 {
            ((d_sum - target_root - lo_sum) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        for (b, lo, hi) in &bounds {
            g[*b] = lo + alpha * (hi - lo);
        }
        let slack = d_sum - (lo_sum + alpha * span);
        if slack < r_lo - 1e-6 || slack > r_hi + 1e-6 {
            violations.push(BoundViolation::DispatchInfeasible {
                step,
                island_root: net.buses[root].id.clone(),
                detail: format!("root slack {slack} outside [{r_lo}, {r_hi}]"),
            });
        }
    }
    g
}

/// Replay every intermediate step under the passive-certificate,
/// active-certificate and proportional dispatches, checking the voltage
/// sandwich and the flow envelope.
pub fn check_conservative_bounds(net: &Network, plan: &RestorationPlan) -> BoundReport {
    let mut report = BoundReport::default();
    let Some(env) = plan.envelopes.as_ref() else {
        report.violations.push(BoundViolation::Replay {
            step: 0,
            detail: "plan carries no conservative envelopes".into(),
        });
        return report;
    };
    let configs = step_configs(net, plan);
    report.steps = configs.len();
    let (real_p, real_q) = real_gen_bounds(net);
    let dp: Vec<f64> = net.buses.iter().map(|b| to_pu(b.demand_p, net.base_kva)).collect();
    let dq: Vec<f64> = net.buses.iter().map(|b| to_pu(b.demand_q, net.base_kva)).collect();
    let is_sub = |b: usize| net.buses[b].is_substation;

    let flow_cap_p: Vec<f64> = (0..net.lines.len())
        .map(|li| env.flow_low_p[li].abs().max(env.flow_high_p[li].abs()))
        .collect();
    let flow_cap_q: Vec<f64> = (0..net.lines.len())
        .map(|li| env.flow_low_q[li].abs().max(env.flow_high_q[li].abs()))
        .collect();

    for config in &configs {
        let isl = match islands(net, config) {
            Ok(isl) => isl,
            Err(detail) => {
                report.violations.push(BoundViolation::Replay {
                    step: config.step,
                    detail,
                });
                continue;
            }
        };
        let gp_mid = proportional_dispatch(
            net,
            config,
            &isl,
            &env.gen_low_p,
            &env.gen_high_p,
            &real_p,
            &dp,
            &is_sub,
            &real_p,
            &mut report.violations,
            config.step,
        );
        let gq_mid = proportional_dispatch(
            net,
            config,
            &isl,
            &env.gen_low_q,
            &env.gen_high_q,
            &real_q,
            &dq,
            &is_sub,
            &real_q,
            &mut report.violations,
            config.step,
        );
        let dispatches: [(&[f64], &[f64]); 3] = [
            (&env.gen_low_p, &env.gen_low_q),
            (&env.gen_high_p, &env.gen_high_q),
            (&gp_mid, &gq_mid),
        ];
        for (gp, gq) in dispatches {
            report.dispatches_checked += 1;
            let pf = match lindistflow_solve(net, config, gp, gq) {
                Ok(pf) => pf,
                Err(e) => {
                    report.violations.push(BoundViolation::Replay {
                        step: config.step,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            for (bi, bus) in net.buses.iter().enumerate() {
                if !pf.energized[bi] {
                    continue;
                }
                if pf.u[bi] < env.u_low[bi] - SANDWICH_TOL {
                    report.violations.push(BoundViolation::VoltageBelowEnvelope {
                        step: config.step,
                        bus: bus.id.clone(),
                        value: pf.u[bi],
                        bound: env.u_low[bi],
                    });
                }
                if pf.u[bi] > env.u_high[bi] + SANDWICH_TOL {
                    report.violations.push(BoundViolation::VoltageAboveEnvelope {
                        step: config.step,
                        bus: bus.id.clone(),
                        value: pf.u[bi],
                        bound: env.u_high[bi],
                    });
                }
            }
            for (li, line) in net.lines.iter().enumerate() {
                if pf.flow_p[li].abs() > flow_cap_p[li] + SANDWICH_TOL {
                    report.violations.push(BoundViolation::FlowAboveEnvelope {
                        step: config.step,
                        line: line.id.clone(),
                        value: pf.flow_p[li].abs(),
                        bound: flow_cap_p[li],
                    });
                }
                if pf.flow_q[li].abs() > flow_cap_q[li] + SANDWICH_TOL {
                    report.violations.push(BoundViolation::FlowAboveEnvelope {
                        step: config.step,
                        line: line.id.clone(),
                        value: pf.flow_q[li].abs(),
                        bound: flow_cap_q[li],
                    });
                }
            }
        }
    }
    report
}

/// Step-over-step monotonicity of the certificate replays: passive
/// voltages never rise as zones are added, active voltages never fall.
pub fn monotone_envelope_check(net: &Network, plan: &RestorationPlan) -> Result<(), String> {
    let env = plan
        .envelopes
        .as_ref()
        .ok_or_else(|| "plan carries no conservative envelopes".to_string())?;
    let configs = step_configs(net, plan);
    let mut prev_low: Option<Vec<f64>> = None;
    let mut prev_high: Option<Vec<f64>> = None;
    for config in &configs {
        let low = lindistflow_solve(net, config, &env.gen_low_p, &env.gen_low_q)
            .map_err(|e| e.to_string())?;
        let high = lindistflow_solve(net, config, &env.gen_high_p, &env.gen_high_q)
            .map_err(|e| e.to_string())?;
        if let (Some(pl), Some(ph)) = (&prev_low, &prev_high) {
            for bi in 0..net.buses.len() {
                if !pl[bi].is_nan() && !low.u[bi].is_nan() && low.u[bi] > pl[bi] + MONOTONE_TOL {
                    return Err(format!(
                        "passive replay rose at bus {} step {}: {} -> {}",
                        net.buses[bi].id, config.step, pl[bi], low.u[bi]
                    ));
                }
                if !ph[bi].is_nan() && !high.u[bi].is_nan() && high.u[bi] < ph[bi] - MONOTONE_TOL {
                    return Err(format!(
                        "active replay fell at bus {} step {}: {} -> {}",
                        net.buses[bi].id, config.step, ph[bi], high.u[bi]
                    ));
                }
            }
        }
        prev_low = Some(low.u);
        prev_high = Some(high.u);
    }
    Ok(())
}

/// Nested energized sets across the step sequence.
pub fn steps_are_nested(configs: &[StepConfig]) -> bool {
    configs.windows(2).all(|w| {
        w[0]
            .energized_zones
            .iter()
            .zip(&w[1].energized_zones)
            .all(|(a, b)| !a || *b)
    })
}
