//! Radial linear power flow by leaf-to-root flow accumulation and
//! root-to-leaf propagation of squared voltages. Lossless: line flow is
//! exactly the downstream demand minus downstream generation.

use crate::net::{BusIdx, Network};
use crate::oracle::{OracleError, StepConfig};
use crate::units::to_pu;

#[derive(Debug, Clone)]
pub struct PfResult {
    /// Squared per-unit voltage; NaN on de-energized buses.
    pub u: Vec<f64>,
    /// Per-line active/reactive flow, oriented from->to, per-unit.
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    /// Effective injections including the root slack.
    pub gen_p: Vec<f64>,
    pub gen_q: Vec<f64>,
    /// Buses energized in this configuration.
    pub energized: Vec<bool>,
}

impl PfResult {
    /// Largest nodal balance residual over energized buses; exactness of
    /// the construction keeps it at rounding noise.
    pub fn balance_residual(&self, net: &Network, config: &StepConfig) -> f64 {
        let mut worst = 0.0f64;
        for (bi, bus) in net.buses.iter().enumerate() {
            if !self.energized[bi] {
                continue;
            }
            let mut residual_p = self.gen_p[bi]
                - if config.demand_active[bi] {
                    to_pu(bus.demand_p, net.base_kva)
                } else {
                    0.0
                };
            let mut residual_q = self.gen_q[bi]
                - if config.demand_active[bi] {
                    to_pu(bus.demand_q, net.base_kva)
                } else {
                    0.0
                };
            for (li, line) in net.lines.iter().enumerate() {
                if line.from.idx() == bi {
                    residual_p -= self.flow_p[li];
                    residual_q -= self.flow_q[li];
                } else if line.to.idx() == bi {
                    residual_p += self.flow_p[li];
                    residual_q += self.flow_q[li];
                }
            }
            worst = worst.max(residual_p.abs()).max(residual_q.abs());
        }
        worst
    }
}

/// Solve the linear radial power flow for one configuration under a
/// given non-root dispatch (`gen_p`/`gen_q`, per-unit per bus). Each
/// island's root bus absorbs the residual.
pub fn lindistflow_solve(
    net: &Network,
    config: &StepConfig,
    gen_p: &[f64],
    gen_q: &[f64],
) -> Result<PfResult, OracleError> {
    let nb = net.buses.len();
    let energized: Vec<bool> = (0..nb)
        .map(|bi| config.energized_zones[net.buses[bi].zone.idx()])
        .collect();

    // Active lines: closed with both endpoints energized.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb]; // (line, other bus)
    let mut active_lines = Vec::new();
    for (li, line) in net.lines.iter().enumerate() {
        if config.closed_lines[li] && energized[line.from.idx()] && energized[line.to.idx()] {
            adj[line.from.idx()].push((li, line.to.idx()));
            adj[line.to.idx()].push((li, line.from.idx()));
            active_lines.push(li);
        }
    }

    let mut is_root = vec![false; nb];
    for r in &config.root_buses {
        if energized[r.idx()] {
            is_root[r.idx()] = true;
        }
    }

    // Span each island by BFS from its root. Multiple roots in one
    // island, rootless islands, and cycles (caught by the forest edge
    // count) are all errors.
    let mut parent_of: Vec<Option<(usize, usize)>> = vec![None; nb]; // (parent bus, line)
    let mut comp = vec![usize::MAX; nb];
    let mut order = Vec::new();
    for (ci, root) in config
        .root_buses
        .iter()
        .filter(|r| energized[r.idx()])
        .enumerate()
    {
        let r = root.idx();
        if comp[r] != usize::MAX {
            return Err(OracleError::Pf(format!(
                "island holds more than one root, including {}",
                net.buses[r].id
            )));
        }
        comp[r] = ci;
        let mut queue = std::collections::VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(li, v) in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = ci;
                    parent_of[v] = Some((u, li));
                    queue.push_back(v);
                }
            }
        }
    }
    for bi in 0..nb {
        if energized[bi] && comp[bi] == usize::MAX {
            return Err(OracleError::Pf(format!(
                "island without a root at bus {}",
                net.buses[bi].id
            )));
        }
    }
    let n_energized = energized.iter().filter(|e| **e).count();
    let n_islands = config
        .root_buses
        .iter()
        .filter(|r| energized[r.idx()])
        .count();
    if active_lines.len() != n_energized.saturating_sub(n_islands) {
        return Err(OracleError::Pf(format!(
            "{} active lines for {} buses in {} islands: not a forest",
            active_lines.len(),
            n_energized,
            n_islands
        )));
    }

    // Net consumption per bus under the dispatch.
    let base = net.base_kva;
    let mut take_p = vec![0.0f64; nb];
    let mut take_q = vec![0.0f64; nb];
    for bi in 0..nb {
        if !energized[bi] {
            continue;
        }
        let dp = if config.demand_active[bi] {
            to_pu(net.buses[bi].demand_p, base)
        } else {
            0.0
        };
        let dq = if config.demand_active[bi] {
            to_pu(net.buses[bi].demand_q, base)
        } else {
            0.0
        };
        if is_root[bi] {
            take_p[bi] = dp;
            take_q[bi] = dq;
        } else {
            take_p[bi] = dp - gen_p[bi];
            take_q[bi] = dq - gen_q[bi];
        }
    }

    // Leaf-to-root accumulation of subtree net consumption.
    let mut sub_p = take_p.clone();
    let mut sub_q = take_q.clone();
    let mut flow_p = vec![0.0f64; net.lines.len()];
    let mut flow_q = vec![0.0f64; net.lines.len()];
    for &u in order.iter().rev() {
        if let Some((parent, li)) = parent_of[u] {
            // Flow toward u (the child) carries u's subtree.
            let oriented_out = net.lines[li].from.idx() == parent;
            let (p, q) = (sub_p[u], sub_q[u]);
            if oriented_out {
                flow_p[li] = p;
                flow_q[li] = q;
            } else {
                flow_p[li] = -p;
                flow_q[li] = -q;
            }
            sub_p[parent] += p;
            sub_q[parent] += q;
        }
    }

    // Root-to-leaf squared-voltage propagation from the 1.0 reference.
    let mut u_sq = vec![f64::NAN; nb];
    for &bus in &order {
        match parent_of[bus] {
            None => u_sq[bus] = 1.0,
            Some((parent, li)) => {
                let line = &net.lines[li];
                let toward_child = if line.from.idx() == parent {
                    (flow_p[li], flow_q[li])
                } else {
                    (-flow_p[li], -flow_q[li])
                };
                u_sq[bus] =
                    u_sq[parent] - 2.0 * (line.r * toward_child.0 + line.x * toward_child.1);
            }
        }
    }

    let mut gen_p_eff = vec![0.0f64; nb];
    let mut gen_q_eff = vec![0.0f64; nb];
    for bi in 0..nb {
        if !energized[bi] {
            continue;
        }
        if is_root[bi] {
            // Root supplies its island: own demand plus subtree.
            gen_p_eff[bi] = sub_p[bi];
            gen_q_eff[bi] = sub_q[bi];
        } else {
            gen_p_eff[bi] = gen_p[bi];
            gen_q_eff[bi] = gen_q[bi];
        }
    }

    Ok(PfResult {
        u: u_sq,
        flow_p,
        flow_q,
        gen_p: gen_p_eff,
        gen_q: gen_q_eff,
        energized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn full_config(net: &Network) -> StepConfig {
        StepConfig {
            step: net.zones.len(),
            energized_zones: vec![true; net.zones.len()],
            closed_lines: net
                .lines
                .iter()
                .map(|l| match l.switch {
                    None => true,
                    Some(s) => net.switches[s.idx()].initially_closed,
                })
                .collect(),
            demand_active: vec![true; net.buses.len()],
            root_buses: net.substation_buses(),
        }
    }

    #[test]
    fn two_bus_drop() {
        // load 0.1 pu behind r=0.01: squared-voltage drop 2*r*P = 0.002.
        let mut net = synth::single_zone_net();
        net.buses[1].demand_p = 0.1 * net.base_kva;
        net.buses[1].demand_q = 0.0;
        let config = full_config(&net);
        let zeros = vec![0.0; net.buses.len()];
        let pf = lindistflow_solve(&net, &config, &zeros, &zeros).unwrap();
        assert!((pf.u[0] - 1.0).abs() < 1e-12);
        assert!((pf.u[1] - (1.0 - 0.002)).abs() < 1e-12);
        assert!(pf.balance_residual(&net, &config) < 1e-12);
    }

    #[test]
    fn zero_load_flat_profile() {
        let mut net = synth::two_zone_net();
        for b in &mut net.buses {
            b.demand_p = 0.0;
            b.demand_q = 0.0;
        }
        let config = full_config(&net);
        let zeros = vec![0.0; net.buses.len()];
        let pf = lindistflow_solve(&net, &config, &zeros, &zeros).unwrap();
        for (bi, u) in pf.u.iter().enumerate() {
            assert!((u - 1.0).abs() < 1e-12, "bus {bi}");
        }
        for f in pf.flow_p {
            assert_eq!(f, 0.0);
        }
    }

    #[test]
    fn chain_with_midfeeder_injection_matches_dense_solve() {
        // Five-bus chain with an injection at bus 2: flows must equal the
        // partial sums of net consumption, checked against a dense
        // LU-style elimination of the same linear system.
        let mut b = synth::NetBuilder::new(1000.0);
        b.point("d1", 0.0, 0.0).point("p.q1", 1.0, 1.0);
        b.zone("z1", 20.0);
        for i in 1..=5 {
            b.bus(&format!("b{i}"), "z1", 50.0, 10.0, i == 1);
        }
        for i in 1..=4 {
            b.line(
                &format!("l{i}"),
                &format!("b{i}"),
                &format!("b{}", i + 1),
                0.01,
                0.015,
                2000.0,
            );
        }
        b.patrol("q1", &["z1"], "p.q1", 10.0, vec![], &[]);
        b.crew("c1", "d1");
        let net = b.build();

        let config = full_config(&net);
        let mut gen_p = vec![0.0; 5];
        let gen_q = vec![0.0; 5];
        gen_p[2] = 0.12; // 120 kW injection at b3

        let pf = lindistflow_solve(&net, &config, &gen_p, &gen_q).unwrap();
        // Dense oracle: solve for flows directly from the balance
        // equations of the chain (f[i] = flow on line i, downstream sum).
        let take: Vec<f64> = (0..5)
            .map(|i| 50.0 / 1000.0 - if i == 2 { 0.12 } else { 0.0 })
            .collect();
        for li in 0..4 {
            let expect: f64 = take[li + 1..].iter().sum();
            assert!(
                (pf.flow_p[li] - expect).abs() < 1e-12,
                "line {li}: {} vs {expect}",
                pf.flow_p[li]
            );
        }
        assert!(pf.balance_residual(&net, &config) < 1e-12);
    }

    #[test]
    fn cycle_and_rootless_islands_are_rejected() {
        let net = synth::two_zone_two_switch_net();
        let mut config = full_config(&net);
        // Close both the MS and the tie RCS: cycle.
        for (li, line) in net.lines.iter().enumerate() {
            if line.switch.is_some() {
                config.closed_lines[li] = true;
            }
        }
        let zeros = vec![0.0; net.buses.len()];
        assert!(lindistflow_solve(&net, &config, &zeros, &zeros).is_err());

        // Open both: downstream zone has no root.
        for (li, line) in net.lines.iter().enumerate() {
            if line.switch.is_some() {
                config.closed_lines[li] = false;
            }
        }
        assert!(lindistflow_solve(&net, &config, &zeros, &zeros).is_err());
    }
}
