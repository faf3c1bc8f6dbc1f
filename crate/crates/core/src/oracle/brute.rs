//! Exhaustive optimizer for tiny instances: enumerate switch operation
//! patterns, remote switch states, supply orientations and crew routes,
//! price each candidate through the replay engine, and keep the cheapest
//! one whose final configuration admits the conservative power-flow
//! envelopes. Built without the model builder on purpose.

use highs::{HighsModelStatus, RowProblem, Sense as HSense};

use crate::net::{Network, SwitchIdx};
use crate::oracle::OracleError;
use crate::scenario::{OptimizationInput, PointKind, RootSource};
use crate::schedule::{replay, Decisions, Schedule, Supply};
use crate::units::{to_pu, MIN_PER_HOUR};

#[derive(Debug, Clone)]
pub struct BruteResult {
    pub cost: f64,
    pub decisions: Decisions,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Copy)]
struct MsPattern {
    v1: bool,
    msp: bool,
    v2: bool,
}

/// Enumerate everything within the budget guard (at most 8 routing
/// points, 4 zones, 2 crews) and return the cheapest feasible plan.
pub fn brute_force_small(
    net: &Network,
    input: &OptimizationInput,
    check_pf: bool,
) -> Result<BruteResult, OracleError> {
    if input.points.len() > 8 || input.zones.len() > 4 || input.crew_origins.len() > 2 {
        return Err(OracleError::Budget(format!(
            "instance too large: {} points, {} zones, {} crews",
            input.points.len(),
            input.zones.len(),
            input.crew_origins.len()
        )));
    }
    if input.zones.iter().any(|z| z.energized_at.is_some()) {
        return Err(OracleError::Internal(
            "exhaustive search expects a fresh snapshot".into(),
        ));
    }

    // Switch operation patterns per MS entry.
    let mut ms_options: Vec<Vec<MsPattern>> = Vec::new();
    for e in &input.ms_entries {
        let mut opts = vec![MsPattern {
            v1: false,
            msp: false,
            v2: false,
        }];
        if e.first_point.is_some() {
            opts.push(MsPattern {
                v1: true,
                msp: false,
                v2: false,
            });
            if e.patrol_open_task.is_some() {
                opts.push(MsPattern {
                    v1: false,
                    msp: true,
                    v2: false,
                });
            }
            if e.second_point.is_some() {
                opts.push(MsPattern {
                    v1: true,
                    msp: false,
                    v2: true,
                });
                if e.patrol_open_task.is_some() {
                    opts.push(MsPattern {
                        v1: false,
                        msp: true,
                        v2: true,
                    });
                }
            }
        }
        ms_options.push(opts);
    }

    let adjacency = crate::net::zone_adjacency(net)
        .map_err(|e| OracleError::Internal(e.to_string()))?;
    let pairs: Vec<((usize, usize), Vec<SwitchIdx>)> = adjacency
        .iter()
        .map(|((a, b), bs)| {
            let mut sw: Vec<SwitchIdx> = bs.ms.clone();
            sw.extend(bs.rcs.iter().copied());
            ((a.idx(), b.idx()), sw)
        })
        .collect();

    let nz = input.zones.len();
    let rate = net.travel_cost_rate;
    let weights: Vec<f64> = input
        .zones
        .iter()
        .map(|z| z.load_p * z.cost_rate / MIN_PER_HOUR)
        .collect();

    let mut best: Option<BruteResult> = None;
    let mut candidates: Vec<(f64, Decisions, Schedule)> = Vec::new();

    let n_rcs = input.rcs_entries.len();
    let mut ms_choice = vec![0usize; input.ms_entries.len()];
    loop {
        let patterns: Vec<MsPattern> = ms_choice
            .iter()
            .enumerate()
            .map(|(e, k)| ms_options[e][*k])
            .collect();

        for rcs_bits in 0..(1usize << n_rcs) {
            let rcs_closed: Vec<bool> = (0..n_rcs).map(|r| rcs_bits >> r & 1 == 1).collect();

            // Final closed state per switch.
            let mut closed = vec![false; net.switches.len()];
            for (e, entry) in input.ms_entries.iter().enumerate() {
                let p = patterns[e];
                let first = p.v1 || p.msp;
                closed[entry.ms.idx()] = if entry.closed_now {
                    !first || p.v2
                } else {
                    first
                };
            }
            for (e, entry) in input.rcs_entries.iter().enumerate() {
                closed[entry.rcs.idx()] = rcs_closed[e];
            }

            // Exactly one closed switch per linked pair; orient links.
            let mut linked_pairs = Vec::new();
            let mut ok = true;
            for ((a, b), switches) in &pairs {
                let n_closed = switches.iter().filter(|s| closed[s.idx()]).count();
                match n_closed {
                    0 => {}
                    1 => linked_pairs.push((*a, *b)),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }

            for orient_bits in 0..(1usize << linked_pairs.len()) {
                // Supply per zone from the oriented links.
                let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); nz];
                for (k, (a, b)) in linked_pairs.iter().enumerate() {
                    let (parent, child) = if orient_bits >> k & 1 == 1 {
                        (*b, *a)
                    } else {
                        (*a, *b)
                    };
                    incoming[child].push(parent);
                }
                if incoming.iter().any(|v| v.len() > 1) {
                    continue;
                }
                // Root choices for unsupplied zones.
                let mut supply_base: Vec<Option<Supply>> = vec![None; nz];
                let mut dg_zone_choices: Vec<Vec<crate::net::BusIdx>> = Vec::new();
                let mut dg_zones: Vec<usize> = Vec::new();
                let mut feasible = true;
                for z in 0..nz {
                    let has_sub = net.zones[z]
                        .buses
                        .iter()
                        .any(|b| net.buses[b.idx()].is_substation);
                    match (incoming[z].first(), has_sub) {
                        (Some(_), true) => {
                            // Substation zones are references by definition.
                            feasible = false;
                            break;
                        }
                        (Some(p), false) => supply_base[z] = Some(Supply::Parent(*p)),
                        (None, true) => {
                            supply_base[z] = Some(Supply::Root(RootSource::Substation))
                        }
                        (None, false) => {
                            let mut dg_buses: Vec<crate::net::BusIdx> = net.zones[z]
                                .buses
                                .iter()
                                .filter(|b| !net.dgs_at(**b).is_empty())
                                .copied()
                                .collect();
                            dg_buses.dedup();
                            if dg_buses.is_empty() {
                                feasible = false;
                                break;
                            }
                            dg_zones.push(z);
                            dg_zone_choices.push(dg_buses);
                        }
                    }
                }
                if !feasible {
                    continue;
                }

                let mut dg_pick = vec![0usize; dg_zones.len()];
                loop {
                    let mut supply: Vec<Supply> = Vec::with_capacity(nz);
                    for z in 0..nz {
                        match supply_base[z] {
                            Some(s) => supply.push(s),
                            None => {
                                let k = dg_zones.iter().position(|zz| *zz == z).unwrap();
                                supply.push(Supply::Root(RootSource::MasterDg(
                                    dg_zone_choices[k][dg_pick[k]],
                                )));
                            }
                        }
                    }

                    enumerate_routes(net, input, &patterns, &rcs_closed, &supply, |dec| {
                        match replay(net, input, dec) {
                            Ok(sched) => {
                                if sched.outage.iter().any(|t| *t > input.horizon + 1e-9) {
                                    return;
                                }
                                let mut cost = 0.0;
                                for z in 0..nz {
                                    cost += weights[z] * sched.outage[z];
                                }
                                for &(a, b) in &dec.arcs {
                                    cost += input.travel[a][b] * rate / MIN_PER_HOUR;
                                }
                                candidates.push((cost, dec.clone(), sched));
                            }
                            Err(_) => {}
                        }
                    });

                    // advance dg picks
                    let mut k = 0;
                    loop {
                        if k == dg_pick.len() {
                            break;
                        }
                        dg_pick[k] += 1;
                        if dg_pick[k] < dg_zone_choices[k].len() {
                            break;
                        }
                        dg_pick[k] = 0;
                        k += 1;
                    }
                    if k == dg_pick.len() {
                        break;
                    }
                }
            }
        }

        // advance ms choices
        let mut e = 0;
        loop {
            if e == ms_choice.len() {
                break;
            }
            ms_choice[e] += 1;
            if ms_choice[e] < ms_options[e].len() {
                break;
            }
            ms_choice[e] = 0;
            e += 1;
        }
        if e == ms_choice.len() {
            break;
        }
    }

    // Cheapest candidate whose final configuration admits the
    // conservative envelopes.
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (cost, decisions, schedule) in candidates {
        if let Some(b) = &best {
            if cost >= b.cost - 1e-9 {
                break;
            }
        }
        if !check_pf || conservative_feasible(net, input, &decisions, &schedule) {
            best = Some(BruteResult {
                cost,
                decisions,
                schedule,
            });
            break;
        }
    }
    best.ok_or(OracleError::NoFeasiblePlan)
}

/// All ways to route the serviced points: permutations cut into one
/// ordered block per crew.
fn enumerate_routes(
    _net: &Network,
    input: &OptimizationInput,
    patterns: &[MsPattern],
    rcs_closed: &[bool],
    supply: &[Supply],
    mut yield_fn: impl FnMut(&Decisions),
) {
    let np = input.points.len();
    let mut serviced = Vec::new();
    let mut visited = vec![false; np];
    for &o in &input.crew_origins {
        visited[o] = true;
    }
    for &f in &input.fault_tasks {
        visited[f] = true;
        serviced.push(f);
    }
    for (e, entry) in input.ms_entries.iter().enumerate() {
        if patterns[e].v1 {
            let p = entry.first_point.unwrap();
            visited[p] = true;
            serviced.push(p);
        }
        if patterns[e].v2 {
            let p = entry.second_point.unwrap();
            visited[p] = true;
            serviced.push(p);
        }
    }
    let patrol_open: Vec<bool> = patterns.iter().map(|p| p.msp).collect();
    let n_crews = input.crew_origins.len();

    let mut perm = serviced.clone();
    permute(&mut perm, 0, &mut |order: &[usize]| {
        // Split positions: n_crews-1 cut points over |order|+1 slots.
        let cuts = cut_positions(order.len(), n_crews);
        for cut in cuts {
            let mut arcs = Vec::new();
            let mut start = 0;
            for (c, &end) in cut.iter().enumerate() {
                let origin = input.crew_origins[c];
                let mut prev = origin;
                for &p in &order[start..end] {
                    arcs.push((prev, p));
                    prev = p;
                }
                start = end;
            }
            let decisions = Decisions {
                arcs,
                visited: visited.clone(),
                patrol_open: patrol_open.to_vec(),
                rcs_closed: rcs_closed.to_vec(),
                supply: supply.to_vec(),
            };
            yield_fn(&decisions);
        }
    });
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// All non-decreasing cut vectors: for c crews, c entries ending at n.
fn cut_positions(n: usize, crews: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if crews == 1 {
        out.push(vec![n]);
        return out;
    }
    // crews == 2 under the budget guard
    for k in 0..=n {
        out.push(vec![k, n]);
    }
    out
}

/// Conservative envelope feasibility of the final configuration, built
/// directly as an LP over the passive and active variable sets.
fn conservative_feasible(
    net: &Network,
    input: &OptimizationInput,
    decisions: &Decisions,
    schedule: &Schedule,
) -> bool {
    let nb = net.buses.len();
    let nl = net.lines.len();
    let base = net.base_kva;

    let mut closed = vec![true; nl];
    for (li, line) in net.lines.iter().enumerate() {
        if let Some(s) = line.switch {
            let sw = &net.switches[s.idx()];
            closed[li] = match sw.kind {
                crate::net::SwitchKind::Ms => {
                    let e = input.ms_entries.iter().position(|x| x.ms == s).unwrap();
                    decisions.ms_final_closed(input, e)
                }
                crate::net::SwitchKind::Rcs => {
                    let e = input.rcs_entries.iter().position(|x| x.rcs == s).unwrap();
                    decisions.rcs_closed[e]
                }
            };
        }
    }

    // Earlier-than truth values from the replayed outage times, least
    // restrictive at ties except for supply links.
    let earlier = |z: usize, w: usize| {
        schedule.outage[z] + 1e-9 < schedule.outage[w]
            || decisions.supply[w] == Supply::Parent(z)
    };

    let root_fixed: Vec<bool> = {
        let mut fixed = vec![false; nb];
        for (bi, bus) in net.buses.iter().enumerate() {
            if bus.is_substation {
                fixed[bi] = true;
            }
        }
        for s in &decisions.supply {
            if let Supply::Root(RootSource::MasterDg(bus)) = s {
                fixed[bus.idx()] = true;
            }
        }
        fixed
    };

    let mut real_p = vec![(0.0, 0.0); nb];
    let mut real_q = vec![(0.0, 0.0); nb];
    let mut gbig = 1.0;
    for bus in net.buses.iter() {
        gbig += 2.0 * (to_pu(bus.demand_p, base).abs() + to_pu(bus.demand_q, base).abs());
    }
    for dg in &net.dgs {
        gbig += to_pu(dg.p_max, base);
        let bi = dg.bus.idx();
        real_p[bi].0 += to_pu(dg.p_min, base);
        real_p[bi].1 += to_pu(dg.p_max, base);
        real_q[bi].0 += to_pu(dg.q_min, base);
        real_q[bi].1 += to_pu(dg.q_max, base);
    }
    let has_source: Vec<bool> = (0..nb)
        .map(|bi| net.buses[bi].is_substation || real_p[bi] != (0.0, 0.0) || real_q[bi] != (0.0, 0.0))
        .collect();

    let mut pb = RowProblem::default();
    let ucol = |pb: &mut RowProblem, fixed: bool| {
        if fixed {
            pb.add_column(0.0, 1.0..=1.0)
        } else {
            pb.add_column(0.0, net.v_min_sq..=net.v_max_sq)
        }
    };
    // Passive set.
    let u_lo: Vec<_> = (0..nb).map(|bi| ucol(&mut pb, root_fixed[bi])).collect();
    let f_lo_p: Vec<_> = (0..nl)
        .map(|li| {
            let cap = if closed[li] { to_pu(net.lines[li].flow_limit, base) } else { 0.0 };
            pb.add_column(0.0, -cap..=cap)
        })
        .collect();
    let f_lo_q: Vec<_> = (0..nl)
        .map(|li| {
            let cap = if closed[li] { to_pu(net.lines[li].flow_limit, base) } else { 0.0 };
            pb.add_column(0.0, -cap..=cap)
        })
        .collect();
    let g_lo_p: Vec<_> = (0..nb)
        .map(|bi| {
            if has_source[bi] {
                let hi = if net.buses[bi].is_substation { gbig } else { real_p[bi].1 };
                Some(pb.add_column(0.0, 0.0..=hi))
            } else {
                None
            }
        })
        .collect::<Vec<_>>();
    let g_lo_q: Vec<_> = (0..nb)
        .map(|bi| {
            if has_source[bi] {
                let hi = if net.buses[bi].is_substation { gbig } else { real_q[bi].1 };
                Some(pb.add_column(0.0, -gbig..=hi))
            } else {
                None
            }
        })
        .collect::<Vec<_>>();
    // Active set: injection available at every bus.
    let u_hi: Vec<_> = (0..nb).map(|bi| ucol(&mut pb, root_fixed[bi])).collect();
    let f_hi_p: Vec<_> = (0..nl)
        .map(|li| {
            let cap = if closed[li] { to_pu(net.lines[li].flow_limit, base) } else { 0.0 };
            pb.add_column(0.0, -cap..=cap)
        })
        .collect();
    let f_hi_q: Vec<_> = (0..nl)
        .map(|li| {
            let cap = if closed[li] { to_pu(net.lines[li].flow_limit, base) } else { 0.0 };
            pb.add_column(0.0, -cap..=cap)
        })
        .collect();
    let g_hi_p: Vec<_> = (0..nb)
        .map(|bi| {
            let lo = if has_source[bi] && !net.buses[bi].is_substation { real_p[bi].0 } else { 0.0 };
            pb.add_column(0.0, lo..=gbig)
        })
        .collect::<Vec<_>>();
    let g_hi_q: Vec<_> = (0..nb)
        .map(|bi| {
            let lo = if has_source[bi] && !net.buses[bi].is_substation { real_q[bi].0.min(0.0) } else { 0.0 };
            pb.add_column(0.0, lo..=gbig)
        })
        .collect::<Vec<_>>();

    // Voltage drop on closed lines, both sets.
    for (li, line) in net.lines.iter().enumerate() {
        if !closed[li] {
            continue;
        }
        let (i, j) = (line.from.idx(), line.to.idx());
        pb.add_row(
            0.0..=0.0,
            [
                (u_lo[i], 1.0),
                (u_lo[j], -1.0),
                (f_lo_p[li], -2.0 * line.r),
                (f_lo_q[li], -2.0 * line.x),
            ],
        );
        pb.add_row(
            0.0..=0.0,
            [
                (u_hi[i], 1.0),
                (u_hi[j], -1.0),
                (f_hi_p[li], -2.0 * line.r),
                (f_hi_q[li], -2.0 * line.x),
            ],
        );
    }
    // Balance, full demand.
    let g_hi_p_opt: Vec<Option<highs::Col>> = g_hi_p.iter().map(|c| Some(*c)).collect();
    let g_hi_q_opt: Vec<Option<highs::Col>> = g_hi_q.iter().map(|c| Some(*c)).collect();
    for bi in 0..nb {
        let dp = to_pu(net.buses[bi].demand_p, base);
        let dq = to_pu(net.buses[bi].demand_q, base);
        let combos: [(&Vec<highs::Col>, &Vec<Option<highs::Col>>, f64); 4] = [
            (&f_lo_p, &g_lo_p, dp),
            (&f_lo_q, &g_lo_q, dq),
            (&f_hi_p, &g_hi_p_opt, dp),
            (&f_hi_q, &g_hi_q_opt, dq),
        ];
        for (flows, gen, d) in combos {
            let mut terms: Vec<(highs::Col, f64)> = Vec::new();
            for (li, line) in net.lines.iter().enumerate() {
                if line.from.idx() == bi {
                    terms.push((flows[li], 1.0));
                } else if line.to.idx() == bi {
                    terms.push((flows[li], -1.0));
                }
            }
            if let Some(g) = gen[bi] {
                terms.push((g, -1.0));
            }
            pb.add_row(-d..=-d, terms);
        }
    }
    // Passive below active where both sets generate.
    for bi in 0..nb {
        if let Some(g) = g_lo_p[bi] {
            pb.add_row(..=0.0, [(g, 1.0), (g_hi_p[bi], -1.0)]);
        }
        if let Some(g) = g_lo_q[bi] {
            pb.add_row(..=0.0, [(g, 1.0), (g_hi_q[bi], -1.0)]);
        }
    }
    // Boundary orientation on closed boundary lines.
    let adjacency = match crate::net::zone_adjacency(net) {
        Ok(a) => a,
        Err(_) => return false,
    };
    for ((za, zb), bs) in &adjacency {
        for s in bs.ms.iter().chain(bs.rcs.iter()) {
            let li = net.switches[s.idx()].line.idx();
            if !closed[li] {
                continue;
            }
            let line = &net.lines[li];
            for (z, w) in [(za.idx(), zb.idx()), (zb.idx(), za.idx())] {
                if !earlier(z, w) {
                    continue;
                }
                let sign = if net.zone_of_bus(line.from).idx() == z {
                    1.0
                } else {
                    -1.0
                };
                pb.add_row(0.0.., [(f_lo_p[li], sign)]);
                pb.add_row(0.0.., [(f_lo_q[li], sign)]);
                pb.add_row(..=0.0, [(f_hi_p[li], sign)]);
                pb.add_row(..=0.0, [(f_hi_q[li], sign)]);
            }
        }
    }

    let mut model = pb.optimise(HSense::Minimise);
    model.set_option("output_flag", false);
    let solved = model.solve();
    solved.status() == HighsModelStatus::Optimal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{snapshot_for_optimization, ScenarioState};
    use crate::synth;
    use crate::units::travel_cost;

    #[test]
    fn one_crew_one_fault_closed_form() {
        let net = synth::single_zone_net();
        let truth = synth::seeded_scenario(&net, 9, 1);
        let mut state = ScenarioState::post_event(&net, &truth);
        state
            .reveal_zone(&net, crate::net::PatrolZoneIdx(0), &truth)
            .unwrap();
        let input = snapshot_for_optimization(&state, &net, 1440.0);
        let result = brute_force_small(&net, &input, true).unwrap();

        let f = input.fault_tasks[0];
        let origin = input.crew_origins[0];
        let op = match &input.points[f].kind {
            PointKind::FaultTask { op_time, .. } => *op_time,
            _ => unreachable!(),
        };
        let t = input.travel[origin][f] + op;
        let expected = t / 60.0 * net.zones[0].load_p * net.zones[0].outage_cost_rate
            + travel_cost(input.travel[origin][f], net.travel_cost_rate);
        assert!(
            (result.cost - expected).abs() < 1e-9,
            "{} vs {expected}",
            result.cost
        );
    }

    #[test]
    fn symmetric_crews_find_equal_split() {
        // Two crews at one depot, two identical faults in one zone: the
        // optimum must dispatch both crews, one fault each.
        let mut b = synth::NetBuilder::new(5000.0);
        b.point("d1", 0.0, 0.0)
            .point("p.q1", 0.0, 5.0)
            .point("fp.z1.0", 8.0, 0.0)
            .point("fp.z1.1", -8.0, 0.0);
        b.zone("z1", 30.0);
        b.bus("b1", "z1", 0.0, 0.0, true)
            .bus("b2", "z1", 200.0, 60.0, false);
        b.line("l1", "b1", "b2", 0.01, 0.02, 5000.0);
        b.patrol("q1", &["z1"], "p.q1", 10.0, vec![], &[]);
        b.crew("c1", "d1").crew("c2", "d1");
        let net = b.build();

        let truth = crate::scenario::GroundTruth {
            faults: vec![
                crate::scenario::TrueFault {
                    id: "fa".into(),
                    location: net.travel.point("fp.z1.0").unwrap(),
                    zone: crate::net::ZoneIdx(0),
                    repair_time: 60.0,
                },
                crate::scenario::TrueFault {
                    id: "fb".into(),
                    location: net.travel.point("fp.z1.1").unwrap(),
                    zone: crate::net::ZoneIdx(0),
                    repair_time: 60.0,
                },
            ],
            equipment: vec![vec![]],
        };
        let mut state = ScenarioState::post_event(&net, &truth);
        state
            .reveal_zone(&net, crate::net::PatrolZoneIdx(0), &truth)
            .unwrap();
        let input = snapshot_for_optimization(&state, &net, 1440.0);
        let result = brute_force_small(&net, &input, true).unwrap();
        // Split: each crew travels 8 and repairs 60 -> outage ends at 68.
        let expected = 68.0 / 60.0 * 200.0 * 30.0 + 2.0 * travel_cost(8.0, 0.6);
        assert!(
            (result.cost - expected).abs() < 1e-9,
            "{} vs {expected}",
            result.cost
        );
        let paths: Vec<usize> = result.schedule.paths.iter().map(|p| p.len()).collect();
        assert_eq!(paths, vec![2, 2]);
    }

    #[test]
    fn budget_guard() {
        let net = synth::desk13_net();
        let truth = synth::desk13_scenario(1);
        let state = ScenarioState::post_event(&net, &truth);
        let input = snapshot_for_optimization(&state, &net, 1440.0);
        assert!(matches!(
            brute_force_small(&net, &input, false),
            Err(OracleError::Budget(_))
        ));
    }
}
