//! Linearized power-flow rows over squared voltage magnitudes: the
//! voltage drop along a line is 2(r*P + x*Q), the model is lossless, and
//! open lines relax the drop while their flow is gated to zero.

use super::builder::{BuildError, Builder};
use super::{LineStatusTerm, PfSet, PfVars, RowTag, Sense, VarId};
use crate::units::to_pu;

pub(crate) struct PfData {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
    /// Aggregated injection bounds per bus and component; None when a bus
    /// cannot generate in the conventional model.
    pub src_p: Vec<Option<(f64, f64)>>,
    pub src_q: Vec<Option<(f64, f64)>>,
    pub fmax: Vec<f64>,
    pub drop_m: Vec<f64>,
    /// Loose injection cap standing in for the upstream grid.
    pub gbig: f64,
}

pub(crate) fn pf_data(b: &Builder) -> PfData {
    let net = b.net;
    let base = net.base_kva;
    let dp: Vec<f64> = net.buses.iter().map(|bus| to_pu(bus.demand_p, base)).collect();
    let dq: Vec<f64> = net.buses.iter().map(|bus| to_pu(bus.demand_q, base)).collect();
    let gbig = 2.0
        * (dp.iter().map(|v| v.abs()).sum::<f64>() + dq.iter().map(|v| v.abs()).sum::<f64>())
        + net.dgs.iter().map(|d| to_pu(d.p_max, base)).sum::<f64>()
        + 1.0;

    let mut src_p: Vec<Option<(f64, f64)>> = vec![None; net.buses.len()];
    let mut src_q: Vec<Option<(f64, f64)>> = vec![None; net.buses.len()];
    for (bi, bus) in net.buses.iter().enumerate() {
        if bus.is_substation {
            src_p[bi] = Some((0.0, gbig));
            src_q[bi] = Some((-gbig, gbig));
        }
    }
    for dg in &net.dgs {
        let bi = dg.bus.idx();
        let (plo, phi) = src_p[bi].unwrap_or((0.0, 0.0));
        src_p[bi] = Some((plo + to_pu(dg.p_min, base), phi + to_pu(dg.p_max, base)));
        let (qlo, qhi) = src_q[bi].unwrap_or((0.0, 0.0));
        src_q[bi] = Some((qlo + to_pu(dg.q_min, base), qhi + to_pu(dg.q_max, base)));
    }

    let fmax: Vec<f64> = net.lines.iter().map(|l| to_pu(l.flow_limit, base)).collect();
    let range = net.v_max_sq - net.v_min_sq;
    let drop_m: Vec<f64> = net
        .lines
        .iter()
        .enumerate()
        .map(|(li, l)| range + 2.0 * (l.r + l.x) * fmax[li] + 1e-3)
        .collect();

    PfData {
        dp,
        dq,
        src_p,
        src_q,
        fmax,
        drop_m,
        gbig,
    }
}

/// Per-bus / per-component generation domain for the conventional and
/// gated sets: must contain zero so a de-energized gate is feasible.
fn gated_domain((lo, hi): (f64, f64)) -> (f64, f64) {
    (lo.min(0.0), hi.max(0.0))
}

struct SetSpec<'s> {
    prefix: &'s str,
    tag_drop: RowTag,
    tag_gate: RowTag,
}

impl<'a> Builder<'a> {
    fn make_pf_set(
        &mut self,
        prefix: &str,
        data: &PfData,
        gen_p_dom: impl Fn(usize) -> Option<(f64, f64)>,
        gen_q_dom: impl Fn(usize) -> Option<(f64, f64)>,
    ) -> Result<PfSet, BuildError> {
        let net = self.net;
        let mut set = PfSet::default();
        for (bi, bus) in net.buses.iter().enumerate() {
            let name = format!("{prefix}.u.{}", bus.id);
            let var = if bus.is_substation {
                self.model.continuous(name, 1.0, 1.0)?
            } else {
                self.model.continuous(name, net.v_min_sq, net.v_max_sq)?
            };
            set.u.push(var);
            let _ = bi;
        }
        for (li, line) in net.lines.iter().enumerate() {
            let open = matches!(self.model.catalog.line_final[li], LineStatusTerm::Fixed(c) if c == 0.0);
            let cap = if open { 0.0 } else { data.fmax[li] };
            set.flow_p
                .push(self.model.continuous(format!("{prefix}.fp.{}", line.id), -cap, cap)?);
            set.flow_q
                .push(self.model.continuous(format!("{prefix}.fq.{}", line.id), -cap, cap)?);
        }
        for (bi, bus) in net.buses.iter().enumerate() {
            set.gen_p.push(match gen_p_dom(bi) {
                Some((lo, hi)) => {
                    Some(self.model.continuous(format!("{prefix}.gp.{}", bus.id), lo, hi)?)
                }
                None => None,
            });
            set.gen_q.push(match gen_q_dom(bi) {
                Some((lo, hi)) => {
                    Some(self.model.continuous(format!("{prefix}.gq.{}", bus.id), lo, hi)?)
                }
                None => None,
            });
        }
        Ok(set)
    }

    /// Voltage drop and flow gating for one set. `suffix` distinguishes
    /// row names across per-step copies.
    fn pf_drop_and_gates(&mut self, set: &PfSet, data: &PfData, spec: &SetSpec, suffix: &str) {
        let lines: Vec<(usize, crate::net::Line)> =
            self.net.lines.iter().cloned().enumerate().collect();
        for (li, line) in &lines {
            let status = self.model.catalog.line_final[*li];
            let (i, j) = (line.from.idx(), line.to.idx());
            let drop_terms = |sign: f64| {
                vec![
                    (set.u[i], sign),
                    (set.u[j], -sign),
                    (set.flow_p[*li], -sign * 2.0 * line.r),
                    (set.flow_q[*li], -sign * 2.0 * line.x),
                ]
            };
            match status {
                LineStatusTerm::Fixed(c) => {
                    if c == 1.0 {
                        self.model.push_row(super::Row {
                            name: format!("{}.drop.{}{suffix}", spec.prefix, line.id),
                            terms: drop_terms(1.0),
                            sense: Sense::Eq,
                            rhs: 0.0,
                            tag: spec.tag_drop,
                            relaxed_when: Vec::new(),
                        });
                    }
                    // Open fixed lines carry zero flow via their bounds.
                }
                LineStatusTerm::Var(beta) => {
                    let m = data.drop_m[*li];
                    for (sign, side) in [(1.0, "a"), (-1.0, "b")] {
                        let mut terms = drop_terms(sign);
                        terms.push((beta, m));
                        self.model.push_row(super::Row {
                            name: format!("{}.drop{side}.{}{suffix}", spec.prefix, line.id),
                            terms,
                            sense: Sense::Le,
                            rhs: m,
                            tag: spec.tag_drop,
                            relaxed_when: vec![(beta, 0.0)],
                        });
                    }
                    for (flow, comp) in [(set.flow_p[*li], "p"), (set.flow_q[*li], "q")] {
                        for (sign, side) in [(1.0, "a"), (-1.0, "b")] {
                            self.model.push_row(super::Row {
                                name: format!(
                                    "{}.gate{comp}{side}.{}{suffix}",
                                    spec.prefix, line.id
                                ),
                                terms: vec![(flow, sign), (beta, -data.fmax[*li])],
                                sense: Sense::Le,
                                rhs: 0.0,
                                tag: spec.tag_gate,
                                relaxed_when: vec![(beta, 1.0)],
                            });
                        }
                    }
                }
            }
        }
    }

    /// Master-DG buses anchor their island at the reference voltage when
    /// designated.
    fn pf_root_refs(&mut self, set: &PfSet, suffix: &str) {
        let range = self.net.v_max_sq - self.net.v_min_sq;
        let dg_buses: Vec<usize> = self.model.catalog.master_dg.keys().copied().collect();
        for bus in dg_buses {
            let alpha = self.model.catalog.master_dg[&bus];
            let u = set.u[bus];
            let id = self.net.buses[bus].id.clone();
            self.model.push_row(super::Row {
                name: format!("ref.hi.{id}{suffix}"),
                terms: vec![(u, 1.0), (alpha, range)],
                sense: Sense::Le,
                rhs: 1.0 + range,
                tag: RowTag::RootVoltageRef,
                relaxed_when: vec![(alpha, 0.0)],
            });
            self.model.push_row(super::Row {
                name: format!("ref.lo.{id}{suffix}"),
                terms: vec![(u, 1.0), (alpha, -range)],
                sense: Sense::Ge,
                rhs: 1.0 - range,
                tag: RowTag::RootVoltageRef,
                relaxed_when: vec![(alpha, 0.0)],
            });
        }
    }
}

/// Nodal export terms: +flow for lines leaving the bus, -flow into it.
fn incident_terms(
    net: &crate::net::Network,
    set_flow: &[VarId],
    bus: usize,
) -> Vec<(VarId, f64)> {
    let mut terms = Vec::new();
    for (li, line) in net.lines.iter().enumerate() {
        if line.from.idx() == bus {
            terms.push((set_flow[li], 1.0));
        } else if line.to.idx() == bus {
            terms.push((set_flow[li], -1.0));
        }
    }
    terms
}

/// One conventional power-flow set per energization step: demand and
/// generation switch on with the zone's step indicator.
pub(crate) fn add_multistep(b: &mut Builder) -> Result<(), BuildError> {
    let data = pf_data(b);
    let nz = b.input.zones.len();
    let spec = SetSpec {
        prefix: "s",
        tag_drop: RowTag::StepVoltDrop,
        tag_gate: RowTag::StepFlowGate,
    };

    let mut steps = Vec::with_capacity(nz);
    for t in 1..=nz {
        let set = b.make_pf_set(
            &format!("s{t}"),
            &data,
            |bi| data.src_p[bi].map(gated_domain),
            |bi| data.src_q[bi].map(gated_domain),
        )?;
        b.pf_drop_and_gates(&set, &data, &spec, &format!(".t{t}"));
        b.pf_root_refs(&set, &format!(".t{t}"));

        for bi in 0..b.net.buses.len() {
            let zone = b.net.zone_of_bus(crate::net::BusIdx(bi)).idx();
            let zt = b.model.catalog.step_energized[zone][t - 1];
            for (comp, flow, gen, demand) in [
                ("p", &set.flow_p, &set.gen_p, data.dp[bi]),
                ("q", &set.flow_q, &set.gen_q, data.dq[bi]),
            ] {
                let mut terms = incident_terms(b.net, flow, bi);
                if demand != 0.0 {
                    terms.push((zt, demand));
                }
                if let Some(g) = gen[bi] {
                    terms.push((g, -1.0));
                }
                b.model.push_row(super::Row {
                    name: format!("s.bal{comp}.{}.t{t}", b.net.buses[bi].id),
                    terms,
                    sense: Sense::Eq,
                    rhs: 0.0,
                    tag: RowTag::StepBalance,
                    relaxed_when: Vec::new(),
                });
            }
            for (comp, gen, bounds) in [
                ("p", set.gen_p[bi], data.src_p[bi]),
                ("q", set.gen_q[bi], data.src_q[bi]),
            ] {
                let (Some(g), Some((lo, hi))) = (gen, bounds) else {
                    continue;
                };
                let id = &b.net.buses[bi].id;
                b.model.push_row(super::Row {
                    name: format!("s.gcap{comp}.{id}.t{t}"),
                    terms: vec![(g, 1.0), (zt, -hi)],
                    sense: Sense::Le,
                    rhs: 0.0,
                    tag: RowTag::StepGenGate,
                    relaxed_when: Vec::new(),
                });
                b.model.push_row(super::Row {
                    name: format!("s.gfloor{comp}.{id}.t{t}"),
                    terms: vec![(g, 1.0), (zt, -lo)],
                    sense: Sense::Ge,
                    rhs: 0.0,
                    tag: RowTag::StepGenGate,
                    relaxed_when: Vec::new(),
                });
            }
        }
        steps.push(set);
    }
    b.model.catalog.pf = PfVars::MultiStep { steps };
    Ok(())
}

/// Conservative envelopes on the final configuration: the passive set
/// bounds voltages from below with downstream zones as pure loads, the
/// active set bounds them from above with injection available at every
/// bus.
pub(crate) fn add_conservative(b: &mut Builder) -> Result<(), BuildError> {
    let data = pf_data(b);

    // Passive: generation capped above, must-run floors relaxed.
    let passive = b.make_pf_set(
        "lo",
        &data,
        |bi| data.src_p[bi].map(|(_, hi)| (0.0, hi)),
        |bi| data.src_q[bi].map(|(_, hi)| (-data.gbig, hi)),
    )?;
    let spec = SetSpec {
        prefix: "lo",
        tag_drop: RowTag::PassiveVoltDrop,
        tag_gate: RowTag::PassiveFlowGate,
    };
    b.pf_drop_and_gates(&passive, &data, &spec, "");
    b.pf_root_refs(&passive, ".lo");

    // Active: injection everywhere, rated ceilings relaxed.
    let active = b.make_pf_set(
        "hi",
        &data,
        |bi| Some((data.src_p[bi].map_or(0.0, |(lo, _)| lo), data.gbig)),
        |bi| Some((data.src_q[bi].map_or(0.0, |(lo, _)| lo.min(0.0)), data.gbig)),
    )?;
    let spec = SetSpec {
        prefix: "hi",
        tag_drop: RowTag::ActiveVoltDrop,
        tag_gate: RowTag::ActiveFlowGate,
    };
    b.pf_drop_and_gates(&active, &data, &spec, "");
    b.pf_root_refs(&active, ".hi");

    for bi in 0..b.net.buses.len() {
        let id = b.net.buses[bi].id.clone();
        for (comp, pset, aset, demand) in [
            ("p", &passive.flow_p, &active.flow_p, data.dp[bi]),
            ("q", &passive.flow_q, &active.flow_q, data.dq[bi]),
        ] {
            let gen = if comp == "p" { &passive.gen_p } else { &passive.gen_q };
            let mut terms = incident_terms(b.net, pset, bi);
            if let Some(g) = gen[bi] {
                terms.push((g, -1.0));
            }
            b.model.push_row(super::Row {
                name: format!("lo.bal{comp}.{id}"),
                terms,
                sense: Sense::Eq,
                rhs: -demand,
                tag: RowTag::PassiveBalance,
                relaxed_when: Vec::new(),
            });
            let gen = if comp == "p" { &active.gen_p } else { &active.gen_q };
            let mut terms = incident_terms(b.net, aset, bi);
            if let Some(g) = gen[bi] {
                terms.push((g, -1.0));
            }
            b.model.push_row(super::Row {
                name: format!("hi.bal{comp}.{id}"),
                terms,
                sense: Sense::Eq,
                rhs: -demand,
                tag: RowTag::ActiveBalance,
                relaxed_when: Vec::new(),
            });
        }

        // Rated caps in the passive set, must-run floors and passive
        // dominance in the active set.
        for (comp, pg, ag, bounds) in [
            ("p", passive.gen_p[bi], active.gen_p[bi], data.src_p[bi]),
            ("q", passive.gen_q[bi], active.gen_q[bi], data.src_q[bi]),
        ] {
            if let (Some(g), Some((_, hi))) = (pg, bounds) {
                b.model.push_row(super::Row {
                    name: format!("lo.gcap{comp}.{id}"),
                    terms: vec![(g, 1.0)],
                    sense: Sense::Le,
                    rhs: hi,
                    tag: RowTag::PassiveGenCap,
                    relaxed_when: Vec::new(),
                });
            }
            if let (Some(g), Some((lo, _))) = (ag, bounds) {
                b.model.push_row(super::Row {
                    name: format!("hi.gfloor{comp}.{id}"),
                    terms: vec![(g, 1.0)],
                    sense: Sense::Ge,
                    rhs: lo,
                    tag: RowTag::ActiveGenFloor,
                    relaxed_when: Vec::new(),
                });
            }
            if let (Some(p), Some(a)) = (pg, ag) {
                b.model.push_row(super::Row {
                    name: format!("dom{comp}.{id}"),
                    terms: vec![(p, 1.0), (a, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                    tag: RowTag::ActiveDominatesPassive,
                    relaxed_when: Vec::new(),
                });
            }
        }
    }

    // Boundary flow orientation between adjacent zones: while the child
    // is passive it only imports; while it is active it only exports.
    let adjacency = crate::net::zone_adjacency(b.net)?;
    for ((za, zb), bs) in &adjacency {
        let boundary_lines: Vec<usize> = bs
            .ms
            .iter()
            .chain(bs.rcs.iter())
            .map(|s| b.net.switches[s.idx()].line.idx())
            .collect();
        for (z, w) in [(za.idx(), zb.idx()), (zb.idx(), za.idx())] {
            let Some(&zeta) = b.model.catalog.earlier.get(&(z, w)) else {
                continue;
            };
            for &li in &boundary_lines {
                let line = &b.net.lines[li];
                let sign = if b.net.zone_of_bus(line.from).idx() == z {
                    1.0
                } else {
                    -1.0
                };
                let mf = data.fmax[li] + 1.0;
                for (flow, comp, set_name) in [
                    (passive.flow_p[li], "p", "lo"),
                    (passive.flow_q[li], "q", "lo"),
                ] {
                    let _ = set_name;
                    // sign*flow >= (zeta - 1) * M
                    b.model.push_row(super::Row {
                        name: format!(
                            "lo.dir{comp}.{}.{}.{}",
                            line.id, b.net.zones[z].id, b.net.zones[w].id
                        ),
                        terms: vec![(flow, sign), (zeta, -mf)],
                        sense: Sense::Ge,
                        rhs: -mf,
                        tag: RowTag::PassiveDownstreamFlow,
                        relaxed_when: vec![(zeta, 0.0)],
                    });
                }
                for (flow, comp) in [(active.flow_p[li], "p"), (active.flow_q[li], "q")] {
                    // sign*flow <= (1 - zeta) * M
                    b.model.push_row(super::Row {
                        name: format!(
                            "hi.dir{comp}.{}.{}.{}",
                            line.id, b.net.zones[z].id, b.net.zones[w].id
                        ),
                        terms: vec![(flow, sign), (zeta, mf)],
                        sense: Sense::Le,
                        rhs: mf,
                        tag: RowTag::ActiveUpstreamFlow,
                        relaxed_when: vec![(zeta, 0.0)],
                    });
                }
            }
        }
    }

    b.model.catalog.pf = PfVars::Conservative { passive, active };
    Ok(())
}
