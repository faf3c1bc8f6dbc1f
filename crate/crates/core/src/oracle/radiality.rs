//! Union-find radiality check over the closed-line graph.

use crate::net::{BusIdx, Network};

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Returns false when the edge closes a cycle.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// True iff the closed-line graph restricted to energized buses is a
/// forest with exactly one root (substation or designated master-DG bus)
/// per tree.
pub fn check_radiality(
    net: &Network,
    closed_lines: &[bool],
    energized_zones: &[bool],
    master_dg_buses: &[BusIdx],
) -> bool {
    let nb = net.buses.len();
    let energized: Vec<bool> = (0..nb)
        .map(|bi| energized_zones[net.buses[bi].zone.idx()])
        .collect();
    let mut dsu = Dsu::new(nb);
    for (li, line) in net.lines.iter().enumerate() {
        if closed_lines[li] && energized[line.from.idx()] && energized[line.to.idx()] {
            if !dsu.union(line.from.idx(), line.to.idx()) {
                return false; // cycle
            }
        }
    }
    let mut roots_per_comp = std::collections::BTreeMap::new();
    for bi in 0..nb {
        if energized[bi] {
            roots_per_comp.entry(dsu.find(bi)).or_insert(0usize);
        }
    }
    for bi in net.substation_buses() {
        if energized[bi.idx()] {
            *roots_per_comp.entry(dsu.find(bi.idx())).or_insert(0) += 1;
        }
    }
    for bus in master_dg_buses {
        if energized[bus.idx()] {
            *roots_per_comp.entry(dsu.find(bus.idx())).or_insert(0) += 1;
        }
    }
    roots_per_comp.values().all(|&n| n == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn meshed_loop_fails() {
        let net = synth::two_zone_two_switch_net();
        let all_closed: Vec<bool> = net.lines.iter().map(|_| true).collect();
        let all_on = vec![true; net.zones.len()];
        assert!(!check_radiality(&net, &all_closed, &all_on, &[]));
    }

    #[test]
    fn spanning_tree_passes() {
        let net = synth::desk13_net();
        let closed: Vec<bool> = net
            .lines
            .iter()
            .map(|l| match l.switch {
                None => true,
                Some(s) => net.switches[s.idx()].initially_closed,
            })
            .collect();
        let all_on = vec![true; net.zones.len()];
        assert!(check_radiality(&net, &closed, &all_on, &[]));
    }

    #[test]
    fn two_islands_each_with_a_master_dg() {
        let net = synth::desk13_net();
        // Open every switch: 13 islands. Energize only the two DG zones,
        // each anchored by its own master DG.
        let closed: Vec<bool> = net.lines.iter().map(|l| l.switch.is_none()).collect();
        let mut on = vec![false; net.zones.len()];
        let dg_buses: Vec<_> = net.dgs.iter().map(|d| d.bus).collect();
        for b in &dg_buses {
            on[net.zone_of_bus(*b).idx()] = true;
        }
        assert!(check_radiality(&net, &closed, &on, &dg_buses));
        // Both DGs in one island must fail.
        let mut closed2 = closed.clone();
        // Close the path between the two DG zones (z6 -ms5- z10).
        for (li, line) in net.lines.iter().enumerate() {
            if let Some(s) = line.switch {
                if net.switches[s.idx()].id == "ms5" {
                    closed2[li] = true;
                }
            }
        }
        assert!(!check_radiality(&net, &closed2, &on, &dg_buses));
    }
}
