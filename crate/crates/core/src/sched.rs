//! Flow-handling algorithm kernels: ECMP static hashing, Hedera elephant
//! detection, demand estimation and global first-fit rescheduling, and the
//! DCTCP marking estimator in flow-level form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::mix64;
use crate::topology::{FatTreeTopology, Path};

/// Fields a switch hashes to pin a flow onto one equal-cost path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_host: u32,
    pub dst_host: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

impl FlowKey {
    /// Canonical 16-byte encoding hashed by [`ecmp_select`]: two big-endian
    /// words `src.dst` and `sport.dport.proto.0`.
    fn words(&self) -> (u64, u64) {
        let w0 = (self.src_host as u64) << 32 | self.dst_host as u64;
        let w1 = (self.src_port as u64) << 48
            | (self.dst_port as u64) << 32
            | (self.protocol as u64) << 24;
        (w0, w1)
    }
}

/// Static hash-based path choice: a salt-prefixed SplitMix64 mix over the
/// canonical key encoding, reduced modulo the path count.
pub fn ecmp_select(key: &FlowKey, n_paths: usize, salt: u64) -> Result<usize> {
    if n_paths == 0 {
        return Err(Error::invalid("ECMP needs at least one path"));
    }
    let (w0, w1) = key.words();
    let mut h = mix64(salt ^ 0x9e37_79b9_7f4a_7c15);
    h = mix64(h ^ w0);
    h = mix64(h ^ w1);
    Ok((h % n_paths as u64) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowClass {
    Elephant,
    Default,
}

/// Threshold detection: a flow is an elephant once its rate exceeds 10% of
/// the link capacity (strictly).
pub fn hedera_detect(flow_rate_bps: f64, link_capacity_bps: f64) -> FlowClass {
    if flow_rate_bps > 0.10 * link_capacity_bps {
        FlowClass::Elephant
    } else {
        FlowClass::Default
    }
}

/// Host-limited max-min fair demand estimation.
///
/// Alternates two passes until a fixed point: each source NIC's capacity is
/// split equally among its not-yet-converged flows, then each destination NIC
/// water-fills its incoming demands and marks receiver-limited flows as
/// converged. Converges in at most one pass per flow.
pub fn estimate_demands(
    flows: &[(u64, u32, u32)], // (flow id, src host, dst host)
    nic_capacity_bps: f64,
) -> Vec<(u64, f64)> {
    let n = flows.len();
    let mut demand = vec![0.0f64; n];
    let mut converged = vec![false; n];

    let mut sources: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    let mut dests: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, &(_, src, dst)) in flows.iter().enumerate() {
        sources.entry(src).or_default().push(i);
        dests.entry(dst).or_default().push(i);
    }

    for _ in 0..=n {
        // Sender pass: split what the converged flows left behind.
        for members in sources.values() {
            let fixed: f64 = members.iter().filter(|&&i| converged[i]).map(|&i| demand[i]).sum();
            let open: Vec<usize> = members.iter().copied().filter(|&i| !converged[i]).collect();
            if open.is_empty() {
                continue;
            }
            let share = ((nic_capacity_bps - fixed) / open.len() as f64).max(0.0);
            for i in open {
                demand[i] = share;
            }
        }

        // Receiver pass: water-fill each oversubscribed destination and pin
        // the flows the receiver limits.
        let mut newly_converged = false;
        for members in dests.values() {
            let total: f64 = members.iter().map(|&i| demand[i]).sum();
            if total <= nic_capacity_bps + 1e-9 {
                continue;
            }
            let mut open: Vec<usize> = members.to_vec();
            let mut capacity = nic_capacity_bps;
            // Flows already below the fair share keep their (sender-limited)
            // demand; the rest split the remainder equally.
            loop {
                let share = capacity / open.len() as f64;
                let (small, large): (Vec<usize>, Vec<usize>) =
                    open.iter().partition(|&&i| demand[i] <= share + 1e-12);
                if small.is_empty() {
                    for i in large {
                        demand[i] = share;
                        if !converged[i] {
                            converged[i] = true;
                            newly_converged = true;
                        }
                    }
                    break;
                }
                capacity -= small.iter().map(|&i| demand[i]).sum::<f64>();
                open = large;
                if open.is_empty() {
                    break;
                }
            }
        }
        if !newly_converged {
            break;
        }
    }

    flows.iter().enumerate().map(|(i, &(id, _, _))| (id, demand[i])).collect()
}

/// One flow as seen by the Hedera scheduler: current path index into its
/// equal-cost set plus an estimated demand.
pub struct HederaFlow<'a> {
    pub id: u64,
    pub demand_bps: f64,
    pub paths: &'a [Path],
    pub current: usize,
    pub is_mice: bool,
}

/// Global first fit over detected elephants, in ascending flow-id order.
///
/// A flow is rescheduled when its demand strictly exceeds
/// `elephant_threshold_bps` (the caller supplies the detection fraction of
/// link capacity; see [`hedera_detect`]). Each detected elephant scans its
/// equal-cost paths in canonical order and takes the first one where every
/// directed link still has room for its demand on top of the reservations
/// accumulated so far. Flows with no fitting path keep their current path;
/// mice are never moved. Returns the `(flow id, new path index)` pairs that
/// actually changed.
pub fn hedera_reschedule(
    flows: &mut [HederaFlow<'_>],
    topo: &FatTreeTopology,
    elephant_threshold_bps: f64,
) -> Result<Vec<(u64, usize)>> {
    let mut reserved = vec![0.0f64; topo.dlink_count()];
    let mut moves = Vec::new();

    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by_key(|&i| flows[i].id);

    for idx in order {
        let flow = &flows[idx];
        if flow.paths.is_empty() {
            return Err(Error::Internal(format!("flow {} has an empty path set", flow.id)));
        }
        if flow.is_mice || flow.demand_bps <= elephant_threshold_bps {
            continue;
        }
        let mut chosen = None;
        for (p_idx, path) in flow.paths.iter().enumerate() {
            let fits = path.hops.iter().all(|hop| {
                let d = topo.dlink(hop);
                reserved[d] + flow.demand_bps <= topo.link(hop.link).capacity_bps + 1e-9
            });
            if fits {
                chosen = Some(p_idx);
                break;
            }
        }
        let target = chosen.unwrap_or(flow.current);
        if chosen.is_some() {
            for hop in &flow.paths[target].hops {
                reserved[topo.dlink(hop)] += flow.demand_bps;
            }
        }
        if target != flow.current {
            moves.push((flow.id, target));
            flows[idx].current = target;
        }
    }
    Ok(moves)
}

/// DCTCP per-flow marking estimator state in fluid form.
///
/// `alpha` is the smoothed marked fraction; `rate_factor` scales the flow's
/// offered rate in place of a congestion window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DctcpState {
    pub alpha: f64,
    pub gain: f64,
    pub marking_threshold: f64,
    pub rate_factor: f64,
    /// Additive recovery step count equivalent: factor regains 1/window per
    /// unmarked update.
    pub recovery_window: f64,
}

impl DctcpState {
    pub fn new(gain: f64, marking_threshold: f64, recovery_window: f64) -> Result<Self> {
        if !(gain > 0.0 && gain <= 1.0) {
            return Err(Error::invalid(format!("gain must be in (0,1], got {gain}")));
        }
        if !(recovery_window > 0.0) {
            return Err(Error::invalid("recovery window must be positive"));
        }
        Ok(DctcpState { alpha: 0.0, gain, marking_threshold, rate_factor: 1.0, recovery_window })
    }
}

/// One marking-interval update: `alpha <- (1-g) alpha + g F`, multiplicative
/// rate decrease by `1 - alpha/2` while marks arrive, additive recovery
/// toward 1 otherwise.
pub fn dctcp_update(state: DctcpState, marked_fraction: f64) -> Result<DctcpState> {
    if !(0.0..=1.0).contains(&marked_fraction) {
        return Err(Error::invalid(format!(
            "marked fraction must be in [0,1], got {marked_fraction}"
        )));
    }
    let mut next = state;
    next.alpha = (1.0 - state.gain) * state.alpha + state.gain * marked_fraction;
    next.alpha = next.alpha.clamp(0.0, 1.0);
    if marked_fraction > 0.0 {
        next.rate_factor = (state.rate_factor * (1.0 - next.alpha / 2.0)).max(f64::MIN_POSITIVE);
    } else {
        next.rate_factor = (state.rate_factor + 1.0 / state.recovery_window).min(1.0);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_fat_tree;
    use approx::assert_relative_eq;

    const MBPS: f64 = 1e6;

    fn key(n: u64) -> FlowKey {
        FlowKey {
            src_host: (n % 997) as u32,
            dst_host: (n / 997 % 997) as u32,
            src_port: (n % 60_000) as u16,
            dst_port: 5001,
            protocol: 6,
        }
    }

    #[test]
    fn ecmp_is_deterministic_and_in_range() {
        let k = key(12345);
        let a = ecmp_select(&k, 4, 7).unwrap();
        let b = ecmp_select(&k, 4, 7).unwrap();
        assert_eq!(a, b);
        assert!(a < 4);
        assert_eq!(ecmp_select(&k, 1, 99).unwrap(), 0);
        assert!(ecmp_select(&k, 0, 0).is_err());
    }

    #[test]
    fn ecmp_spreads_uniformly() {
        // Chi-square style check: with 1e5 distinct keys over 4 paths each
        // bin frequency must sit within half a point of 25%.
        let mut counts = [0u64; 4];
        for n in 0..100_000u64 {
            counts[ecmp_select(&key(n), 4, 0).unwrap()] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 0.25).abs() < 0.005, "bin frequency {freq}");
        }
    }

    #[test]
    fn detection_threshold_is_strict() {
        assert_eq!(hedera_detect(1.2 * MBPS, 10.0 * MBPS), FlowClass::Elephant);
        assert_eq!(hedera_detect(1.0 * MBPS, 10.0 * MBPS), FlowClass::Default);
        assert_eq!(hedera_detect(0.0, 10.0 * MBPS), FlowClass::Default);
    }

    #[test]
    fn demand_estimation_fixed_points() {
        // Lone flow on idle NICs takes the whole NIC.
        let d = estimate_demands(&[(1, 1, 2)], 10.0 * MBPS);
        assert_relative_eq!(d[0].1, 10.0 * MBPS, max_relative = 1e-9);

        // Two flows out of one source split it.
        let d = estimate_demands(&[(1, 1, 2), (2, 1, 3)], 10.0 * MBPS);
        assert_relative_eq!(d[0].1, 5.0 * MBPS, max_relative = 1e-9);
        assert_relative_eq!(d[1].1, 5.0 * MBPS, max_relative = 1e-9);

        // Destination-limited trio converges to a third each.
        let d = estimate_demands(&[(1, 1, 3), (2, 1, 3), (3, 2, 3)], 10.0 * MBPS);
        for &(_, v) in &d {
            assert_relative_eq!(v, 10.0 * MBPS / 3.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn demand_estimation_respects_nic_capacities() {
        let flows: Vec<(u64, u32, u32)> = (0..12)
            .map(|i| (i as u64, (i % 4) as u32, (3 - i % 3) as u32 + 4))
            .collect();
        let nic = 10.0 * MBPS;
        let demands = estimate_demands(&flows, nic);
        let mut per_src: std::collections::BTreeMap<u32, f64> = Default::default();
        let mut per_dst: std::collections::BTreeMap<u32, f64> = Default::default();
        for ((id, src, dst), (id2, d)) in flows.iter().zip(&demands) {
            assert_eq!(id, id2);
            assert!(*d <= nic + 1e-6);
            *per_src.entry(*src).or_default() += d;
            *per_dst.entry(*dst).or_default() += d;
        }
        for (_, total) in per_src {
            assert!(total <= nic + 1e-6);
        }
        for (_, total) in per_dst {
            assert!(total <= nic + 1e-6);
        }
    }

    #[test]
    fn first_fit_trace() {
        let topo = build_fat_tree(4, 10.0 * MBPS).unwrap();
        let src_a = topo.host(1).unwrap();
        let dst_a = topo.host(16).unwrap();
        let paths_a = topo.equal_cost_paths(src_a, dst_a).unwrap();
        let src_b = topo.host(2).unwrap();
        let dst_b = topo.host(15).unwrap();
        let paths_b = topo.equal_cost_paths(src_b, dst_b).unwrap();

        // Empty network: a single elephant settles on its first canonical path.
        let mut flows = vec![HederaFlow {
            id: 1,
            demand_bps: 6.0 * MBPS,
            paths: &paths_a,
            current: 3,
            is_mice: false,
        }];
        let moves = hedera_reschedule(&mut flows, &topo, 1.0 * MBPS).unwrap();
        assert_eq!(moves, vec![(1, 0)]);

        // Two 6 Mbps elephants whose first canonical paths collide on the
        // core uplink while the next canonical path of the second is fully
        // clear: the second one moves there.
        let src_c = topo.host(3).unwrap();
        let dst_c = topo.host(13).unwrap();
        let paths_c = topo.equal_cost_paths(src_c, dst_c).unwrap();
        let overlap = |x: &crate::topology::Path, y: &crate::topology::Path| {
            x.hops.iter().any(|h| y.hops.iter().any(|g| topo.dlink(g) == topo.dlink(h)))
        };
        assert!(overlap(&paths_a[0], &paths_c[0]), "fixture expects a first-path collision");
        assert!(!overlap(&paths_a[0], &paths_c[1]), "fixture expects a clear alternative");
        let mut flows = vec![
            HederaFlow { id: 1, demand_bps: 6.0 * MBPS, paths: &paths_a, current: 0, is_mice: false },
            HederaFlow { id: 2, demand_bps: 6.0 * MBPS, paths: &paths_c, current: 0, is_mice: false },
        ];
        let moves = hedera_reschedule(&mut flows, &topo, 1.0 * MBPS).unwrap();
        assert_eq!(moves, vec![(2, 1)]);

        // Demand that fits nowhere leaves the flow in place.
        let mut flows = vec![HederaFlow {
            id: 1,
            demand_bps: 11.0 * MBPS,
            paths: &paths_a,
            current: 2,
            is_mice: false,
        }];
        let moves = hedera_reschedule(&mut flows, &topo, 1.0 * MBPS).unwrap();
        assert!(moves.is_empty());

        // Mice are never touched regardless of demand.
        let mut flows = vec![HederaFlow {
            id: 1,
            demand_bps: 9.0 * MBPS,
            paths: &paths_a,
            current: 2,
            is_mice: true,
        }];
        let moves = hedera_reschedule(&mut flows, &topo, 1.0 * MBPS).unwrap();
        assert!(moves.is_empty());
    }

    #[test]
    fn dctcp_update_examples() {
        let s = DctcpState::new(1.0 / 16.0, 0.2, 10.0).unwrap();
        let s1 = dctcp_update(s, 1.0).unwrap();
        assert_relative_eq!(s1.alpha, 0.0625, max_relative = 1e-12);

        // Unmarked updates decay alpha geometrically and recover the rate.
        let mut state = s1;
        state.rate_factor = 0.25;
        for _ in 0..200 {
            state = dctcp_update(state, 0.0).unwrap();
        }
        assert!(state.alpha < 1e-5);
        assert_eq!(state.rate_factor, 1.0);

        // Persistent half marking converges alpha to one half.
        let mut state = DctcpState::new(1.0 / 16.0, 0.2, 10.0).unwrap();
        for _ in 0..600 {
            state = dctcp_update(state, 0.5).unwrap();
        }
        assert_relative_eq!(state.alpha, 0.5, max_relative = 1e-9);

        assert!(dctcp_update(s, -0.1).is_err());
        assert!(dctcp_update(s, 1.5).is_err());
    }

    #[test]
    fn dctcp_alpha_closed_form_under_full_marking() {
        let mut state = DctcpState::new(1.0 / 16.0, 0.2, 10.0).unwrap();
        for n in 1..=64u32 {
            state = dctcp_update(state, 1.0).unwrap();
            let expect = 1.0 - (15.0f64 / 16.0).powi(n as i32);
            assert_relative_eq!(state.alpha, expect, max_relative = 1e-12);
            assert!(state.alpha >= 0.0 && state.alpha <= 1.0);
            assert!(state.rate_factor > 0.0 && state.rate_factor <= 1.0);
        }
    }
}
