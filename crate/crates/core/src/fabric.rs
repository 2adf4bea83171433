//! Event-driven fluid simulator.
//!
//! Between events every active flow transmits at its max-min fair rate given
//! the current path assignments and per-flow caps; bytes accumulate as rate
//! times interval. Events are flow arrivals, mice completions and re-requests,
//! elephant expirations, and the periodic control epochs of Hedera and DCTCP.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::sched::{self, DctcpState, FlowKey, HederaFlow};
use crate::sigfmt::sig6;
use crate::topology::{FatTreeTopology, NodeId, Path};
use crate::workload::{Flow, FlowKind, Scenario};

const TIME_EPS: f64 = 1e-9;
const BYTE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ecmp,
    Hedera,
    Dctcp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ecmp, Algorithm::Hedera, Algorithm::Dctcp];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ecmp => "ecmp",
            Algorithm::Hedera => "hedera",
            Algorithm::Dctcp => "dctcp",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecmp" => Ok(Algorithm::Ecmp),
            "hedera" => Ok(Algorithm::Hedera),
            "dctcp" => Ok(Algorithm::Dctcp),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Tunables of the simulated control planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Extra salt mixed with the run seed for ECMP hashing; models the fresh
    /// ephemeral ports each connection gets in a real run.
    pub ecmp_salt: u64,
    /// Elephant detection threshold as a fraction of link capacity.
    pub hedera_threshold: f64,
    pub hedera_epoch_s: f64,
    /// Use the host-limited fixed-point demand estimate; when false the
    /// scheduler sees measured rates instead.
    pub hedera_estimate_demands: bool,
    pub dctcp_gain: f64,
    /// Marking activates once a link's offered demand exceeds this fraction
    /// of its capacity.
    pub dctcp_marking_threshold: f64,
    pub dctcp_epoch_s: f64,
    /// Unmarked updates recover 1/window of the full rate.
    pub dctcp_recovery_window: f64,
    pub probe_interval_s: f64,
    /// Scenario window; mice stop re-requesting once it closes.
    pub window_s: f64,
    pub mice_respawn: bool,
    /// Think-time range between a mice completion and its re-request.
    pub mice_think_s: (f64, f64),
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            ecmp_salt: 0,
            hedera_threshold: 0.10,
            hedera_epoch_s: 1.0,
            hedera_estimate_demands: true,
            dctcp_gain: 1.0 / 16.0,
            dctcp_marking_threshold: 0.2,
            dctcp_epoch_s: 0.01,
            dctcp_recovery_window: 10.0,
            probe_interval_s: 1.0,
            window_s: 25.0,
            mice_respawn: true,
            mice_think_s: (0.1, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub throughput_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Elephant,
    Mice,
}

impl TrafficClass {
    pub fn name(&self) -> &'static str {
        match self {
            TrafficClass::Elephant => "elephant",
            TrafficClass::Mice => "mice",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub id: u64,
    pub class: TrafficClass,
    pub bytes: f64,
    /// Completion time for mice transfers.
    pub fct_s: Option<f64>,
    /// Lifetime mean throughput for elephants.
    pub mean_mbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub scenario: String,
    pub repetition: u32,
    pub seed: u64,
    pub probe_series: Vec<ProbeInterval>,
    pub flows: Vec<FlowRecord>,
    /// Count of link-capacity violations observed at event boundaries; any
    /// nonzero value indicates an allocator bug.
    pub conservation_violations: u32,
}

impl RunResult {
    /// Mean probe throughput over the series, in Mbps.
    pub fn probe_mean_mbps(&self) -> f64 {
        let n = self.probe_series.len() as f64;
        self.probe_series.iter().map(|p| p.throughput_bps).sum::<f64>() / n / 1e6
    }

    /// Sample standard deviation of the probe series, in Mbps.
    pub fn probe_std_mbps(&self) -> f64 {
        let n = self.probe_series.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.probe_series.iter().map(|p| p.throughput_bps).sum::<f64>() / n as f64;
        let ss = self
            .probe_series
            .iter()
            .map(|p| (p.throughput_bps - mean).powi(2))
            .sum::<f64>();
        (ss / (n as f64 - 1.0)).sqrt() / 1e6
    }
}

/// Throughput and error-factor samples for one (algorithm, scenario) pair
/// across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub algorithm: Algorithm,
    pub scenario: String,
    pub bin_width_mbps: f64,
    pub throughput_mbps: Vec<f64>,
    pub error_mbps: Vec<f64>,
}

/// Max-min fair allocation by progressive filling.
///
/// `flows` pairs each flow's directed-link indices with its rate cap
/// (`f64::INFINITY` for uncapped). All unfrozen flows rise together until a
/// link saturates or a cap binds, the touched flows freeze, and the rest
/// continue; the outcome is independent of flow order.
pub fn maxmin_rates(flows: &[(&[u32], f64)], link_capacity_bps: &[f64]) -> Result<Vec<f64>> {
    let n = flows.len();
    let mut rates = vec![0.0f64; n];
    if n == 0 {
        return Ok(rates);
    }
    for (links, cap) in flows {
        if links.is_empty() {
            return Err(Error::Internal("flow with empty path in allocator".into()));
        }
        if !(*cap > 0.0) {
            return Err(Error::invalid("rate caps must be positive"));
        }
    }

    let mut remaining = link_capacity_bps.to_vec();
    let mut load = vec![0u32; link_capacity_bps.len()];
    for (links, _) in flows {
        for &l in *links {
            load[l as usize] += 1;
        }
    }
    let mut frozen = vec![false; n];
    let mut unfrozen = n;

    while unfrozen > 0 {
        let mut delta = f64::INFINITY;
        for (l, &count) in load.iter().enumerate() {
            if count > 0 {
                delta = delta.min(remaining[l] / count as f64);
            }
        }
        for (i, (_, cap)) in flows.iter().enumerate() {
            if !frozen[i] {
                delta = delta.min(cap - rates[i]);
            }
        }
        if !delta.is_finite() {
            return Err(Error::Internal("unbounded max-min fill".into()));
        }
        let delta = delta.max(0.0);
        if delta > 0.0 {
            for (i, _) in flows.iter().enumerate() {
                if !frozen[i] {
                    rates[i] += delta;
                }
            }
            for (l, &count) in load.iter().enumerate() {
                if count > 0 {
                    remaining[l] -= delta * count as f64;
                }
            }
        }

        let mut froze_any = false;
        for (i, (links, cap)) in flows.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            let saturated = links.iter().any(|&l| remaining[l as usize] <= 1e-6)
                || rates[i] >= cap - 1e-9;
            if saturated {
                frozen[i] = true;
                froze_any = true;
                unfrozen -= 1;
                for &l in *links {
                    load[l as usize] -= 1;
                }
            }
        }
        if !froze_any {
            return Err(Error::Internal("max-min filling made no progress".into()));
        }
    }
    Ok(rates)
}

struct ActiveFlow {
    id: u64,
    src: u32,
    dst: u32,
    kind: FlowKind,
    start_s: f64,
    /// Expiry time for elephants.
    end_s: f64,
    remaining_bytes: f64,
    bytes: f64,
    path_idx: usize,
    dlinks: Vec<u32>,
    rate_bps: f64,
    cap_bps: f64,
    dctcp: Option<DctcpState>,
}

impl ActiveFlow {
    fn is_mice(&self) -> bool {
        self.kind.is_mice()
    }
}

struct Simulator<'a> {
    topo: &'a FatTreeTopology,
    params: &'a SimParams,
    algorithm: Algorithm,
    salt: u64,
    link_caps: Vec<f64>,
    paths: BTreeMap<(u32, u32), Vec<Path>>,
    actives: Vec<ActiveFlow>,
    pending: Vec<Flow>,
    pending_next: usize,
    respawns: Vec<(f64, Flow)>,
    records: Vec<FlowRecord>,
    probe_buckets: Vec<f64>,
    next_epoch: f64,
    think_rng: CounterRng,
    next_spawn_id: u64,
    violations: u32,
    now: f64,
}

/// Run one scenario under one algorithm.
///
/// Deterministic in all arguments: the seed enters only through the ECMP salt
/// and the mice think-time stream.
pub fn simulate(
    topo: &FatTreeTopology,
    scenario: &Scenario,
    algorithm: Algorithm,
    params: &SimParams,
    seed: u64,
) -> Result<RunResult> {
    let mut pending: Vec<Flow> = scenario.flows.clone();
    pending.push(scenario.probe);
    for flow in &pending {
        topo.host(flow.src)?;
        topo.host(flow.dst)?;
        if flow.src == flow.dst {
            return Err(Error::invalid(format!("flow {} has identical endpoints", flow.id)));
        }
    }
    pending.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.id.cmp(&b.id)));

    let probe = scenario.probe;
    let probe_duration = match probe.kind {
        FlowKind::Elephant { duration_s } => duration_s,
        FlowKind::Mice { .. } => return Err(Error::invalid("probe must be an elephant flow")),
    };
    let n_buckets = (probe_duration / params.probe_interval_s).round() as usize;

    let epoch_s = match algorithm {
        Algorithm::Ecmp => f64::INFINITY,
        Algorithm::Hedera => params.hedera_epoch_s,
        Algorithm::Dctcp => params.dctcp_epoch_s,
    };

    let link_caps: Vec<f64> = (0..topo.dlink_count())
        .map(|d| topo.link(crate::topology::LinkId((d / 2) as u32)).capacity_bps)
        .collect();

    let mut sim = Simulator {
        topo,
        params,
        algorithm,
        salt: params.ecmp_salt ^ seed,
        link_caps,
        paths: BTreeMap::new(),
        actives: Vec::new(),
        pending,
        pending_next: 0,
        respawns: Vec::new(),
        records: Vec::new(),
        probe_buckets: vec![0.0; n_buckets],
        next_epoch: epoch_s,
        think_rng: CounterRng::substream(seed, 0x111c_e000),
        next_spawn_id: 1_000_000,
        violations: 0,
        now: 0.0,
    };

    sim.run(epoch_s)?;

    let interval = params.probe_interval_s;
    let probe_series: Vec<ProbeInterval> = sim
        .probe_buckets
        .iter()
        .enumerate()
        .map(|(i, &bytes)| ProbeInterval {
            start_s: i as f64 * interval,
            end_s: (i + 1) as f64 * interval,
            throughput_bps: bytes * 8.0 / interval,
        })
        .collect();

    let mut flows = sim.records;
    flows.sort_by(|a, b| a.id.cmp(&b.id).then(a.fct_s.unwrap_or(0.0).total_cmp(&b.fct_s.unwrap_or(0.0))));

    Ok(RunResult {
        algorithm,
        scenario: scenario.name.clone(),
        repetition: 0,
        seed,
        probe_series,
        flows,
        conservation_violations: sim.violations,
    })
}

impl<'a> Simulator<'a> {
    fn run(&mut self, epoch_s: f64) -> Result<()> {
        self.recompute_rates()?;
        loop {
            let Some(t_next) = self.next_event_time(epoch_s) else { break };
            self.advance_to(t_next);
            self.now = t_next;
            self.process_departures()?;
            self.process_arrivals()?;
            self.maybe_epoch(epoch_s)?;
            self.recompute_rates()?;
        }
        debug_assert!(self.actives.is_empty());
        Ok(())
    }

    fn next_event_time(&self, epoch_s: f64) -> Option<f64> {
        let mut t = f64::INFINITY;
        if self.pending_next < self.pending.len() {
            t = t.min(self.pending[self.pending_next].start_s);
        }
        for &(when, _) in &self.respawns {
            t = t.min(when);
        }
        for f in &self.actives {
            if f.is_mice() {
                if f.remaining_bytes > BYTE_EPS && f.rate_bps > 0.0 {
                    t = t.min(self.now + f.remaining_bytes * 8.0 / f.rate_bps);
                }
            } else {
                t = t.min(f.end_s);
            }
        }
        if epoch_s.is_finite() && !self.actives.is_empty() {
            t = t.min(self.next_epoch);
        }
        t.is_finite().then_some(t.max(self.now))
    }

    fn advance_to(&mut self, t_next: f64) {
        let dt = t_next - self.now;
        if dt <= 0.0 {
            return;
        }
        let interval = self.params.probe_interval_s;
        for f in &mut self.actives {
            let transferred = f.rate_bps * dt / 8.0;
            f.bytes += transferred;
            if f.is_mice() {
                f.remaining_bytes -= transferred;
            }
            if f.id == 0 && f.rate_bps > 0.0 {
                // Split the probe's bytes across the sampling grid.
                let mut lo = self.now;
                while lo < t_next - TIME_EPS {
                    let bucket = (lo / interval).floor() as usize;
                    let hi = ((bucket + 1) as f64 * interval).min(t_next);
                    if bucket < self.probe_buckets.len() {
                        self.probe_buckets[bucket] += f.rate_bps * (hi - lo) / 8.0;
                    }
                    lo = hi;
                }
            }
        }
    }

    fn process_departures(&mut self) -> Result<()> {
        let now = self.now;
        let mut idx = 0;
        while idx < self.actives.len() {
            let f = &self.actives[idx];
            let done = if f.is_mice() {
                f.remaining_bytes <= BYTE_EPS
            } else {
                f.end_s <= now + TIME_EPS
            };
            if !done {
                idx += 1;
                continue;
            }
            let f = self.actives.remove(idx);
            match f.kind {
                FlowKind::Mice { size_bytes } => {
                    self.records.push(FlowRecord {
                        id: f.id,
                        class: TrafficClass::Mice,
                        bytes: size_bytes as f64,
                        fct_s: Some(now - f.start_s),
                        mean_mbps: None,
                    });
                    if self.params.mice_respawn {
                        let think = self
                            .think_rng
                            .range(self.params.mice_think_s.0, self.params.mice_think_s.1);
                        let when = now + think;
                        if when < self.params.window_s {
                            let id = self.next_spawn_id;
                            self.next_spawn_id += 1;
                            self.respawns.push((
                                when,
                                Flow { id, src: f.src, dst: f.dst, start_s: when, kind: f.kind },
                            ));
                        }
                    }
                }
                FlowKind::Elephant { duration_s } => {
                    self.records.push(FlowRecord {
                        id: f.id,
                        class: TrafficClass::Elephant,
                        bytes: f.bytes,
                        fct_s: None,
                        mean_mbps: Some(f.bytes * 8.0 / duration_s / 1e6),
                    });
                }
            }
        }
        Ok(())
    }

    fn process_arrivals(&mut self) -> Result<()> {
        while self.pending_next < self.pending.len()
            && self.pending[self.pending_next].start_s <= self.now + TIME_EPS
        {
            let flow = self.pending[self.pending_next];
            self.pending_next += 1;
            self.activate(flow)?;
        }
        // Due re-requests join in (time, id) order.
        let mut due: Vec<Flow> = Vec::new();
        self.respawns.retain(|&(when, flow)| {
            if when <= self.now + TIME_EPS {
                due.push(flow);
                false
            } else {
                true
            }
        });
        due.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.id.cmp(&b.id)));
        for flow in due {
            self.activate(flow)?;
        }
        Ok(())
    }

    fn activate(&mut self, flow: Flow) -> Result<()> {
        let src = self.topo.host(flow.src)?;
        let dst = self.topo.host(flow.dst)?;
        let paths = self.path_set(src, dst, flow.src, flow.dst)?;
        let key = FlowKey {
            src_host: flow.src,
            dst_host: flow.dst,
            src_port: 49_152 + (flow.id % 16_384) as u16,
            dst_port: 5_001,
            protocol: 6,
        };
        let path_idx = sched::ecmp_select(&key, paths, self.salt)?;

        let nic = self.topo.nic_capacity_bps();
        let (cap, dctcp) = if self.algorithm == Algorithm::Dctcp {
            let state = DctcpState::new(
                self.params.dctcp_gain,
                self.params.dctcp_marking_threshold,
                self.params.dctcp_recovery_window,
            )?;
            (state.rate_factor * nic, Some(state))
        } else {
            (f64::INFINITY, None)
        };

        let (end_s, remaining) = match flow.kind {
            FlowKind::Elephant { duration_s } => (self.now + duration_s, 0.0),
            FlowKind::Mice { size_bytes } => (f64::INFINITY, size_bytes as f64),
        };
        let dlinks = self.dlinks_of(flow.src, flow.dst, path_idx);
        self.actives.push(ActiveFlow {
            id: flow.id,
            src: flow.src,
            dst: flow.dst,
            kind: flow.kind,
            start_s: self.now,
            end_s,
            remaining_bytes: remaining,
            bytes: 0.0,
            path_idx,
            dlinks,
            rate_bps: 0.0,
            cap_bps: cap,
            dctcp,
        });
        Ok(())
    }

    fn path_set(&mut self, src: NodeId, dst: NodeId, src_no: u32, dst_no: u32) -> Result<usize> {
        if !self.paths.contains_key(&(src_no, dst_no)) {
            let paths = self.topo.equal_cost_paths(src, dst)?;
            self.paths.insert((src_no, dst_no), paths);
        }
        Ok(self.paths[&(src_no, dst_no)].len())
    }

    fn dlinks_of(&self, src_no: u32, dst_no: u32, path_idx: usize) -> Vec<u32> {
        self.paths[&(src_no, dst_no)][path_idx]
            .hops
            .iter()
            .map(|h| self.topo.dlink(h) as u32)
            .collect()
    }

    fn maybe_epoch(&mut self, epoch_s: f64) -> Result<()> {
        if !epoch_s.is_finite() || self.actives.is_empty() {
            return Ok(());
        }
        if self.now - self.next_epoch < -TIME_EPS {
            return Ok(());
        }
        match self.algorithm {
            Algorithm::Hedera => self.hedera_epoch()?,
            Algorithm::Dctcp => self.dctcp_epoch()?,
            Algorithm::Ecmp => {}
        }
        while self.next_epoch <= self.now + TIME_EPS {
            self.next_epoch += epoch_s;
        }
        Ok(())
    }

    fn hedera_epoch(&mut self) -> Result<()> {
        let nic = self.topo.nic_capacity_bps();
        let elephants: Vec<usize> = (0..self.actives.len())
            .filter(|&i| !self.actives[i].is_mice())
            .collect();
        if elephants.is_empty() {
            return Ok(());
        }

        let demands: BTreeMap<u64, f64> = if self.params.hedera_estimate_demands {
            let spec: Vec<(u64, u32, u32)> = elephants
                .iter()
                .map(|&i| (self.actives[i].id, self.actives[i].src, self.actives[i].dst))
                .collect();
            sched::estimate_demands(&spec, nic).into_iter().collect()
        } else {
            elephants.iter().map(|&i| (self.actives[i].id, self.actives[i].rate_bps)).collect()
        };

        let threshold = self.params.hedera_threshold * self.topo.link_capacity_bps();
        let mut hflows: Vec<HederaFlow<'_>> = elephants
            .iter()
            .map(|&i| {
                let f = &self.actives[i];
                HederaFlow {
                    id: f.id,
                    demand_bps: demands[&f.id],
                    paths: &self.paths[&(f.src, f.dst)],
                    current: f.path_idx,
                    is_mice: false,
                }
            })
            .collect();
        let moves = sched::hedera_reschedule(&mut hflows, self.topo, threshold)?;
        drop(hflows);

        for (id, new_path) in moves {
            let i = *elephants
                .iter()
                .find(|&&i| self.actives[i].id == id)
                .expect("move refers to an active elephant");
            self.actives[i].path_idx = new_path;
            let (src, dst) = (self.actives[i].src, self.actives[i].dst);
            self.actives[i].dlinks = self.dlinks_of(src, dst, new_path);
        }
        Ok(())
    }

    fn dctcp_epoch(&mut self) -> Result<()> {
        // Offered load per directed link if nothing throttled further.
        let mut offered = vec![0.0f64; self.link_caps.len()];
        for f in &self.actives {
            for &l in &f.dlinks {
                offered[l as usize] += f.cap_bps;
            }
        }
        let nic = self.topo.nic_capacity_bps();
        for f in &mut self.actives {
            let state = f.dctcp.expect("dctcp flows carry marking state");
            let mut marked: f64 = 0.0;
            for &l in &f.dlinks {
                let load = offered[l as usize];
                let cap = self.link_caps[l as usize];
                if load > state.marking_threshold * cap {
                    marked = marked.max(((load - cap) / load).clamp(0.0, 1.0));
                }
            }
            let next = sched::dctcp_update(state, marked)?;
            f.dctcp = Some(next);
            f.cap_bps = next.rate_factor * nic;
        }
        Ok(())
    }

    fn recompute_rates(&mut self) -> Result<()> {
        if self.actives.is_empty() {
            return Ok(());
        }
        let inputs: Vec<(&[u32], f64)> =
            self.actives.iter().map(|f| (f.dlinks.as_slice(), f.cap_bps)).collect();
        let rates = maxmin_rates(&inputs, &self.link_caps)?;
        drop(inputs);
        for (f, rate) in self.actives.iter_mut().zip(&rates) {
            f.rate_bps = *rate;
        }

        // Conservation audit at every event boundary.
        let mut usage = vec![0.0f64; self.link_caps.len()];
        for f in &self.actives {
            for &l in &f.dlinks {
                usage[l as usize] += f.rate_bps;
            }
        }
        for (l, &used) in usage.iter().enumerate() {
            if used > self.link_caps[l] * (1.0 + 1e-9) + 1e-6 {
                self.violations += 1;
            }
        }
        Ok(())
    }
}

/// Run `repetitions` independent simulations and collect the per-repetition
/// probe means and probe-series standard deviations.
///
/// Repetition `i` regenerates the scenario and runs with seed `base_seed + i`;
/// repetitions execute in parallel and are merged in index order, so the
/// outcome does not depend on the worker count.
pub fn run_campaign(
    topo: &FatTreeTopology,
    ratio: crate::workload::Ratio,
    pattern: crate::workload::Pattern,
    algorithm: Algorithm,
    params: &SimParams,
    repetitions: u32,
    base_seed: u64,
) -> Result<(SampleSet, Vec<RunResult>)> {
    if repetitions < 1 {
        return Err(Error::invalid("need at least one repetition"));
    }
    let runs: Vec<RunResult> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let seed = base_seed.wrapping_add(rep as u64);
            let scenario = crate::workload::make_scenario(topo, ratio, pattern, seed)?;
            let mut run = simulate(topo, &scenario, algorithm, params, seed)?;
            run.repetition = rep;
            Ok(run)
        })
        .collect::<Result<_>>()?;

    let sample_set = SampleSet {
        algorithm,
        scenario: format!("{}/{}", ratio.name(), pattern.name()),
        bin_width_mbps: 1.0,
        throughput_mbps: runs.iter().map(|r| r.probe_mean_mbps()).collect(),
        error_mbps: runs.iter().map(|r| r.probe_std_mbps()).collect(),
    };
    Ok((sample_set, runs))
}

/// One row of `samples.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub algorithm: String,
    pub scenario: String,
    pub repetition: u32,
    pub probe_mean_mbps: f64,
    pub probe_std_mbps: f64,
}

pub fn write_samples_csv<W: std::io::Write>(writer: W, sets: &[SampleSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["algorithm", "scenario", "repetition", "probe_mean_mbps", "probe_std_mbps"])?;
    for set in sets {
        for (rep, (mean, std)) in set.throughput_mbps.iter().zip(&set.error_mbps).enumerate() {
            w.write_record([
                set.algorithm.name().to_string(),
                set.scenario.clone(),
                rep.to_string(),
                sig6(*mean),
                sig6(*std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse `samples.csv`, reporting the 1-based line number on malformed rows.
pub fn read_samples_csv<R: std::io::Read>(reader: R) -> Result<Vec<SampleRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in r.deserialize::<SampleRow>() {
        match record {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line().to_string())
                    .unwrap_or_else(|| "?".to_string());
                return Err(Error::invalid(format!("samples.csv line {line}: {e}")));
            }
        }
    }
    Ok(rows)
}

pub fn write_flows_csv<W: std::io::Write>(
    writer: W,
    runs: &[(Algorithm, String, Vec<RunResult>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "algorithm",
        "scenario",
        "repetition",
        "flow_id",
        "class",
        "bytes",
        "fct_s",
        "mean_mbps",
    ])?;
    for (algorithm, scenario, results) in runs {
        for run in results {
            for f in &run.flows {
                w.write_record([
                    algorithm.name().to_string(),
                    scenario.clone(),
                    run.repetition.to_string(),
                    f.id.to_string(),
                    f.class.name().to_string(),
                    sig6(f.bytes),
                    f.fct_s.map(sig6).unwrap_or_default(),
                    f.mean_mbps.map(sig6).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_fat_tree;
    use crate::workload::{self, Pattern, Ratio};
    use approx::assert_relative_eq;

    const MBPS: f64 = 1e6;

    fn probe_only() -> Scenario {
        Scenario {
            name: "probe-only".into(),
            ratio: Ratio::OneToOne,
            pattern: Pattern::AllLayers,
            mice_count: 0,
            elephant_count: 0,
            flows: vec![],
            probe: workload::probe_flow(),
        }
    }

    #[test]
    fn maxmin_equal_split() {
        let links = [10.0 * MBPS];
        let path = [0u32];
        let flows: Vec<(&[u32], f64)> = vec![(&path, f64::INFINITY); 3];
        let rates = maxmin_rates(&flows, &links).unwrap();
        for r in rates {
            assert_relative_eq!(r, 10.0 * MBPS / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn maxmin_cap_binds_first() {
        let links = [10.0 * MBPS];
        let path = [0u32];
        let flows: Vec<(&[u32], f64)> = vec![(&path, 2.0 * MBPS), (&path, f64::INFINITY)];
        let rates = maxmin_rates(&flows, &links).unwrap();
        assert_relative_eq!(rates[0], 2.0 * MBPS, max_relative = 1e-12);
        assert_relative_eq!(rates[1], 8.0 * MBPS, max_relative = 1e-12);
    }

    #[test]
    fn maxmin_disjoint_paths_are_independent() {
        let links = [10.0 * MBPS, 4.0 * MBPS];
        let p0 = [0u32];
        let p1 = [1u32];
        let flows: Vec<(&[u32], f64)> = vec![(&p0, 7.0 * MBPS), (&p1, f64::INFINITY)];
        let rates = maxmin_rates(&flows, &links).unwrap();
        assert_relative_eq!(rates[0], 7.0 * MBPS, max_relative = 1e-12);
        assert_relative_eq!(rates[1], 4.0 * MBPS, max_relative = 1e-12);
    }

    #[test]
    fn maxmin_nic_capped_crossing_flow() {
        // f2 crosses the shared 10 Mbps link and a 4 Mbps access link; f1
        // only the shared link. Water-filling gives f2 = 4, f1 = 6.
        let links = [10.0 * MBPS, 4.0 * MBPS];
        let p1 = [0u32];
        let p2 = [0u32, 1u32];
        let flows: Vec<(&[u32], f64)> = vec![(&p1, f64::INFINITY), (&p2, f64::INFINITY)];
        let rates = maxmin_rates(&flows, &links).unwrap();
        assert_relative_eq!(rates[0], 6.0 * MBPS, max_relative = 1e-12);
        assert_relative_eq!(rates[1], 4.0 * MBPS, max_relative = 1e-12);
    }

    #[test]
    fn maxmin_is_order_invariant() {
        let links = [10.0 * MBPS, 7.0 * MBPS, 3.0 * MBPS];
        let paths: Vec<Vec<u32>> = vec![vec![0], vec![0, 1], vec![1, 2], vec![2], vec![0, 2]];
        let caps = [f64::INFINITY, 5.0 * MBPS, f64::INFINITY, 1.5 * MBPS, f64::INFINITY];
        let flows: Vec<(&[u32], f64)> =
            paths.iter().zip(caps).map(|(p, c)| (p.as_slice(), c)).collect();
        let base = maxmin_rates(&flows, &links).unwrap();
        let perm = [4usize, 2, 0, 3, 1];
        let shuffled: Vec<(&[u32], f64)> = perm.iter().map(|&i| flows[i]).collect();
        let out = maxmin_rates(&shuffled, &links).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert_eq!(out[j], base[i], "order changed the allocation bit pattern");
        }
    }

    #[test]
    fn probe_alone_gets_full_capacity_under_every_algorithm() {
        let topo = build_fat_tree(4, 10.0 * MBPS).unwrap();
        let scenario = probe_only();
        for algo in Algorithm::ALL {
            let run = simulate(&topo, &scenario, algo, &SimParams::default(), 3).unwrap();
            // ECMP and Hedera advance on an integer grid and come out exact;
            // DCTCP's 10 ms epochs accumulate float dust below 1e-12.
            assert_relative_eq!(run.probe_mean_mbps(), 10.0, max_relative = 1e-12);
            assert!(run.probe_std_mbps() < 1e-9, "{algo:?}");
            assert_eq!(run.conservation_violations, 0);
            assert_eq!(run.probe_series.len(), 20);
            // The series partitions [0, 20].
            for (i, p) in run.probe_series.iter().enumerate() {
                assert_eq!(p.start_s, i as f64);
                assert_eq!(p.end_s, (i + 1) as f64);
            }
        }
    }

    #[test]
    fn two_identical_elephants_share_a_link_evenly() {
        // On the k=2 tree every inter-pod pair has exactly one path, so the
        // probe and a twin elephant rub on the same links and split them.
        let topo = build_fat_tree(2, 10.0 * MBPS).unwrap();
        let probe = Flow {
            id: 0,
            src: 1,
            dst: 2,
            start_s: 0.0,
            kind: FlowKind::Elephant { duration_s: 20.0 },
        };
        let twin = Flow { id: 1, ..probe };
        let scenario = Scenario {
            name: "twin".into(),
            ratio: Ratio::OneToOne,
            pattern: Pattern::AllLayers,
            mice_count: 0,
            elephant_count: 1,
            flows: vec![twin],
            probe,
        };
        let run = simulate(&topo, &scenario, Algorithm::Ecmp, &SimParams::default(), 0).unwrap();
        assert_relative_eq!(run.probe_mean_mbps(), 5.0, max_relative = 1e-12);
        let twin_record = run.flows.iter().find(|f| f.id == 1).unwrap();
        assert_relative_eq!(twin_record.mean_mbps.unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn campaign_is_deterministic_and_sized() {
        let topo = build_fat_tree(4, 10.0 * MBPS).unwrap();
        let params = SimParams::default();
        let (a, runs_a) =
            run_campaign(&topo, Ratio::OneToOne, Pattern::AllLayers, Algorithm::Ecmp, &params, 5, 42)
                .unwrap();
        let (b, runs_b) =
            run_campaign(&topo, Ratio::OneToOne, Pattern::AllLayers, Algorithm::Ecmp, &params, 5, 42)
                .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.throughput_mbps.len(), 5);
        assert_eq!(a.error_mbps.len(), 5);
        assert_eq!(
            serde_json::to_vec(&runs_a).unwrap(),
            serde_json::to_vec(&runs_b).unwrap()
        );
        for run in &runs_a {
            assert_eq!(run.conservation_violations, 0);
        }
        // Mice records exist and FCTs are positive.
        assert!(runs_a[0]
            .flows
            .iter()
            .any(|f| f.class == TrafficClass::Mice && f.fct_s.unwrap() > 0.0));
    }

    #[test]
    fn probe_only_campaign_has_zero_error_samples() {
        let topo = build_fat_tree(2, 10.0 * MBPS).unwrap();
        // A campaign over a ratio still generates flows, so instead simulate
        // the probe alone across seeds by hand.
        for seed in 0..3 {
            let probe = Flow {
                id: 0,
                src: 1,
                dst: 2,
                start_s: 0.0,
                kind: FlowKind::Elephant { duration_s: 20.0 },
            };
            let scenario = Scenario {
                name: "probe-only".into(),
                ratio: Ratio::OneToOne,
                pattern: Pattern::AllLayers,
                mice_count: 0,
                elephant_count: 0,
                flows: vec![],
                probe,
            };
            let run = simulate(&topo, &scenario, Algorithm::Hedera, &SimParams::default(), seed).unwrap();
            assert_eq!(run.probe_std_mbps(), 0.0);
        }
    }

    #[test]
    fn samples_csv_round_trips() {
        let set = SampleSet {
            algorithm: Algorithm::Hedera,
            scenario: "1:1/all-layers".into(),
            bin_width_mbps: 1.0,
            throughput_mbps: vec![9.123456, 4.5],
            error_mbps: vec![1.25, 0.0],
        };
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, std::slice::from_ref(&set)).unwrap();
        let rows = read_samples_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].algorithm, "hedera");
        assert_eq!(rows[0].repetition, 0);
        assert_relative_eq!(rows[0].probe_mean_mbps, 9.12346, max_relative = 1e-9);
        assert_eq!(rows[1].probe_std_mbps, 0.0);

        let bad = b"algorithm,scenario,repetition,probe_mean_mbps,probe_std_mbps\necmp,1:1,0,9.5,oops\n";
        let err = read_samples_csv(&bad[..]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
