//! Traffic scenario generation: mixes of elephant and mice flows at the three
//! evaluated ratios, over two connection patterns, plus the fixed probe flow
//! whose throughput the analysis tracks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::topology::FatTreeTopology;

/// Total generated connections per scenario, excluding the probe.
pub const CONNECTIONS: u32 = 120;
/// Mice transfers request a fixed 10 Kbyte object.
pub const MICE_SIZE_BYTES: u64 = 10_000;
/// Elephant lifetimes are drawn uniformly from this range in seconds.
pub const ELEPHANT_DURATION_RANGE: (f64, f64) = (1.0, 15.0);
/// Elephants all start inside the first second to overlap the probe.
pub const ELEPHANT_START_WINDOW_S: f64 = 1.0;
/// Scenario window: the probe's 20 s plus ramp; mice keep re-requesting
/// until it closes.
pub const WINDOW_S: f64 = 25.0;
pub const PROBE_DURATION_S: f64 = 20.0;
pub const PROBE_SRC_HOST: u32 = 1;
pub const PROBE_DST_HOST: u32 = 16;

/// Mice-to-elephant mix of the 120 connections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ratio {
    /// 2:1 - 80 mice, 40 elephants.
    #[serde(rename = "2:1")]
    TwoToOne,
    /// 1:1 - 60 mice, 60 elephants.
    #[serde(rename = "1:1")]
    OneToOne,
    /// 1:2 - 40 mice, 80 elephants.
    #[serde(rename = "1:2")]
    OneToTwo,
}

impl Ratio {
    pub const ALL: [Ratio; 3] = [Ratio::OneToOne, Ratio::OneToTwo, Ratio::TwoToOne];

    pub fn name(&self) -> &'static str {
        match self {
            Ratio::TwoToOne => "2:1",
            Ratio::OneToOne => "1:1",
            Ratio::OneToTwo => "1:2",
        }
    }

    /// `(mice, elephants)` out of the 120 connections.
    pub fn counts(&self) -> (u32, u32) {
        match self {
            Ratio::TwoToOne => (80, 40),
            Ratio::OneToOne => (60, 60),
            Ratio::OneToTwo => (40, 80),
        }
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2:1" => Ok(Ratio::TwoToOne),
            "1:1" => Ok(Ratio::OneToOne),
            "1:2" => Ok(Ratio::OneToTwo),
            other => Err(Error::invalid(format!("unknown ratio {other:?} (want 2:1, 1:1 or 1:2)"))),
        }
    }
}

/// Where generated connections may land.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// Endpoints anywhere; inter-pod pairs exercise the core layer.
    AllLayers,
    /// Endpoints constrained to a single pod so no path crosses a core switch.
    EdgeAggOnly,
}

impl Pattern {
    pub fn name(&self) -> &'static str {
        match self {
            Pattern::AllLayers => "all-layers",
            Pattern::EdgeAggOnly => "edge-agg-only",
        }
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-layers" | "all" => Ok(Pattern::AllLayers),
            "edge-agg-only" | "edge" => Ok(Pattern::EdgeAggOnly),
            other => Err(Error::invalid(format!("unknown pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum FlowKind {
    Elephant { duration_s: f64 },
    Mice { size_bytes: u64 },
}

impl FlowKind {
    pub fn is_mice(&self) -> bool {
        matches!(self, FlowKind::Mice { .. })
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            FlowKind::Elephant { .. } => "elephant",
            FlowKind::Mice { .. } => "mice",
        }
    }
}

/// One generated connection. Hosts are 1-based numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: u64,
    pub src: u32,
    pub dst: u32,
    pub start_s: f64,
    #[serde(flatten)]
    pub kind: FlowKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub ratio: Ratio,
    pub pattern: Pattern,
    pub mice_count: u32,
    pub elephant_count: u32,
    /// The background connections; the probe is kept separately.
    pub flows: Vec<Flow>,
    pub probe: Flow,
}

/// The fixed measurement flow: a 20 s elephant between hosts 1 and 16.
pub fn probe_flow() -> Flow {
    Flow {
        id: 0,
        src: PROBE_SRC_HOST,
        dst: PROBE_DST_HOST,
        start_s: 0.0,
        kind: FlowKind::Elephant { duration_s: PROBE_DURATION_S },
    }
}

/// Generate one scenario deterministically from `(ratio, pattern, seed)`.
///
/// Elephants get ids 1..=E and start inside the first second with lifetimes
/// uniform in [1, 15] s; mice get the following ids with start times
/// scattered over the whole window. Endpoint pairs are drawn uniformly over
/// the hosts the pattern allows; self-pairs are excluded, reuse of the probe
/// endpoints is not.
pub fn make_scenario(
    topo: &FatTreeTopology,
    ratio: Ratio,
    pattern: Pattern,
    seed: u64,
) -> Result<Scenario> {
    let hosts = topo.host_count() as u64;
    if hosts < 2 {
        return Err(Error::invalid("need at least two hosts"));
    }
    let (mice, elephants) = ratio.counts();
    let mut rng = CounterRng::substream(seed, 0xf10f);

    let mut flows = Vec::with_capacity((mice + elephants) as usize);
    let mut next_id = 1u64;
    for _ in 0..elephants {
        let (src, dst) = sample_pair(topo, pattern, &mut rng)?;
        let start_s = rng.range(0.0, ELEPHANT_START_WINDOW_S);
        let duration_s = rng.range(ELEPHANT_DURATION_RANGE.0, ELEPHANT_DURATION_RANGE.1);
        flows.push(Flow {
            id: next_id,
            src,
            dst,
            start_s,
            kind: FlowKind::Elephant { duration_s },
        });
        next_id += 1;
    }
    for _ in 0..mice {
        let (src, dst) = sample_pair(topo, pattern, &mut rng)?;
        let start_s = rng.range(0.0, WINDOW_S);
        flows.push(Flow {
            id: next_id,
            src,
            dst,
            start_s,
            kind: FlowKind::Mice { size_bytes: MICE_SIZE_BYTES },
        });
        next_id += 1;
    }

    Ok(Scenario {
        name: format!("{}/{}", ratio.name(), pattern.name()),
        ratio,
        pattern,
        mice_count: mice,
        elephant_count: elephants,
        flows,
        probe: probe_flow(),
    })
}

fn sample_pair(topo: &FatTreeTopology, pattern: Pattern, rng: &mut CounterRng) -> Result<(u32, u32)> {
    let hosts = topo.host_count() as u64;
    let src = rng.below(hosts) as u32 + 1;
    let dst = match pattern {
        Pattern::AllLayers => loop {
            let d = rng.below(hosts) as u32 + 1;
            if d != src {
                break d;
            }
        },
        Pattern::EdgeAggOnly => {
            // Uniform over the other hosts of the source's pod.
            let src_node = topo.host(src)?;
            let pod = topo.pod_of(src_node).expect("hosts always carry a pod");
            let pod_hosts: Vec<u32> = (1..=hosts as u32)
                .filter(|&h| {
                    h != src && topo.pod_of(topo.host(h).unwrap()) == Some(pod)
                })
                .collect();
            if pod_hosts.is_empty() {
                return Err(Error::invalid("pod has a single host; no intra-pod pair exists"));
            }
            pod_hosts[rng.below(pod_hosts.len() as u64) as usize]
        }
    };
    Ok((src, dst))
}
