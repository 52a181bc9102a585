//! Builds an engine from a validated config, runs it, and distills metrics.
//! Sweeps run one independent engine per point; normalization reruns the
//! scenario with the accelerator (or migration) stripped.

use std::collections::BTreeMap;
use std::fmt;

use wansim_core::{
    AcceleratorPolicy, Address, ContentDescriptor, LogRecord, MigrationEvent, NodeId, ProxyMode,
    ProxyPlan, Sim, SimTime, StartSpec, Topology, TransportParams, VmSpec,
};

use crate::config::{AccelMode, ConfigFile, ConfigError, NormalizeMode};
use crate::csv::MetricsRow;
use crate::power_file;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// Engine-level setup failure (routing, migration scheduling).
    Setup(String),
    /// The transfer did not complete within the horizon.
    Incomplete { scenario: String, d_ms: u64 },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Setup(m) => write!(f, "setup failed: {m}"),
            RunError::Incomplete { scenario, d_ms } => {
                write!(f, "{scenario} (d={d_ms} ms): transfer incomplete at horizon")
            }
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Raw outcome of one engine run.
pub struct RunOutput {
    pub d_ms: u64,
    pub completion_s: f64,
    pub throughput_pre_bps: Option<f64>,
    pub throughput_post_bps: Option<f64>,
    pub handover_duration_s: Option<f64>,
    pub wan_bytes: Option<u64>,
    pub energy_j: Option<f64>,
}

fn secs(t: SimTime) -> f64 {
    t.as_micros() as f64 / 1e6
}

fn from_secs_f(s: f64) -> SimTime {
    SimTime::from_micros((s * 1e6).round() as u64)
}

/// Total one-way delay along the unique path between two addresses.
fn path_delay(topo: &Topology, from: Address, to: Address) -> Result<SimTime, RunError> {
    let route = topo
        .route(from, to)
        .map_err(|e| RunError::Setup(format!("{e}")))?;
    let mut d = SimTime::ZERO;
    for (link, _) in route {
        d = d + topo.link(link).one_way_delay;
    }
    Ok(d)
}

/// Builds the topology, retargeting the final post-path link's delay so the
/// client→post-server one-way delay totals `d_ms` when a sweep point asks
/// for it.
fn topology_for(cfg: &ConfigFile, d_ms: Option<u64>) -> Result<(Topology, u64), RunError> {
    let base = cfg.build_topology()?;
    let client = ConfigFile::addr(cfg.roles.client);
    let target = ConfigFile::addr(cfg.roles.server_post.unwrap_or(cfg.roles.server_pre));
    let Some(d_ms) = d_ms else {
        let d = path_delay(&base, client, target)?;
        return Ok((base, d.as_millis()));
    };
    let route = base
        .route(client, target)
        .map_err(|e| RunError::Setup(format!("{e}")))?;
    let Some(&(last_link, _)) = route.last() else {
        return Err(RunError::Setup("post path has no links to retarget".into()));
    };
    let mut rest = SimTime::ZERO;
    for &(link, _) in route.iter().take(route.len() - 1) {
        rest = rest + base.link(link).one_way_delay;
    }
    let want = SimTime::from_millis(d_ms);
    if want <= rest {
        return Err(RunError::Setup(format!(
            "sweep delay {d_ms} ms does not exceed the fixed path delay {} ms",
            rest.as_millis()
        )));
    }
    let mut links = Vec::new();
    for (id, spec) in base.links() {
        let mut s = *spec;
        if id == last_link {
            s.one_way_delay = want - rest;
        }
        links.push(s);
    }
    let topo = Topology::build(&links).map_err(|e| RunError::Setup(format!("{e}")))?;
    Ok((topo, d_ms))
}

/// Delivered-bytes curve for the session, from the event log.
fn deliver_curve(log: &[LogRecord]) -> Vec<(SimTime, u64)> {
    log.iter()
        .filter_map(|r| match r {
            LogRecord::Deliver { end, at, .. } => Some((*at, *end)),
            _ => None,
        })
        .collect()
}

fn delivered_at(curve: &[(SimTime, u64)], t: SimTime) -> u64 {
    let mut v = 0;
    for &(at, end) in curve {
        if at > t {
            break;
        }
        v = end;
    }
    v
}

/// Mean delivery rate over (t0, t1], in payload bits per second.
fn slope_bps(curve: &[(SimTime, u64)], t0: SimTime, t1: SimTime) -> Option<f64> {
    if t1 <= t0 {
        return None;
    }
    let b0 = delivered_at(curve, t0);
    let b1 = delivered_at(curve, t1);
    if b1 <= b0 {
        return None;
    }
    Some((b1 - b0) as f64 * 8.0 / secs(t1 - t0))
}

/// One engine run. `with_accel` / `with_migration` let normalization rerun
/// the same scenario with a piece removed.
pub fn run_single(
    cfg: &ConfigFile,
    d_ms: Option<u64>,
    with_accel: bool,
    with_migration: bool,
) -> Result<RunOutput, RunError> {
    let (topo, d_ms) = topology_for(cfg, d_ms)?;
    let client = ConfigFile::addr(cfg.roles.client);
    let server_pre = ConfigFile::addr(cfg.roles.server_pre);
    let server_post = cfg.roles.server_post.map(ConfigFile::addr);

    let rtt_pre = path_delay(&topo, client, server_pre)?.mul_u64(2);
    let rtt_post = match server_post {
        Some(p) => path_delay(&topo, client, p)?.mul_u64(2),
        None => rtt_pre,
    };

    let mut sim = Sim::new(topo);
    sim.listen(server_pre);
    if let Some(p) = server_post {
        sim.listen(p);
    }
    let params = TransportParams {
        mss: cfg.transport.mss,
        rwnd_cap: cfg.transport.rwnd_bytes,
        initial_cwnd_segments: cfg.transport.initial_cwnd_segments,
        ssthresh: u64::MAX,
        pacing_rate: None,
    };
    let sess = sim
        .open_session(client, server_pre, params)
        .map_err(|e| RunError::Setup(format!("{e}")))?;

    if with_accel {
        if let Some(a) = &cfg.accelerator {
            let near = ConfigFile::addr(cfg.roles.proxy_near.expect("validated"));
            let far = ConfigFile::addr(cfg.roles.proxy_far.expect("validated"));
            let policy = AcceleratorPolicy {
                rtt_threshold: SimTime::from_millis(a.rtt_threshold_ms),
                hysteresis: SimTime::from_millis(a.hysteresis_ms),
                wan_window_bytes: a.wan_window_bytes,
                wan_rate_cap: a.wan_rate_cap_bits_per_s,
            };
            let plan = ProxyPlan {
                near,
                far,
                mode: match a.mode {
                    AccelMode::Bypass => ProxyMode::Bypass,
                    AccelMode::Optimizing => ProxyMode::Optimizing,
                },
                wan_window_bytes: a.wan_window_bytes,
                wan_rate_cap: a.wan_rate_cap_bits_per_s,
                chunk_size: a.chunk_size,
                store_capacity_bytes: u64::MAX,
            };
            sim.set_session_policy(sess, Some(policy), Some(plan));
        }
    }

    let descriptor = ContentDescriptor::new(
        cfg.scenario.transfer_size_bytes,
        cfg.scenario.redundancy,
        cfg.scenario.compressibility,
    )
    .map_err(|e| RunError::Setup(format!("{e}")))?;
    let start = match cfg.scenario.start_at_s {
        Some(t) => StartSpec::At(from_secs_f(t)),
        None => StartSpec::AfterHandover,
    };
    sim.schedule_transfer(sess, descriptor, start)
        .map_err(|e| RunError::Setup(format!("{e:?}")))?;

    let mut migration_start = None;
    if with_migration {
        if let Some(m) = &cfg.migration {
            let post = server_post.expect("validated");
            let vm = VmSpec {
                vm_id: 0,
                current_addr: server_pre,
                alternate_addr: post,
                host: cfg
                    .roles
                    .vm_host
                    .map(NodeId)
                    .unwrap_or(server_pre.node),
            };
            let mut ev = MigrationEvent::new(
                from_secs_f(m.start_s),
                from_secs_f(m.duration_s),
                post.node,
            );
            if let Some(lead) = m.announce_lead_s {
                ev.announce_lead = from_secs_f(lead);
            }
            ev.notify_lag = SimTime::from_millis(m.notify_lag_ms);
            ev.downtime = SimTime::from_millis(m.downtime_ms);
            migration_start = Some(ev.start_at);
            sim.schedule_migration(vm, ev, sess)
                .map_err(|e| RunError::Setup(format!("{e}")))?;
        }
    }

    let horizon = from_secs_f(cfg.scenario.horizon_s);
    sim.run_to_quiescence(horizon);

    let (started, completed) = sim
        .session_transfer_times(sess)
        .unwrap_or((None, None));
    let (Some(started), Some(completed)) = (started, completed) else {
        return Err(RunError::Incomplete {
            scenario: cfg.scenario.id.clone(),
            d_ms,
        });
    };

    let curve = deliver_curve(sim.log());
    let report = sim.session_handover_report(sess);
    let throughput_pre_bps = migration_start.and_then(|ms| {
        slope_bps(&curve, started + rtt_pre.mul_u64(5), ms)
    });
    let throughput_post_bps = report.and_then(|r| {
        slope_bps(&curve, r.completed_at + rtt_post.mul_u64(5), completed)
    });

    let energy_j = match &cfg.power {
        Some(p) => {
            let path = cfg.base_dir.join(&p.profile);
            let text = std::fs::read_to_string(&path).map_err(|e| {
                RunError::Setup(format!("cannot read power profile {}: {e}", path.display()))
            })?;
            let profile =
                power_file::parse_profile(&text).map_err(|e| RunError::Setup(format!("{e}")))?;
            let busy = sim.device_busy_intervals();
            let mut rates: BTreeMap<NodeId, u64> = BTreeMap::new();
            let mut profiles = BTreeMap::new();
            for (_, spec) in sim.topology().links() {
                for node in [spec.a.node, spec.b.node] {
                    let r = rates.entry(node).or_insert(0);
                    *r = (*r).max(spec.rate_bits_per_s);
                    profiles.entry(node).or_insert_with(|| profile.clone());
                }
            }
            let fleet = wansim_core::energy_for_scenario(&busy, &rates, &profiles)
                .map_err(|e| RunError::Setup(format!("{e}")))?;
            Some(fleet.total_j)
        }
        None => None,
    };

    Ok(RunOutput {
        d_ms,
        completion_s: secs(completed - started),
        throughput_pre_bps,
        throughput_post_bps,
        handover_duration_s: report.map(|r| secs(r.duration)),
        wan_bytes: sim.session_wan_bytes(sess),
        energy_j,
    })
}

/// Executes the scenario over its sweep (or once), producing one normalized
/// metrics row per point.
pub fn run(cfg: &ConfigFile) -> Result<Vec<MetricsRow>, RunError> {
    let points: Vec<Option<u64>> = match &cfg.sweep {
        Some(sw) => sw.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut rows = Vec::new();
    for point in points {
        let primary = run_single(cfg, point, true, true)?;
        let normalized_t = match cfg.scenario.normalize {
            NormalizeMode::None => 1.0,
            NormalizeMode::NoAccelerator => {
                let base = run_single(cfg, point, false, true)?;
                primary.completion_s / base.completion_s
            }
            NormalizeMode::NoMigration => {
                let base = run_single(cfg, point, true, false)?;
                primary.completion_s / base.completion_s
            }
        };
        rows.push(MetricsRow {
            scenario_id: cfg.scenario.id.clone(),
            d_ms: primary.d_ms,
            completion_time_s: primary.completion_s,
            normalized_t,
            throughput_pre_bps: primary.throughput_pre_bps,
            throughput_post_bps: primary.throughput_post_bps,
            handover_duration_s: primary.handover_duration_s,
            wan_bytes: primary.wan_bytes,
            energy_j: primary.energy_j,
        });
    }
    Ok(rows)
}
