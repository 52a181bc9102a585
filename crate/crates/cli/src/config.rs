//! Scenario configuration: a TOML tree that fully determines one run (or a
//! sweep of runs). No environment-dependent defaults; invalid configs never
//! reach the engine.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wansim_core::{Address, LinkSpec, SimTime, Topology};

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// TOML syntax or shape errors, with the parser's span info.
    Parse(toml::de::Error),
    /// Semantic validation failure, naming the offending field.
    Invalid { field: &'static str, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Invalid { field, message } => {
                write!(f, "invalid config field `{field}`: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub topology: TopologySection,
    pub roles: RolesSection,
    #[serde(default)]
    pub transport: TransportSection,
    pub migration: Option<MigrationSection>,
    pub accelerator: Option<AcceleratorSection>,
    pub power: Option<PowerSection>,
    pub sweep: Option<SweepSection>,
    /// Directory the config was loaded from; resolves relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub id: String,
    pub horizon_s: f64,
    pub transfer_size_bytes: u64,
    #[serde(default)]
    pub redundancy: f64,
    #[serde(default = "one")]
    pub compressibility: f64,
    /// Absent: the transfer starts once the post-migration path is settled.
    pub start_at_s: Option<f64>,
    #[serde(default)]
    pub normalize: NormalizeMode,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Baseline = the same run without the accelerator. Default; this is
    /// what the shipped table1 preset reports.
    #[default]
    NoAccelerator,
    /// Baseline = the same run without the migration.
    NoMigration,
    None,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub links: Vec<LinkCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkCfg {
    /// [node, iface]
    pub a: [u32; 2],
    pub b: [u32; 2],
    pub one_way_delay_ms: u64,
    pub rate_bits_per_s: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesSection {
    pub client: [u32; 2],
    pub server_pre: [u32; 2],
    pub server_post: Option<[u32; 2]>,
    pub proxy_near: Option<[u32; 2]>,
    pub proxy_far: Option<[u32; 2]>,
    /// Node hosting the VM before migration; defaults to server_pre's node.
    pub vm_host: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportSection {
    pub mss: u32,
    pub rwnd_bytes: u64,
    pub initial_cwnd_segments: u32,
}

impl Default for TransportSection {
    fn default() -> Self {
        TransportSection {
            mss: 1460,
            rwnd_bytes: 65_536,
            initial_cwnd_segments: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MigrationSection {
    pub start_s: f64,
    pub duration_s: f64,
    /// Default: announce at migration start.
    pub announce_lead_s: Option<f64>,
    #[serde(default)]
    pub notify_lag_ms: u64,
    #[serde(default)]
    pub downtime_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceleratorSection {
    pub rtt_threshold_ms: u64,
    pub hysteresis_ms: u64,
    pub wan_window_bytes: u64,
    pub wan_rate_cap_bits_per_s: Option<u64>,
    pub mode: AccelMode,
    pub chunk_size: u32,
}

impl Default for AcceleratorSection {
    fn default() -> Self {
        AcceleratorSection {
            rtt_threshold_ms: 100,
            hysteresis_ms: 20,
            wan_window_bytes: 1 << 20,
            wan_rate_cap_bits_per_s: None,
            mode: AccelMode::Optimizing,
            chunk_size: 8192,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelMode {
    Bypass,
    Optimizing,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    /// Path to a power profile file, relative to the config.
    pub profile: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Currently supported: "delay_ms" — total client→post-server one-way
    /// delay in milliseconds.
    pub axis: String,
    pub values: Vec<u64>,
}

impl ConfigFile {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<ConfigFile, ConfigError> {
        let mut cfg: ConfigFile = toml::from_str(text).map_err(ConfigError::Parse)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ConfigFile, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        ConfigFile::from_str(&text, &base)
    }

    pub fn addr(pair: [u32; 2]) -> Address {
        Address::new(pair[0], pair[1] as u16)
    }

    pub fn build_topology(&self) -> Result<Topology, ConfigError> {
        let specs: Vec<LinkSpec> = self
            .topology
            .links
            .iter()
            .map(|l| LinkSpec {
                a: Self::addr(l.a),
                b: Self::addr(l.b),
                one_way_delay: SimTime::from_millis(l.one_way_delay_ms),
                rate_bits_per_s: l.rate_bits_per_s,
            })
            .collect();
        Topology::build(&specs)
            .map_err(|e| invalid("topology.links", format!("{e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if s.id.is_empty() {
            return Err(invalid("scenario.id", "must be non-empty"));
        }
        if !(s.horizon_s > 0.0) {
            return Err(invalid("scenario.horizon_s", "must be positive"));
        }
        if s.transfer_size_bytes == 0 {
            return Err(invalid("scenario.transfer_size_bytes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&s.redundancy) {
            return Err(invalid("scenario.redundancy", "must lie in [0, 1]"));
        }
        if !(s.compressibility > 0.0 && s.compressibility <= 1.0) {
            return Err(invalid("scenario.compressibility", "must lie in (0, 1]"));
        }
        if let Some(t) = s.start_at_s {
            if !(t >= 0.0) {
                return Err(invalid("scenario.start_at_s", "must be non-negative"));
            }
        } else if self.migration.is_none() {
            return Err(invalid(
                "scenario.start_at_s",
                "required when no migration is configured (nothing to start after)",
            ));
        }
        if s.normalize == NormalizeMode::NoMigration && s.start_at_s.is_none() {
            return Err(invalid(
                "scenario.normalize",
                "no_migration baseline needs a fixed start_at_s",
            ));
        }

        if self.topology.links.is_empty() {
            return Err(invalid("topology.links", "at least one link required"));
        }
        if self.transport.mss == 0 {
            return Err(invalid("transport.mss", "must be positive"));
        }
        if self.transport.rwnd_bytes == 0 {
            return Err(invalid("transport.rwnd_bytes", "must be positive"));
        }
        if self.transport.initial_cwnd_segments == 0 {
            return Err(invalid("transport.initial_cwnd_segments", "must be positive"));
        }

        let topo = self.build_topology()?;
        let client = Self::addr(self.roles.client);
        let server_pre = Self::addr(self.roles.server_pre);
        topo.route(client, server_pre)
            .map_err(|e| invalid("roles.server_pre", format!("{e}")))?;

        if let Some(m) = &self.migration {
            if !(m.start_s >= 0.0) || !(m.duration_s >= 0.0) {
                return Err(invalid("migration", "times must be non-negative"));
            }
            if let Some(lead) = m.announce_lead_s {
                if lead > m.duration_s {
                    return Err(invalid(
                        "migration.announce_lead_s",
                        "cannot exceed duration_s",
                    ));
                }
            }
            let post = self
                .roles
                .server_post
                .ok_or_else(|| invalid("roles.server_post", "required with [migration]"))?;
            topo.route(client, Self::addr(post))
                .map_err(|e| invalid("roles.server_post", format!("{e}")))?;
        }

        if let Some(a) = &self.accelerator {
            if a.wan_window_bytes == 0 {
                return Err(invalid("accelerator.wan_window_bytes", "must be positive"));
            }
            if a.chunk_size == 0 {
                return Err(invalid("accelerator.chunk_size", "must be positive"));
            }
            if a.wan_rate_cap_bits_per_s == Some(0) {
                return Err(invalid(
                    "accelerator.wan_rate_cap_bits_per_s",
                    "must be positive when set",
                ));
            }
            let near = self
                .roles
                .proxy_near
                .ok_or_else(|| invalid("roles.proxy_near", "required with [accelerator]"))?;
            let far = self
                .roles
                .proxy_far
                .ok_or_else(|| invalid("roles.proxy_far", "required with [accelerator]"))?;
            // The pair must bracket the post-migration (or only) path.
            let target = self.roles.server_post.unwrap_or(self.roles.server_pre);
            let route = topo
                .route(client, Self::addr(target))
                .map_err(|e| invalid("roles.proxy_far", format!("{e}")))?;
            let mut nodes = vec![client.node.0];
            let mut from = client.node;
            for (link, _) in &route {
                let spec = topo.link(*link);
                let next = if spec.a.node == from { spec.b.node } else { spec.a.node };
                nodes.push(next.0);
                from = next;
            }
            let np = nodes.iter().position(|&n| n == near[0]);
            let fp = nodes.iter().position(|&n| n == far[0]);
            match (np, fp) {
                (Some(n), Some(f)) if n <= f => {}
                _ => {
                    return Err(invalid(
                        "roles.proxy_near",
                        "proxy nodes must lie on the client→server path, near before far",
                    ))
                }
            }
        }

        if let Some(sw) = &self.sweep {
            if sw.axis != "delay_ms" {
                return Err(invalid("sweep.axis", format!("unknown axis {:?}", sw.axis)));
            }
        }
        Ok(())
    }
}
