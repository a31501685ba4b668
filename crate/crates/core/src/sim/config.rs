use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::dynamics::Graph;
use crate::encode::ConfidenceMode;
use crate::mtl::{parse, Formula, Halfspace, Predicate, PredicateTable};
use crate::privacy::PrivacyParams;
use crate::rhc::ObjectiveMode;

/// A scalar applied everywhere or one value per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn expand(&self, len: usize, path: &str) -> Result<Vec<f64>, SimError> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; len]),
            OneOrMany::Many(v) if v.len() == len => Ok(v.clone()),
            OneOrMany::Many(v) => Err(SimError::invalid(path, format!("expected {len} entries, got {}", v.len()))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialZeta {
    /// Own row holds the own initial state, other rows are zero.
    #[default]
    OwnRow,
    /// Every row holds the corresponding agent's initial state.
    AllRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub a: OneOrMany,
    pub b: OneOrMany,
    pub c: OneOrMany,
    pub u_min: f64,
    pub u_max: f64,
}

/// Either explicit per-agent parameters or ranges spread evenly over the
/// agents (agent 1 gets the lower end, agent N the upper end).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrivacyConfig {
    PerAgent(Vec<PrivacyParams>),
    Ranges {
        epsilon_range: [f64; 2],
        delta_range: [f64; 2],
        nu: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Initial covariance `Σ₀ = sigma0 · I`; defaults to `s_max`.
    #[serde(default)]
    pub sigma0: Option<f64>,
    /// Diagonal of `W`; defaults to the calibrated noise variances.
    #[serde(default)]
    pub w: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default = "one")]
    pub l1: f64,
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default)]
    pub zeta_max: Option<f64>,
    #[serde(default = "one")]
    pub s_max: f64,
    /// Defaults to the largest calibrated noise variance.
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default)]
    pub multiplicative: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            l1: 1.0,
            l2: 1.0,
            zeta_max: None,
            s_max: 1.0,
            v_max: None,
            multiplicative: false,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceConfig {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// A named region: a box or an intersection of halfspaces `n·x <= offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateConfig {
    pub name: String,
    #[serde(default, rename = "box")]
    pub bounds: Option<BoxRegion>,
    #[serde(default)]
    pub halfspaces: Option<Vec<HalfspaceConfig>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub agents: usize,
    pub dims: usize,
    /// Undirected edges between 1-based agent ids.
    pub edges: Vec<(usize, usize)>,
    pub dynamics: DynamicsConfig,
    pub initial_states: Vec<Vec<f64>>,
    #[serde(default)]
    pub initial_zeta: InitialZeta,
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    #[serde(default)]
    pub error_bound: BoundConfig,
    pub predicates: Vec<PredicateConfig>,
    pub phi_system: String,
    pub phi_agents: Vec<String>,
    pub r_min: OneOrMany,
    pub gamma_min: OneOrMany,
    #[serde(default = "default_big_m")]
    pub big_m: f64,
    pub tau: usize,
    /// Defaults to the largest specification horizon.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub confidence_mode: ConfidenceMode,
    #[serde(default)]
    pub objective: ObjectiveMode,
    /// Local-search rounds applied to the neighbour-uniform gossip
    /// probabilities.
    #[serde(default)]
    pub gossip_refine_rounds: usize,
}

fn default_big_m() -> f64 {
    1000.0
}

fn default_runs() -> usize {
    1
}

/// Parsed pieces of a validated scenario.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub graph: Graph,
    pub preds: PredicateTable,
    pub phi_system: Formula,
    pub phi_agents: Vec<Formula>,
    pub horizon: usize,
    pub privacy: Vec<PrivacyParams>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SimError::invalid(&path, e.into_inner().to_string())
        })?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Checks every cross-field rule and parses the formulas.
    pub fn resolve(&self) -> Result<Resolved, SimError> {
        let n = self.agents;
        let d = self.dims;
        if n == 0 {
            return Err(SimError::invalid("agents", "need at least one agent"));
        }
        if d == 0 {
            return Err(SimError::invalid("dims", "need at least one dimension"));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (k, &(a, b)) in self.edges.iter().enumerate() {
            for v in [a, b] {
                if v == 0 || v > n {
                    return Err(SimError::invalid(&format!("edges[{k}]"), format!("agent {v} outside 1..={n}")));
                }
            }
            if a == b {
                return Err(SimError::invalid(&format!("edges[{k}]"), "self loop"));
            }
            edges.push((a - 1, b - 1));
        }
        let graph = Graph::new(n, &edges).map_err(|e| SimError::invalid("edges", e.to_string()))?;
        if n > 1 && !graph.is_connected() {
            return Err(SimError::invalid("edges", "graph is disconnected"));
        }
        for (name, v) in [("dynamics.a", &self.dynamics.a), ("dynamics.b", &self.dynamics.b), ("dynamics.c", &self.dynamics.c)] {
            v.expand(n, name)?;
        }
        if !(self.dynamics.u_min <= self.dynamics.u_max) {
            return Err(SimError::invalid("dynamics", "u_min exceeds u_max"));
        }
        if self.initial_states.len() != n {
            return Err(SimError::invalid("initial_states", format!("expected {n} rows")));
        }
        for (i, r) in self.initial_states.iter().enumerate() {
            if r.len() != d {
                return Err(SimError::invalid(&format!("initial_states[{i}]"), format!("expected {d} values")));
            }
        }
        let privacy = self.privacy_params()?;
        if let Some(f) = &self.filter {
            if let Some(s) = f.sigma0 {
                if !(s > 0.0) {
                    return Err(SimError::invalid("filter.sigma0", "must be positive"));
                }
            }
            if let Some(w) = &f.w {
                if w.len() != n || w.iter().any(|x| !(*x >= 0.0)) {
                    return Err(SimError::invalid("filter.w", format!("need {n} non-negative entries")));
                }
            }
        }
        let b = &self.error_bound;
        for (name, v) in [("error_bound.l1", b.l1), ("error_bound.l2", b.l2), ("error_bound.s_max", b.s_max)] {
            if !(v >= 0.0) {
                return Err(SimError::invalid(name, "must be non-negative"));
            }
        }
        if b.s_max == 0.0 {
            return Err(SimError::invalid("error_bound.s_max", "must be positive"));
        }

        let mut preds = PredicateTable::new();
        for (k, p) in self.predicates.iter().enumerate() {
            let path = format!("predicates[{k}]");
            if preds.contains(&p.name) {
                return Err(SimError::invalid(&path, format!("duplicate predicate {}", p.name)));
            }
            let pred = match (&p.bounds, &p.halfspaces) {
                (Some(bx), None) => Predicate::boxed(p.name.clone(), &bx.lo, &bx.hi),
                (None, Some(hs)) => Predicate::new(
                    p.name.clone(),
                    hs.iter()
                        .map(|h| Halfspace {
                            normal: h.normal.clone(),
                            offset: h.offset,
                        })
                        .collect(),
                ),
                _ => return Err(SimError::invalid(&path, "give exactly one of box or halfspaces")),
            }
            .map_err(|e| SimError::invalid(&path, e.to_string()))?;
            if pred.dim() != d {
                return Err(SimError::invalid(&path, format!("predicate has {} dimensions, scenario has {d}", pred.dim())));
            }
            preds.insert(pred);
        }
        let phi_system = parse(&self.phi_system, &preds).map_err(|e| SimError::invalid("phi_system", e.to_string()))?;
        if self.phi_agents.len() != n {
            return Err(SimError::invalid("phi_agents", format!("expected {n} formulas")));
        }
        let phi_agents = self
            .phi_agents
            .iter()
            .enumerate()
            .map(|(i, s)| parse(s, &preds).map_err(|e| SimError::invalid(&format!("phi_agents[{i}]"), e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let spec_h = phi_agents.iter().map(|f| f.horizon()).fold(phi_system.horizon(), usize::max);
        let horizon = self.horizon.unwrap_or(spec_h).max(1);
        self.r_min.expand(horizon, "r_min")?;
        self.gamma_min.expand(horizon, "gamma_min")?;
        if self.tau <= horizon {
            return Err(SimError::invalid("tau", format!("must exceed the horizon {horizon}")));
        }
        if self.runs == 0 {
            return Err(SimError::invalid("runs", "need at least one run"));
        }
        if !(self.big_m > 0.0) {
            return Err(SimError::invalid("big_m", "must be positive"));
        }
        Ok(Resolved {
            graph,
            preds,
            phi_system,
            phi_agents,
            horizon,
            privacy,
        })
    }

    fn privacy_params(&self) -> Result<Vec<PrivacyParams>, SimError> {
        let n = self.agents;
        let params = match &self.privacy {
            PrivacyConfig::PerAgent(v) => {
                if v.len() != n {
                    return Err(SimError::invalid("privacy", format!("expected {n} entries")));
                }
                v.clone()
            }
            PrivacyConfig::Ranges {
                epsilon_range: [e0, e1],
                delta_range: [d0, d1],
                nu,
            } => (0..n)
                .map(|i| {
                    let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                    PrivacyParams {
                        epsilon: e0 + s * (e1 - e0),
                        delta: d0 + s * (d1 - d0),
                        nu: *nu,
                    }
                })
                .collect(),
        };
        for (i, p) in params.iter().enumerate() {
            p.validate().map_err(|e| SimError::invalid(&format!("privacy[{i}]"), e.to_string()))?;
        }
        Ok(params)
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    ScenarioConfig::from_json(&text)
}
