//! TOML run configuration.
//!
//! Top-level keys hold the grid, nonlinearity and time stepping; optional
//! tables `[initial]`, `[picard]`, `[order]`, `[gwp]` and `[output]` hold the
//! rest. `p`, `mu` and `lambda` take a scalar or a list (one entry per term).
//! Unknown keys and duplicate keys are rejected. See `README.md` for the
//! full key list.

use serde::{Deserialize, Deserializer, Serialize};

use crate::dynamics::Integrator;
use crate::error::{Error, Result};
use crate::experiments::{
    ConvergenceStudyConfig, FamilyKind, GwpStudyConfig, InitialData, MollifierKind, OrderReference,
    OrderStudyConfig, PicardStudyConfig, TermParams,
};
use crate::spectral::{critical_exponent, Grid};

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn default_family() -> FamilyKind {
    FamilyKind::V1
}
fn default_mollifier() -> MollifierKind {
    MollifierKind::BoxAveraged
}
fn default_n() -> u32 {
    2
}
fn default_n_values() -> Vec<u32> {
    vec![2, 4, 8, 16]
}
fn default_mu() -> Vec<i64> {
    vec![1]
}
fn default_lambda() -> Vec<f64> {
    vec![1.0]
}
fn default_integrator() -> Integrator {
    Integrator::Strang
}
fn default_dt() -> f64 {
    1e-3
}
fn default_one() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_initial() -> InitialData {
    InitialData::PlaneWave {
        amplitude: 1.0,
        k: [1, 0, 0],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_n_quad() -> usize {
    64
}
fn default_iterations() -> usize {
    6
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            n_quad: default_n_quad(),
            iterations: default_iterations(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSection {
    /// Empty means `[8 dt, 4 dt, 2 dt, dt]`.
    #[serde(default)]
    pub dt_list: Vec<f64>,
    #[serde(default = "default_reference")]
    pub reference: OrderReference,
}

fn default_reference() -> OrderReference {
    OrderReference::Auto
}

impl Default for OrderSection {
    fn default() -> Self {
        OrderSection {
            dt_list: Vec::new(),
            reference: default_reference(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwpSection {
    /// Signed cubic coupling.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    /// Cubic two-body factor; the quintic one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic_mollifier: Option<MollifierKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic_n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_h1: Option<f64>,
}

fn default_lambda2() -> f64 {
    1.0
}

impl Default for GwpSection {
    fn default() -> Self {
        GwpSection {
            lambda: 0.0,
            lambda2: default_lambda2(),
            cubic_mollifier: None,
            cubic_n: None,
            initial_h1: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_report")]
    pub report: String,
    /// `HRT3` snapshot file; not written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<String>,
}

fn default_csv() -> String {
    "trajectory.csv".into()
}
fn default_report() -> String {
    "report.json".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: default_csv(),
            report: default_report(),
            snapshots: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "M")]
    pub modes: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub p: Vec<u32>,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    #[serde(default = "default_mollifier")]
    pub mollifier: MollifierKind,
    #[serde(default = "default_n")]
    pub n: u32,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<u32>,
    #[serde(default = "default_mu", deserialize_with = "one_or_many")]
    pub mu: Vec<i64>,
    #[serde(default = "default_lambda", deserialize_with = "one_or_many")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_one")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default)]
    pub seed: u64,
    /// `s_c` of the highest order when absent.
    #[serde(default)]
    pub sobolev_index: Option<f64>,
    #[serde(default = "default_true")]
    pub delta_proxy: bool,
    /// Rescale the initial data to this `H^s` norm (`s` = `sobolev_index`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_norm: Option<f64>,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub order: OrderSection,
    #[serde(default)]
    pub gwp: GwpSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parses, resolves defaults and validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let path = e.span().map(|s| key_path_at(text, s.start)).unwrap_or_else(|| "<root>".into());
        Error::config(path, message)
    })?;
    raw.resolve()
}

/// Dotted key path of the entry containing byte `offset`, e.g. `picard.n_quad`.
fn key_path_at(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[line_start..].find('\n').map_or(text.len(), |i| line_start + i);
    let line = &text[line_start..line_end];
    let table = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && !l.starts_with("[["))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let key = line.split_once('=').map(|(k, _)| k.trim().to_string());
    match (table, key) {
        (Some(t), Some(k)) => format!("{t}.{k}"),
        (None, Some(k)) => k,
        (Some(t), None) => t,
        (None, None) => format!("line {}", before.lines().count().max(1)),
    }
}

impl RunConfig {
    /// Broadcasts `mu`/`lambda`, fills derived defaults and validates.
    pub fn resolve(mut self) -> Result<RunConfig> {
        if Grid::new(self.modes).is_err() {
            return Err(Error::config(
                "M",
                format!("must be a power of two >= 4, got {}", self.modes),
            ));
        }
        let terms = self.p.len();
        if terms == 0 || terms > 2 {
            return Err(Error::config("p", "give one order or two orders [p1, p2]"));
        }
        if self.p.contains(&0) {
            return Err(Error::config("p", "orders must be >= 1"));
        }
        if terms == 2 && self.p[1] <= self.p[0] {
            return Err(Error::config("p", "mixed orders need p2 > p1"));
        }
        for (key, len) in [("mu", self.mu.len()), ("lambda", self.lambda.len())] {
            if len != 1 && len != terms {
                return Err(Error::config(key, format!("expected 1 or {terms} entries")));
            }
        }
        if self.mu.len() == 1 {
            self.mu = vec![self.mu[0]; terms];
        }
        if self.lambda.len() == 1 {
            self.lambda = vec![self.lambda[0]; terms];
        }
        if self.mu.iter().any(|&m| m != 1 && m != -1) {
            return Err(Error::config("mu", "signs must be +1 or -1"));
        }
        if self.lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::config("lambda", "couplings must be finite"));
        }
        if self.family == FamilyKind::V2 && self.p.iter().any(|&p| p < 2) {
            return Err(Error::config("family", "v2 needs p >= 2"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::config("T", "must be finite and >= 0"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt", "must be positive"));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::config("dt", "must not exceed T"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::config("snapshot_stride", "must be >= 1"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be >= 1"));
        }
        if self.n_values.is_empty() || self.n_values.windows(2).any(|w| w[0] >= w[1]) || self.n_values[0] == 0 {
            return Err(Error::config("n_values", "must be a non-empty, strictly increasing list of positive integers"));
        }
        if self.sobolev_index.is_none() {
            self.sobolev_index = Some(critical_exponent(*self.p.iter().max().expect("non-empty"))?);
        }
        if let Some(v) = self.initial_norm {
            if !(v > 0.0) {
                return Err(Error::config("initial_norm", "must be positive"));
            }
        }
        if self.picard.n_quad < 8 {
            return Err(Error::config("picard.n_quad", "must be >= 8"));
        }
        if self.picard.iterations < 2 {
            return Err(Error::config("picard.iterations", "must be >= 2"));
        }
        if self.order.dt_list.is_empty() {
            self.order.dt_list = vec![8.0 * self.dt, 4.0 * self.dt, 2.0 * self.dt, self.dt];
        }
        if self.order.dt_list.len() < 4
            || self
                .order
                .dt_list
                .windows(2)
                .any(|w| ((w[1] - 0.5 * w[0]) / w[0]).abs() > 1e-12)
        {
            return Err(Error::config("order.dt_list", "must be a halving sequence of length >= 4"));
        }
        if !(self.gwp.lambda2 > 0.0) {
            return Err(Error::config("gwp.lambda2", "must be positive"));
        }
        if self.gwp.cubic_n.is_some() != self.gwp.cubic_mollifier.is_some() {
            return Err(Error::config("gwp.cubic_n", "give cubic_mollifier and cubic_n together"));
        }
        let grid = Grid::new(self.modes)?;
        self.initial
            .build(&grid, self.seed)
            .map_err(|e| Error::config("initial", e.to_string()))?;
        Ok(self)
    }

    /// The resolved configuration as TOML; parses back to an equal value.
    pub fn echo(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn sobolev(&self) -> f64 {
        self.sobolev_index.unwrap_or(1.0)
    }

    pub fn terms(&self) -> Vec<TermParams> {
        self.terms_with(self.family)
    }

    pub fn terms_with(&self, family: FamilyKind) -> Vec<TermParams> {
        self.p
            .iter()
            .zip(&self.mu)
            .zip(&self.lambda)
            .map(|((&p, &mu), &coupling)| TermParams {
                family,
                p,
                mu,
                coupling,
            })
            .collect()
    }

    pub fn convergence(&self) -> ConvergenceStudyConfig {
        let family = match self.family {
            FamilyKind::Local => FamilyKind::V1,
            f => f,
        };
        ConvergenceStudyConfig {
            modes: self.modes,
            initial: self.initial.clone(),
            seed: self.seed,
            terms: self.terms_with(family),
            mollifier: self.mollifier,
            n_values: self.n_values.clone(),
            t_final: self.t_final,
            dt: self.dt,
            integrator: self.integrator,
            record_stride: self.snapshot_stride,
            sobolev_index: self.sobolev_index,
            delta_proxy: self.delta_proxy,
            dealias: self.dealias,
        }
    }

    pub fn order(&self) -> OrderStudyConfig {
        OrderStudyConfig {
            modes: self.modes,
            initial: self.initial.clone(),
            seed: self.seed,
            terms: self.terms(),
            mollifier: self.mollifier,
            n: self.n,
            t_final: self.t_final,
            integrator: self.integrator,
            dt_list: self.order.dt_list.clone(),
            reference: self.order.reference,
            dealias: self.dealias,
        }
    }

    pub fn picard(&self) -> PicardStudyConfig {
        PicardStudyConfig {
            modes: self.modes,
            initial: self.initial.clone(),
            seed: self.seed,
            initial_norm: self.initial_norm,
            terms: self.terms(),
            mollifier: self.mollifier,
            n: self.n,
            t_final: self.t_final,
            n_quad: self.picard.n_quad,
            iterations: self.picard.iterations,
            sobolev_index: self.sobolev_index,
            dealias: self.dealias,
        }
    }

    pub fn gwp(&self) -> GwpStudyConfig {
        GwpStudyConfig {
            modes: self.modes,
            initial: self.initial.clone(),
            seed: self.seed,
            initial_h1: self.gwp.initial_h1,
            lambda: self.gwp.lambda,
            lambda2: self.gwp.lambda2,
            mollifier: self.mollifier,
            n: self.n,
            cubic_mollifier: self.gwp.cubic_mollifier.zip(self.gwp.cubic_n),
            t_final: self.t_final,
            dt: self.dt,
            integrator: self.integrator,
            record_stride: self.snapshot_stride,
            dealias: self.dealias,
        }
    }
}
