//! Experiment configuration: a TOML tree with a `schema_version` key.
//!
//! Unknown keys are rejected, so a typo fails validation instead of being
//! silently ignored.

use std::fmt;

use agsp_core::agsp_cheby::XiMode;
use agsp_core::hamlib::{Bipartition, ModelSpec};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(key: &str, msg: impl fmt::Display) -> SchemaError {
    SchemaError(format!("`{key}`: {msg}"))
}

/// A scalar or a list of scalars.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub run: RunSection,
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub partition: PartitionSection,
    pub state: Option<StateSection>,
    #[serde(default)]
    pub construction: ConstructionSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub caps: Option<CapsSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Tables computed by `run`; defaults to every table whose sections exist.
    pub tables: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub n: Option<usize>,
    pub dims: Option<Vec<usize>>,
    /// Lattice dimension: `n` sites on a `D`-dimensional hypercube.
    #[serde(rename = "D")]
    pub lattice_dim: Option<u32>,
    pub j: Option<f64>,
    pub g: Option<f64>,
    pub periodic: Option<bool>,
    pub rank: Option<usize>,
    pub seed: Option<u64>,
    pub amplitudes: Option<[f64; 2]>,
    pub pair_offset: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    /// `"half"` (default) or `"prefix:<k>"`.
    pub cut: Option<String>,
    pub side_a: Option<Vec<usize>>,
    pub width: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    /// `ground` (default), `max_entangled` or `paired`.
    pub kind: Option<String>,
    pub p: Option<u64>,
    pub k: Option<usize>,
    pub amplitudes: Option<[f64; 2]>,
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionSection {
    pub chebyshev: Option<ChebyshevSection>,
    pub qpe: Option<QpeSection>,
    pub protocol: Option<ProtocolSection>,
    pub compression: Option<CompressionSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChebyshevSection {
    pub q: OneOrMany<usize>,
    /// `auto`, `ff`, `formula`, `bisection` or `fixed`.
    pub truncation: Option<String>,
    pub epsilon: Option<f64>,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpeSection {
    pub f: u32,
    pub k: OneOrMany<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// Expander degree.
    pub d: usize,
    #[serde(rename = "delta")]
    pub delta: f64,
    /// Largest acceptable measured expander error.
    pub epsilon: Option<f64>,
    /// Phase-register qubits.
    pub f: u32,
    /// Expander register dimension.
    pub p: Option<usize>,
    /// `ground` (default), `first_excited` or `random`.
    pub input: Option<OneOrMany<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionSection {
    pub delta: OneOrMany<f64>,
    pub d: Option<usize>,
    pub p: Option<usize>,
    pub max_q: Option<usize>,
    pub factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Boundary sizes: pair counts or ladder rungs.
    pub boundary: Vec<usize>,
    pub deltas: Option<Vec<f64>>,
    pub cheby_delta: Option<f64>,
    pub qpe_delta: Option<f64>,
    pub max_q: Option<usize>,
    pub qpe_bits: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_dir(), formats: default_formats() }
    }
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<String> {
    vec!["csv".into()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsSection {
    pub state_qubits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableKind {
    Spectrum,
    Spread,
    Chebyshev,
    Qpe,
    Protocol,
    Compress,
    VerifyBounds,
    Scaling,
}

impl TableKind {
    pub const ALL: [TableKind; 8] = [
        TableKind::Spectrum,
        TableKind::Spread,
        TableKind::Chebyshev,
        TableKind::Qpe,
        TableKind::Protocol,
        TableKind::Compress,
        TableKind::VerifyBounds,
        TableKind::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableKind::Spectrum => "spectrum",
            TableKind::Spread => "spread",
            TableKind::Chebyshev => "agsp_cheby",
            TableKind::Qpe => "agsp_qpe",
            TableKind::Protocol => "protocol",
            TableKind::Compress => "compress",
            TableKind::VerifyBounds => "verify_bounds",
            TableKind::Scaling => "scaling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TableKind::ALL.into_iter().find(|t| t.name() == s || t.name().replace('_', "-") == s)
    }
}

pub fn parse(text: &str) -> Result<Config, SchemaError> {
    let cfg: Config = toml::from_str(text).map_err(|e| SchemaError(e.to_string().trim_end().to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(bad("schema_version", format!("expected {SCHEMA_VERSION}, found {}", cfg.schema_version)));
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    FrustrationFree,
    Frustrated(XiMode),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Ground,
    MaxEntangled(u64),
    Paired { k: usize, amplitudes: (f64, f64) },
}

impl Config {
    /// Tables requested by `run`.
    pub fn requested_tables(&self) -> Result<Vec<TableKind>, SchemaError> {
        if let Some(names) = &self.run.tables {
            let mut out = Vec::new();
            for n in names {
                let t = TableKind::parse(n).ok_or_else(|| bad("run.tables", format!("unknown table `{n}`")))?;
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            out.sort();
            return Ok(out);
        }
        let c = &self.construction;
        let mut out = Vec::new();
        if self.model.is_some() && self.sweep.is_none() {
            out.push(TableKind::Spectrum);
        }
        if self.state.is_some() {
            out.push(TableKind::Spread);
        }
        if c.chebyshev.is_some() {
            out.push(TableKind::Chebyshev);
        }
        if c.qpe.is_some() {
            out.push(TableKind::Qpe);
        }
        if c.protocol.is_some() {
            out.push(TableKind::Protocol);
        }
        if c.compression.is_some() {
            out.push(TableKind::Compress);
        }
        if self.sweep.is_some() {
            out.push(TableKind::Scaling);
        }
        Ok(out)
    }

    /// Checks every section the given tables read, before any computation.
    pub fn validate(&self, tables: &[TableKind]) -> Result<(), SchemaError> {
        for f in &self.output.formats {
            if f != "csv" && f != "plot" {
                return Err(bad("output.formats", format!("unknown format `{f}` (csv, plot)")));
            }
        }
        if self.output.directory.is_empty() {
            return Err(bad("output.directory", "must not be empty"));
        }
        if let Some(c) = &self.caps {
            if !(1..=20).contains(&c.state_qubits) {
                return Err(bad("caps.state_qubits", "must lie in 1..=20"));
            }
        }
        for &t in tables {
            match t {
                TableKind::Spectrum => {
                    self.model_spec()?;
                    self.cut()?;
                }
                TableKind::Spread => {
                    if self.state_kind()? == StateKind::Ground {
                        self.model_spec()?;
                        self.cut()?;
                    }
                    self.spread_deltas()?;
                }
                TableKind::Chebyshev => {
                    self.model_spec()?;
                    self.cut()?;
                    self.chebyshev()?;
                }
                TableKind::Qpe => {
                    self.model_spec()?;
                    self.cut()?;
                    self.qpe()?;
                }
                TableKind::Protocol => {
                    self.model_spec()?;
                    self.cut()?;
                    self.protocol()?;
                }
                TableKind::Compress => {
                    self.model_spec()?;
                    self.cut()?;
                    self.compression()?;
                }
                TableKind::VerifyBounds => {
                    self.model_spec()?;
                    self.cut()?;
                    let c = &self.construction;
                    if c.chebyshev.is_none() && c.qpe.is_none() && c.protocol.is_none() && c.compression.is_none() {
                        return Err(bad("construction", "verify-bounds needs at least one construction"));
                    }
                    if c.chebyshev.is_some() {
                        self.chebyshev()?;
                    }
                    if c.qpe.is_some() {
                        self.qpe()?;
                    }
                    if c.protocol.is_some() {
                        self.protocol()?;
                    }
                    if c.compression.is_some() {
                        self.compression()?;
                    }
                }
                TableKind::Scaling => {
                    self.sweep_family()?;
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSection, SchemaError> {
        self.model.as_ref().ok_or_else(|| bad("model", "missing section (needs at least `model.name`)"))
    }

    fn lattice(&self) -> Result<Vec<usize>, SchemaError> {
        let m = self.model()?;
        if let Some(d) = &m.dims {
            if m.n.is_some() || m.lattice_dim.is_some() {
                return Err(bad("model.dims", "give either `dims` or `n` (with optional `D`), not both"));
            }
            if d.is_empty() || d.contains(&0) {
                return Err(bad("model.dims", "entries must be positive"));
            }
            return Ok(d.clone());
        }
        let n = m.n.ok_or_else(|| bad("model.n", "required (or give `model.dims`)"))?;
        if n == 0 {
            return Err(bad("model.n", "must be positive"));
        }
        let dim = m.lattice_dim.unwrap_or(1);
        if dim == 0 {
            return Err(bad("model.D", "must be positive"));
        }
        let side = (n as f64).powf(1.0 / dim as f64).round() as usize;
        if side.pow(dim) != n {
            return Err(bad("model.D", format!("n = {n} is not a perfect {dim}-th power")));
        }
        Ok(vec![side; dim as usize])
    }

    fn model_seed(&self) -> u64 {
        self.model.as_ref().and_then(|m| m.seed).unwrap_or(self.seed)
    }

    pub fn model_spec(&self) -> Result<ModelSpec, SchemaError> {
        let m = self.model()?;
        let dims = self.lattice()?;
        let chain = |key: &str| -> Result<usize, SchemaError> {
            if dims.len() != 1 {
                return Err(bad(key, "this model is a chain; give `model.n`"));
            }
            Ok(dims[0])
        };
        let forbid = |key: &str, present: bool| if present { Err(bad(key, format!("not used by model `{}`", m.name))) } else { Ok(()) };
        let spec = match m.name.as_str() {
            "all_zeros" => {
                forbid("model.g", m.g.is_some())?;
                ModelSpec::AllZeros { n: chain("model.n")? }
            }
            "tfim" => ModelSpec::Tfim {
                dims,
                j: m.j.unwrap_or(1.0),
                g: m.g.ok_or_else(|| bad("model.g", "required for tfim"))?,
                periodic: m.periodic.unwrap_or(false),
            },
            "heisenberg" => {
                forbid("model.g", m.g.is_some())?;
                ModelSpec::Heisenberg { dims, j: m.j.unwrap_or(1.0), periodic: m.periodic.unwrap_or(false) }
            }
            "ff_chain" => ModelSpec::FfChain { n: chain("model.n")?, rank: m.rank.unwrap_or(2), seed: self.model_seed() },
            "paired_product" => {
                let a = m.amplitudes.unwrap_or([(2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()]);
                ModelSpec::PairedProduct { dims, amplitudes: (a[0], a[1]), pair_offset: m.pair_offset.unwrap_or(0) }
            }
            other => {
                return Err(bad("model.name", format!("unknown model `{other}` (all_zeros, tfim, heisenberg, ff_chain, paired_product)")));
            }
        };
        if let ModelSpec::Tfim { g, j, .. } = &spec {
            if !g.is_finite() || !j.is_finite() {
                return Err(bad("model.g", "couplings must be finite"));
            }
        }
        Ok(spec)
    }

    pub fn n_sites(&self) -> Result<usize, SchemaError> {
        Ok(self.lattice()?.iter().product())
    }

    pub fn cut(&self) -> Result<Bipartition, SchemaError> {
        let n = self.n_sites()?;
        let p = &self.partition;
        let width = p.width.unwrap_or(1);
        if width == 0 {
            return Err(bad("partition.width", "must be at least 1"));
        }
        let wrap = |key: &str, r: agsp_core::Result<Bipartition>| r.map_err(|e| bad(key, e));
        if let Some(a) = &p.side_a {
            if p.cut.is_some() {
                return Err(bad("partition.side_a", "give either `cut` or `side_a`, not both"));
            }
            return wrap("partition.side_a", Bipartition::new(a, n, width));
        }
        let name = p.cut.as_deref().unwrap_or("half");
        if n < 2 {
            return Err(bad("partition.cut", "needs at least two sites"));
        }
        let cut = if name == "half" {
            Bipartition::half(n)
        } else if let Some(k) = name.strip_prefix("prefix:") {
            let k: usize = k.parse().map_err(|_| bad("partition.cut", format!("bad prefix length in `{name}`")))?;
            if k == 0 || k >= n {
                return Err(bad("partition.cut", format!("prefix length must lie in 1..{n}")));
            }
            Bipartition::prefix(k, n)
        } else {
            return Err(bad("partition.cut", format!("unknown cut `{name}` (half, prefix:<k>)")));
        };
        Ok(cut.with_width(width))
    }

    pub fn state_kind(&self) -> Result<StateKind, SchemaError> {
        let Some(s) = &self.state else { return Ok(StateKind::Ground) };
        match s.kind.as_deref().unwrap_or("ground") {
            "ground" => Ok(StateKind::Ground),
            "max_entangled" => {
                let p = s.p.ok_or_else(|| bad("state.p", "required for max_entangled"))?;
                if p == 0 {
                    return Err(bad("state.p", "must be positive"));
                }
                Ok(StateKind::MaxEntangled(p))
            }
            "paired" => {
                let k = s.k.ok_or_else(|| bad("state.k", "required for paired"))?;
                if k == 0 || k > 24 {
                    return Err(bad("state.k", "must lie in 1..=24"));
                }
                let a = s.amplitudes.unwrap_or([(2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()]);
                Ok(StateKind::Paired { k, amplitudes: (a[0], a[1]) })
            }
            other => Err(bad("state.kind", format!("unknown state `{other}` (ground, max_entangled, paired)"))),
        }
    }

    pub fn spread_deltas(&self) -> Result<Vec<f64>, SchemaError> {
        let d = self.state.as_ref().and_then(|s| s.deltas.clone()).unwrap_or_else(|| vec![0.0, 0.1]);
        check_unit("state.deltas", &d, true)?;
        Ok(d)
    }

    pub fn chebyshev(&self) -> Result<(Vec<usize>, Truncation), SchemaError> {
        let c = self.construction.chebyshev.as_ref().ok_or_else(|| bad("construction.chebyshev", "missing section"))?;
        let qs = c.q.to_vec();
        if qs.is_empty() || qs.iter().any(|&q| q == 0 || q > 200) {
            return Err(bad("construction.chebyshev.q", "degrees must lie in 1..=200"));
        }
        let eps = c.epsilon.unwrap_or(0.01);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(bad("construction.chebyshev.epsilon", "must lie in (0, 1)"));
        }
        let ff_model = matches!(self.model_spec()?, ModelSpec::FfChain { .. } | ModelSpec::AllZeros { .. } | ModelSpec::PairedProduct { .. });
        let mode = match c.truncation.as_deref().unwrap_or("auto") {
            "auto" if ff_model => Truncation::FrustrationFree,
            "auto" | "formula" => Truncation::Frustrated(XiMode::Formula),
            "ff" => Truncation::FrustrationFree,
            "bisection" => Truncation::Frustrated(XiMode::Bisection { tol: 1e-3 }),
            "fixed" => Truncation::Frustrated(XiMode::Fixed(c.xi.ok_or_else(|| bad("construction.chebyshev.xi", "required for fixed truncation"))?)),
            other => return Err(bad("construction.chebyshev.truncation", format!("unknown mode `{other}` (auto, ff, formula, bisection, fixed)"))),
        };
        if c.xi.is_some() && c.truncation.as_deref() != Some("fixed") {
            return Err(bad("construction.chebyshev.xi", "only used with truncation = \"fixed\""));
        }
        Ok((qs, mode))
    }

    pub fn chebyshev_epsilon(&self) -> f64 {
        self.construction.chebyshev.as_ref().and_then(|c| c.epsilon).unwrap_or(0.01)
    }

    pub fn qpe(&self) -> Result<(u32, Vec<u32>), SchemaError> {
        let c = self.construction.qpe.as_ref().ok_or_else(|| bad("construction.qpe", "missing section"))?;
        if !(1..=12).contains(&c.f) {
            return Err(bad("construction.qpe.f", "must lie in 1..=12"));
        }
        let ks = c.k.to_vec();
        if ks.is_empty() || ks.iter().any(|&k| k == 0 || k > 64) {
            return Err(bad("construction.qpe.k", "repetitions must lie in 1..=64"));
        }
        Ok((c.f, ks))
    }

    pub fn protocol(&self) -> Result<(&ProtocolSection, Vec<String>), SchemaError> {
        let c = self.construction.protocol.as_ref().ok_or_else(|| bad("construction.protocol", "missing section"))?;
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(bad("construction.protocol.delta", "must lie in (0, 1)"));
        }
        if c.d == 0 {
            return Err(bad("construction.protocol.d", "must be positive"));
        }
        if c.p == Some(0) {
            return Err(bad("construction.protocol.p", "must be positive"));
        }
        if !(1..=10).contains(&c.f) {
            return Err(bad("construction.protocol.f", "must lie in 1..=10"));
        }
        if let Some(e) = c.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(bad("construction.protocol.epsilon", "must lie in (0, 1)"));
            }
        }
        let inputs = c.input.as_ref().map(|i| i.to_vec()).unwrap_or_else(|| vec!["ground".into()]);
        for i in &inputs {
            if !["ground", "first_excited", "random"].contains(&i.as_str()) {
                return Err(bad("construction.protocol.input", format!("unknown input `{i}` (ground, first_excited, random)")));
            }
        }
        Ok((c, inputs))
    }

    pub fn compression(&self) -> Result<&CompressionSection, SchemaError> {
        let c = self.construction.compression.as_ref().ok_or_else(|| bad("construction.compression", "missing section"))?;
        let d = c.delta.to_vec();
        if d.is_empty() {
            return Err(bad("construction.compression.delta", "needs at least one value"));
        }
        check_unit("construction.compression.delta", &d, false)?;
        if c.d == Some(0) || c.p == Some(0) {
            return Err(bad("construction.compression", "`d` and `p` must be positive"));
        }
        if let Some(f) = &c.factors {
            if f.len() < 2 || f.iter().any(|&x| !(x >= 1.0) || !x.is_finite()) {
                return Err(bad("construction.compression.factors", "need at least two finite values ≥ 1"));
            }
        }
        Ok(c)
    }

    pub fn sweep(&self) -> Result<&SweepSection, SchemaError> {
        let s = self.sweep.as_ref().ok_or_else(|| bad("sweep", "missing section"))?;
        if s.boundary.is_empty() || s.boundary.contains(&0) {
            return Err(bad("sweep.boundary", "needs positive boundary sizes"));
        }
        if let Some(d) = &s.deltas {
            check_unit("sweep.deltas", d, true)?;
        }
        for (key, v) in [("sweep.cheby_delta", s.cheby_delta), ("sweep.qpe_delta", s.qpe_delta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(bad(key, "must lie in (0, 1)"));
                }
            }
        }
        Ok(s)
    }

    /// `paired_product` or `tfim` (ladders).
    pub fn sweep_family(&self) -> Result<&'static str, SchemaError> {
        self.sweep()?;
        let m = self.model()?;
        match m.name.as_str() {
            "paired_product" => {
                if self.sweep()?.boundary.iter().any(|&k| k > 24) {
                    return Err(bad("sweep.boundary", "pair counts must be ≤ 24"));
                }
                Ok("paired_product")
            }
            "tfim" => {
                m.g.ok_or_else(|| bad("model.g", "required for tfim"))?;
                Ok("tfim_ladder")
            }
            other => Err(bad("model.name", format!("no sweep family for `{other}` (paired_product, tfim)"))),
        }
    }

    pub fn amplitudes(&self) -> (f64, f64) {
        let a = self.model.as_ref().and_then(|m| m.amplitudes).unwrap_or([(2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()]);
        (a[0], a[1])
    }
}

fn check_unit(key: &str, v: &[f64], allow_zero: bool) -> Result<(), SchemaError> {
    for &x in v {
        let ok = x.is_finite() && x < 1.0 && if allow_zero { x >= 0.0 } else { x > 0.0 };
        if !ok {
            return Err(bad(key, format!("value {x} out of range")));
        }
    }
    Ok(())
}
