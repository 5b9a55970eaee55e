//! Run configuration: a strict JSON schema with a canonical content hash.
//!
//! Parsing is two-pass. A schema walk over the raw JSON collects every
//! unknown key at once (serde would stop at the first), then serde does the
//! typed parse. The hash is taken over the reparsed value, so it is stable
//! under key reordering and whitespace but sensitive to every value.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Deserialize;
use serde_json::Value;
use slowflow::{
    Chart, ClassifierConfig, IntegratorConfig, Perturbation, PerturbationDirection, Polynomial,
};

use crate::{Failure, cfg_err};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Reduce,
    Critical,
    Flow,
    Elliptic,
    Parabolic,
    Classify,
    Sweep,
    VerifySpectral,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::Reduce => "reduce",
            ExperimentKind::Critical => "critical",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Elliptic => "elliptic",
            ExperimentKind::Parabolic => "parabolic",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::VerifySpectral => "verify-spectral",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// The potential under study; optional only for verify-spectral.
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub seed: u64,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub flow: Option<FlowSection>,
    #[serde(default)]
    pub critical: Option<CriticalSection>,
    #[serde(default)]
    pub reduce: Option<ReduceSection>,
    #[serde(default)]
    pub parabolic: Option<ParabolicSection>,
    #[serde(default)]
    pub elliptic: Option<EllipticSection>,
    #[serde(default)]
    pub spectral: Option<SpectralSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// Either an inline potential in text form (one term per line, coefficient
/// then one exponent per variable) or a path to a JSON file carrying one.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub potential: Option<Polynomial>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    potential: Polynomial,
}

impl SystemConfig {
    /// The configured potential, reading the referenced file if needed.
    pub fn resolve(&self, config_dir: &Path) -> Result<Polynomial, Failure> {
        match (&self.potential, &self.model) {
            (Some(_), Some(_)) => Err(Failure::Config(
                "system: give either `potential` or `model`, not both".into(),
            )),
            (Some(p), None) => Ok(p.clone()),
            (None, Some(path)) => {
                let full = resolve_path(config_dir, path);
                let text = fs::read_to_string(&full).map_err(|e| {
                    Failure::Config(format!("system.model `{}`: {e}", full.display()))
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    Failure::Config(format!("system.model `{}`: {e}", full.display()))
                })?;
                let unknown = unknown_keys(&value, &MODEL_FILE_SCHEMA);
                if !unknown.is_empty() {
                    return Err(Failure::Config(format!(
                        "system.model `{}`: unknown keys: {}",
                        full.display(),
                        unknown.join(", ")
                    )));
                }
                let file: ModelFile = serde_json::from_value(value).map_err(|e| {
                    Failure::Config(format!("system.model `{}`: {e}", full.display()))
                })?;
                Ok(file.potential)
            }
            (None, None) => Err(Failure::Config(
                "system: a potential is required for this experiment".into(),
            )),
        }
    }
}

/// Overrides for the integrator defaults; omitted fields keep them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_end: Option<f64>,
    pub out_ratio: Option<f64>,
    pub max_steps: Option<u64>,
    pub chart: Option<Chart>,
    pub floor_tol: Option<f64>,
    pub escape_factor: Option<f64>,
}

impl IntegratorSection {
    pub fn fold(&self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        IntegratorConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            t_end: self.t_end.unwrap_or(d.t_end),
            out_ratio: self.out_ratio.unwrap_or(d.out_ratio),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            chart: self.chart.unwrap_or(d.chart),
            floor_tol: self.floor_tol.unwrap_or(d.floor_tol),
            escape_factor: self.escape_factor.unwrap_or(d.escape_factor),
        }
    }
}

/// Overrides for the classifier defaults; omitted fields keep them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    pub tail_fraction: Option<f64>,
    pub min_tail_samples: Option<usize>,
    pub r2_threshold: Option<f64>,
    pub plateau_tol: Option<f64>,
    pub growth_factor: Option<f64>,
    pub min_decades: Option<f64>,
    pub dist_tol: Option<f64>,
    pub value_tol: Option<f64>,
    pub zero_value_tol: Option<f64>,
    pub rate_tol: Option<f64>,
    pub freq_tol: Option<f64>,
    pub ratio_tol: Option<f64>,
    pub mz_delta_fraction: Option<f64>,
    pub mz_bound_factor: Option<f64>,
    pub floor_tol: Option<f64>,
    pub fd_half_width: Option<usize>,
}

impl ClassifierSection {
    pub fn fold(&self) -> ClassifierConfig {
        let d = ClassifierConfig::default();
        ClassifierConfig {
            tail_fraction: self.tail_fraction.unwrap_or(d.tail_fraction),
            min_tail_samples: self.min_tail_samples.unwrap_or(d.min_tail_samples),
            r2_threshold: self.r2_threshold.unwrap_or(d.r2_threshold),
            plateau_tol: self.plateau_tol.unwrap_or(d.plateau_tol),
            growth_factor: self.growth_factor.unwrap_or(d.growth_factor),
            min_decades: self.min_decades.unwrap_or(d.min_decades),
            dist_tol: self.dist_tol.unwrap_or(d.dist_tol),
            value_tol: self.value_tol.unwrap_or(d.value_tol),
            zero_value_tol: self.zero_value_tol.unwrap_or(d.zero_value_tol),
            rate_tol: self.rate_tol.unwrap_or(d.rate_tol),
            freq_tol: self.freq_tol.unwrap_or(d.freq_tol),
            ratio_tol: self.ratio_tol.unwrap_or(d.ratio_tol),
            mz_delta_fraction: self.mz_delta_fraction.unwrap_or(d.mz_delta_fraction),
            mz_bound_factor: self.mz_bound_factor.unwrap_or(d.mz_bound_factor),
            floor_tol: self.floor_tol.unwrap_or(d.floor_tol),
            fd_half_width: self.fd_half_width.unwrap_or(d.fd_half_width),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub amplitude: f64,
    pub epsilon: f64,
    /// Fixed direction; omitted means a seeded direction field.
    pub direction: Option<Vec<f64>>,
}

impl PerturbationSection {
    pub fn build(&self, seed: u64) -> Perturbation {
        let direction = match &self.direction {
            Some(d) => PerturbationDirection::Fixed(DVector::from_row_slice(d)),
            None => PerturbationDirection::Seeded(seed),
        };
        Perturbation {
            amplitude: self.amplitude,
            epsilon: self.epsilon,
            direction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub initial: Vec<f64>,
    pub perturbation: Option<PerturbationSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSection {
    /// Multistart count (default 64).
    pub n_starts: Option<usize>,
    /// Newton residual tolerance (default 1e-10).
    pub tol: Option<f64>,
    /// Analyze this homogeneous part instead of the leading one.
    pub degree: Option<u32>,
    /// Rescale critical values by 1/m in the positivity check.
    pub m: Option<f64>,
    pub lojasiewicz: Option<LojasiewiczSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LojasiewiczSection {
    pub samples: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceSection {
    pub fit_degree: Option<u32>,
    pub domain_radius: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicSection {
    pub initial: Vec<f64>,
    /// Prefactor b of the admissible nonlinearity.
    pub nonlinear: Option<Polynomial>,
    /// Exponent margin of the neutral residual test (default 0.25).
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticSection {
    pub m: f64,
    /// Direct run: initial displacement, paired with `velocity`.
    pub initial: Option<Vec<f64>>,
    pub velocity: Option<Vec<f64>>,
    /// Slow-manifold run in kernel coordinates; excludes `initial`.
    pub slow: Option<SlowSection>,
    pub nonlinear: Option<Polynomial>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowSection {
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub m: f64,
    pub lambdas: Vec<f64>,
    /// Identity tolerance (default 1e-12).
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit initial conditions.
    pub initials: Option<Vec<Vec<f64>>>,
    /// Initial conditions on a circle in the first two coordinates.
    pub circle: Option<CircleSection>,
    /// Hard cap on the grid size (default 256).
    pub limit: Option<usize>,
    /// Worker threads (default: available parallelism).
    pub parallelism: Option<usize>,
    pub perturbation: Option<PerturbationSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSection {
    pub radius: f64,
    pub count: usize,
}

pub struct Loaded {
    pub run: RunConfig,
    /// sha256 of the canonical (key-sorted, compact) JSON.
    pub hash: String,
    /// Directory of the config file, the base for relative references.
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let unknown = unknown_keys(&value, &SCHEMA);
    if !unknown.is_empty() {
        return Err(Failure::Config(format!(
            "unknown keys: {}",
            unknown.join(", ")
        )));
    }
    let run: RunConfig = serde_json::from_value(value.clone()).map_err(cfg_err)?;
    let hash = canonical_hash(&value);
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { run, hash, dir })
}

pub fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// sha256 of the compact serialization; serde_json keeps object keys in a
/// sorted map, so reordering the input cannot change the digest.
pub fn canonical_hash(value: &Value) -> String {
    let canonical = serde_json::to_string(value).expect("value reserializes");
    crate::artifacts::sha256_hex(canonical.as_bytes())
}

enum Keys {
    Object(&'static [(&'static str, Keys)]),
    List(&'static Keys),
    Scalar,
}

const PERTURBATION_KEYS: Keys = Keys::Object(&[
    ("amplitude", Keys::Scalar),
    ("epsilon", Keys::Scalar),
    ("direction", Keys::List(&Keys::Scalar)),
]);

const MODEL_FILE_SCHEMA: Keys = Keys::Object(&[("potential", Keys::Scalar)]);

const SCHEMA: Keys = Keys::Object(&[
    ("experiment", Keys::Scalar),
    (
        "system",
        Keys::Object(&[("potential", Keys::Scalar), ("model", Keys::Scalar)]),
    ),
    (
        "integrator",
        Keys::Object(&[
            ("rel_tol", Keys::Scalar),
            ("abs_tol", Keys::Scalar),
            ("t_end", Keys::Scalar),
            ("out_ratio", Keys::Scalar),
            ("max_steps", Keys::Scalar),
            ("chart", Keys::Scalar),
            ("floor_tol", Keys::Scalar),
            ("escape_factor", Keys::Scalar),
        ]),
    ),
    (
        "classifier",
        Keys::Object(&[
            ("tail_fraction", Keys::Scalar),
            ("min_tail_samples", Keys::Scalar),
            ("r2_threshold", Keys::Scalar),
            ("plateau_tol", Keys::Scalar),
            ("growth_factor", Keys::Scalar),
            ("min_decades", Keys::Scalar),
            ("dist_tol", Keys::Scalar),
            ("value_tol", Keys::Scalar),
            ("zero_value_tol", Keys::Scalar),
            ("rate_tol", Keys::Scalar),
            ("freq_tol", Keys::Scalar),
            ("ratio_tol", Keys::Scalar),
            ("mz_delta_fraction", Keys::Scalar),
            ("mz_bound_factor", Keys::Scalar),
            ("floor_tol", Keys::Scalar),
            ("fd_half_width", Keys::Scalar),
        ]),
    ),
    ("seed", Keys::Scalar),
    ("output_dir", Keys::Scalar),
    (
        "flow",
        Keys::Object(&[
            ("initial", Keys::List(&Keys::Scalar)),
            ("perturbation", PERTURBATION_KEYS),
        ]),
    ),
    (
        "critical",
        Keys::Object(&[
            ("n_starts", Keys::Scalar),
            ("tol", Keys::Scalar),
            ("degree", Keys::Scalar),
            ("m", Keys::Scalar),
            (
                "lojasiewicz",
                Keys::Object(&[("samples", Keys::Scalar), ("radius", Keys::Scalar)]),
            ),
        ]),
    ),
    (
        "reduce",
        Keys::Object(&[
            ("fit_degree", Keys::Scalar),
            ("domain_radius", Keys::Scalar),
            ("grid", Keys::Scalar),
        ]),
    ),
    (
        "parabolic",
        Keys::Object(&[
            ("initial", Keys::List(&Keys::Scalar)),
            ("nonlinear", Keys::Scalar),
            ("eps", Keys::Scalar),
        ]),
    ),
    (
        "elliptic",
        Keys::Object(&[
            ("m", Keys::Scalar),
            ("initial", Keys::List(&Keys::Scalar)),
            ("velocity", Keys::List(&Keys::Scalar)),
            ("slow", Keys::Object(&[("initial", Keys::List(&Keys::Scalar))])),
            ("nonlinear", Keys::Scalar),
            ("eps", Keys::Scalar),
        ]),
    ),
    (
        "spectral",
        Keys::Object(&[
            ("m", Keys::Scalar),
            ("lambdas", Keys::List(&Keys::Scalar)),
            ("tol", Keys::Scalar),
        ]),
    ),
    (
        "sweep",
        Keys::Object(&[
            ("initials", Keys::List(&Keys::List(&Keys::Scalar))),
            (
                "circle",
                Keys::Object(&[("radius", Keys::Scalar), ("count", Keys::Scalar)]),
            ),
            ("limit", Keys::Scalar),
            ("parallelism", Keys::Scalar),
            ("perturbation", PERTURBATION_KEYS),
        ]),
    ),
]);

/// Paths of keys the schema does not know, in document order. Type errors
/// are left to serde; this pass only guards against silent ignoring.
fn unknown_keys(value: &Value, schema: &Keys) -> Vec<String> {
    let mut out = Vec::new();
    walk(value, schema, &mut Vec::new(), &mut out);
    out
}

fn walk(value: &Value, schema: &Keys, path: &mut Vec<String>, out: &mut Vec<String>) {
    match (schema, value) {
        (Keys::Object(fields), Value::Object(map)) => {
            for (key, sub) in map {
                match fields.iter().find(|(name, _)| name == key) {
                    Some((_, inner)) => {
                        path.push(key.clone());
                        walk(sub, inner, path, out);
                        path.pop();
                    }
                    None => {
                        let mut full = path.join(".");
                        if !full.is_empty() {
                            full.push('.');
                        }
                        full.push_str(key);
                        out.push(full);
                    }
                }
            }
        }
        (Keys::List(inner), Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                path.push(format!("[{i}]"));
                walk(item, inner, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}
