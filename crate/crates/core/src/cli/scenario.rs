//! Scenario files: a kernel, a set of maps and an ordered task list.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channels::{MapSet, Word};
use crate::error::{Error, Result};
use crate::kernels::{PDKernel, PointId};
use crate::matrix::{wire_vec, C64};
use crate::randomdyn::{IIDModel, LogNormMode};

pub const SCENARIO_SCHEMA: &str = "cpkernel.scenario/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kernel: PDKernel,
    /// Second kernel: the dominated kernel for `rn`, `cross_model` and `dominates`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel2: Option<PDKernel>,
    #[serde(default)]
    pub maps: MapSet,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_schema() -> String {
    SCENARIO_SCHEMA.to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub psd: f64,
    pub rank: f64,
    /// `None` selects the scale-aware default per map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<f64>,
    pub cert: f64,
    pub conv: f64,
    pub max_iter: usize,
    pub oracle: f64,
    pub rn: f64,
    pub max_strings: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: crate::linalg::DEFAULT_PSD_TOL,
            rank: crate::linalg::DEFAULT_RANK_TOL,
            admissibility: None,
            cert: crate::model::DEFAULT_CERT_TOL,
            conv: crate::asymptotics::DEFAULT_CONV_TOL,
            max_iter: crate::asymptotics::DEFAULT_MAX_ITER,
            oracle: crate::kernels::RECONSTRUCTION_TOL,
            rn: 1e-9,
            max_strings: 4096,
        }
    }
}

impl Tolerances {
    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("tolerance override `{assignment}` is not key=value")))?;
        let bad = || Error::Invalid(format!("tolerance `{key}` has unparsable value `{value}`"));
        let float = || value.trim().parse::<f64>().map_err(|_| bad());
        match key.trim() {
            "psd" => self.psd = float()?,
            "rank" => self.rank = float()?,
            "admissibility" => self.admissibility = Some(float()?),
            "cert" => self.cert = float()?,
            "conv" => self.conv = float()?,
            "oracle" => self.oracle = float()?,
            "rn" => self.rn = float()?,
            "max_iter" => self.max_iter = value.trim().parse().map_err(|_| bad())?,
            "max_strings" => self.max_strings = value.trim().parse().map_err(|_| bad())?,
            other => return Err(Error::Invalid(format!("unknown tolerance `{other}`"))),
        }
        Ok(())
    }
}

/// Expected outcome of a task.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    /// The task must fail with this error code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// JSON pointers into the result with expected values; numbers compare within `tol`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<ExpectedValue>,
    #[serde(default = "default_expect_tol")]
    pub tol: f64,
}

fn default_expect_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedValue {
    pub pointer: String,
    pub value: Value,
}

/// Source of a random or fixed path for the random-dynamics tasks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<IIDModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Overrides the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_n_max() -> usize {
    30
}

fn default_trials() -> usize {
    20
}

fn default_mode() -> LogNormMode {
    LogNormMode::Renormalized
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskOp {
    Validate,
    Kolmogorov,
    Iterate {
        word: Word,
    },
    /// Compressed realization of `K_w` with its oracle residual.
    Realize {
        word: Word,
    },
    Certify,
    Limit {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
    },
    Stein {
        label: String,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    Maximality {
        label: String,
        candidate: PDKernel,
    },
    DecayBound {
        word: Word,
    },
    SpectralRadius {
        label: String,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    ScalarLift {
        x: PointId,
        #[serde(with = "wire_vec")]
        a: Vec<C64>,
        y: PointId,
        #[serde(with = "wire_vec")]
        b: Vec<C64>,
    },
    Dominates,
    ModelInner {
        w: Word,
        x: PointId,
        #[serde(with = "wire_vec")]
        a: Vec<C64>,
        v: Word,
        y: PointId,
        #[serde(with = "wire_vec")]
        b: Vec<C64>,
    },
    Rn,
    RnIterated {
        word: Word,
    },
    CrossModel {
        word: Word,
    },
    Lyapunov {
        model: IIDModel,
        n: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_mode")]
        mode: LogNormMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    GrowthCheck {
        path: PathSpec,
        x: PointId,
        #[serde(with = "wire_vec")]
        a: Vec<C64>,
        y: PointId,
        #[serde(with = "wire_vec")]
        b: Vec<C64>,
    },
    UniformBound {
        path: PathSpec,
    },
    /// Re-runs a recorded falsification: the quadratic-form premise for
    /// `label` at `alpha` and/or the domination `K_word ⪯ K`.
    #[serde(rename = "probe-regression")]
    ProbeRegression {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_wire_vec")]
        alpha: Option<Vec<C64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        word: Option<Word>,
        #[serde(default = "default_true")]
        expect_violation: bool,
    },
}

impl TaskOp {
    pub fn name(&self) -> &'static str {
        match self {
            TaskOp::Validate => "validate",
            TaskOp::Kolmogorov => "kolmogorov",
            TaskOp::Iterate { .. } => "iterate",
            TaskOp::Realize { .. } => "realize",
            TaskOp::Certify => "certify",
            TaskOp::Limit { .. } => "limit",
            TaskOp::Stein { .. } => "stein",
            TaskOp::Maximality { .. } => "maximality",
            TaskOp::DecayBound { .. } => "decay_bound",
            TaskOp::SpectralRadius { .. } => "spectral_radius",
            TaskOp::ScalarLift { .. } => "scalar_lift",
            TaskOp::Dominates => "dominates",
            TaskOp::ModelInner { .. } => "model_inner",
            TaskOp::Rn => "rn",
            TaskOp::RnIterated { .. } => "rn_iterated",
            TaskOp::CrossModel { .. } => "cross_model",
            TaskOp::Lyapunov { .. } => "lyapunov",
            TaskOp::GrowthCheck { .. } => "growth_check",
            TaskOp::UniformBound { .. } => "uniform_bound",
            TaskOp::ProbeRegression { .. } => "probe-regression",
        }
    }
}

mod opt_wire_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::matrix::C64;

    pub fn serialize<S: Serializer>(v: &Option<Vec<C64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<C64>>, D::Error> {
        let raw = Option::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(raw.map(|v| v.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    #[serde(flatten)]
    pub op: TaskOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

impl Task {
    pub fn new(op: TaskOp) -> Self {
        Self { op, expect: None }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("scenario JSON: {e}")))?;
        Self::from_value(raw)
    }

    /// Parses a scenario, splitting each task's `expect` block from its op so
    /// that unknown op fields are rejected.
    pub fn from_value(mut raw: Value) -> Result<Self> {
        let mut expects = Vec::new();
        if let Some(tasks) = raw.get_mut("tasks").and_then(Value::as_array_mut) {
            for (i, t) in tasks.iter_mut().enumerate() {
                let obj = t.as_object_mut().ok_or_else(|| Error::Invalid(format!("task {i} is not an object")))?;
                let expect = match obj.remove("expect") {
                    Some(e) => Some(
                        serde_json::from_value::<Expect>(e)
                            .map_err(|e| Error::Invalid(format!("task {i} expect block: {e}")))?,
                    ),
                    None => None,
                };
                expects.push(expect);
            }
        }
        let mut scenario: Scenario =
            serde_json::from_value(raw).map_err(|e| Error::Invalid(format!("scenario: {e}")))?;
        for (t, e) in scenario.tasks.iter_mut().zip(expects) {
            t.expect = e;
        }
        scenario.check()?;
        Ok(scenario)
    }

    /// Cross-reference checks: schema id, labels, points, dimensions.
    pub fn check(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::Invalid(format!("unsupported scenario schema `{}`", self.schema)));
        }
        let d = self.kernel.fiber_dim();
        for m in self.maps.iter() {
            if m.dim() != d {
                return Err(Error::dims(format!("map `{}` has dimension {}, kernel fiber {d}", m.label(), m.dim())));
            }
        }
        if let Some(k2) = &self.kernel2 {
            self.kernel.require_compatible(k2)?;
        }
        for (i, task) in self.tasks.iter().enumerate() {
            self.check_task(&task.op).map_err(|e| match e {
                Error::Invalid(m) => Error::Invalid(format!("task {i} ({}): {m}", task.op.name())),
                other => other,
            })?;
        }
        Ok(())
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        self.maps.resolve(w).map(|_| ())
    }

    fn check_point(&self, p: &PointId) -> Result<()> {
        self.kernel.point_index(&p.0).map(|_| ())
    }

    fn check_vec(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.kernel.fiber_dim() {
            return Err(Error::dims(format!(
                "vector of length {}, fiber dimension {}",
                v.len(),
                self.kernel.fiber_dim()
            )));
        }
        Ok(())
    }

    fn check_path(&self, p: &PathSpec) -> Result<()> {
        match (&p.labels, &p.model) {
            (Some(labels), None) => self.check_word(&Word::new(labels.iter().cloned())),
            (None, Some(model)) => {
                if p.n.unwrap_or(0) == 0 {
                    return Err(Error::Invalid("a sampled path needs n ≥ 1".into()));
                }
                self.check_word(&Word::new(model.labels().iter().cloned()))
            }
            _ => Err(Error::Invalid("path needs exactly one of `labels` or `model`".into())),
        }
    }

    fn need_kernel2(&self) -> Result<()> {
        if self.kernel2.is_none() {
            return Err(Error::Invalid("task needs `kernel2`".into()));
        }
        Ok(())
    }

    fn check_task(&self, op: &TaskOp) -> Result<()> {
        match op {
            TaskOp::Validate | TaskOp::Kolmogorov | TaskOp::Certify => Ok(()),
            TaskOp::Iterate { word }
            | TaskOp::Realize { word }
            | TaskOp::DecayBound { word }
            | TaskOp::RnIterated { word } => self.check_word(word),
            TaskOp::Limit { label, .. } | TaskOp::Stein { label, .. } | TaskOp::SpectralRadius { label, .. } => {
                self.maps.get(label).map(|_| ())
            }
            TaskOp::Maximality { label, candidate } => {
                self.maps.get(label)?;
                self.kernel.require_compatible(candidate)
            }
            TaskOp::ScalarLift { x, a, y, b } => {
                self.check_point(x)?;
                self.check_point(y)?;
                self.check_vec(a)?;
                self.check_vec(b)
            }
            TaskOp::ModelInner { w, x, a, v, y, b } => {
                self.check_word(w)?;
                self.check_word(v)?;
                self.check_point(x)?;
                self.check_point(y)?;
                self.check_vec(a)?;
                self.check_vec(b)
            }
            TaskOp::Dominates | TaskOp::Rn => self.need_kernel2(),
            TaskOp::CrossModel { word } => {
                self.need_kernel2()?;
                self.check_word(word)
            }
            TaskOp::Lyapunov { model, n, trials, .. } => {
                if *n == 0 || *trials == 0 {
                    return Err(Error::Invalid("n and trials must be positive".into()));
                }
                self.check_word(&Word::new(model.labels().iter().cloned()))
            }
            TaskOp::GrowthCheck { path, x, a, y, b } => {
                self.check_path(path)?;
                self.check_point(x)?;
                self.check_point(y)?;
                self.check_vec(a)?;
                self.check_vec(b)
            }
            TaskOp::UniformBound { path } => self.check_path(path),
            TaskOp::ProbeRegression { label, alpha, word, .. } => {
                self.maps.get(label)?;
                if let Some(alpha) = alpha {
                    let nd = self.kernel.n() * self.kernel.fiber_dim();
                    if alpha.len() != nd {
                        return Err(Error::dims(format!("α has length {}, Gram size {nd}", alpha.len())));
                    }
                }
                if let Some(w) = word {
                    self.check_word(w)?;
                }
                if alpha.is_none() && word.is_none() {
                    return Err(Error::Invalid("probe-regression needs `alpha` or `word`".into()));
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}
