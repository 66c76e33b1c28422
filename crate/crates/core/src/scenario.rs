//! Declarative scenario configs: a model, a window and a list of checks.
//!
//! Configs are JSON (schema in `docs/scenario.schema.json`). Parsing reports
//! the JSON pointer of the first offending value, and every check's window
//! requirement is validated before any computation starts.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clt::ReferenceLaw;
use crate::ergodic::{required_window_tn, MonomialSpec};
use crate::error::{Error, Result};
use crate::indcheck::IndependenceMode;
use crate::matalg::{pauli_matrices, AlgElement, Block, BlockAlgebra, FaithfulState, C64};
use crate::seqmodel::{
    calibration_sequence, codomain_perturbed_sequence, coin_mixture_sequence, flip, iid_tensor_sequence,
    perturbed_domain_sequence, u_omega, yang_baxter_sequence, RandomSequenceModel, StarHom,
};
use crate::subalg::Subalgebra;
use crate::symcheck::SymmetryKind;

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A complex number as `{"re": …, "im": …}` or `{"phase_degrees": θ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ComplexSpec {
    Cartesian {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Phase {
        phase_degrees: f64,
    },
}

impl ComplexSpec {
    pub fn value(&self) -> C64 {
        match *self {
            ComplexSpec::Cartesian { re, im } => C64::new(re, im),
            ComplexSpec::Phase { phase_degrees } => C64::from_polar(1.0, phase_degrees.to_radians()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Normalised trace on `⊕ M_{d_b}`.
    Trace { blocks: Vec<usize> },
    /// `diag(p, 1 − p)` on `ℂ²`.
    TraceP { p: f64 },
    /// Block weights and interleaved `[re, im, …]` row-major densities.
    Density {
        blocks: Vec<usize>,
        weights: Vec<f64>,
        densities: Vec<Vec<f64>>,
    },
}

impl StateSpec {
    pub fn build(&self) -> Result<FaithfulState> {
        match self {
            StateSpec::Trace { blocks } => Ok(FaithfulState::normalized_trace(&BlockAlgebra::new(blocks.clone())?)),
            StateSpec::TraceP { p } => FaithfulState::trace_p(*p),
            StateSpec::Density {
                blocks,
                weights,
                densities,
            } => {
                let algebra = BlockAlgebra::new(blocks.clone())?;
                let rho = AlgElement::from_interleaved(&algebra, densities)?;
                FaithfulState::new(&algebra, weights.clone(), rho.into_blocks())
            }
        }
    }
}

fn default_state() -> StateSpec {
    StateSpec::Trace { blocks: vec![2] }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub p: f64,
    pub weight: f64,
}

/// Two-leg unitary for braided models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BraidSpec {
    UOmega {
        omega: ComplexSpec,
    },
    Flip {
        d: usize,
    },
    /// `d² × d²` matrix, interleaved row-major.
    Matrix {
        d: usize,
        entries: Vec<f64>,
    },
}

impl BraidSpec {
    pub fn build(&self) -> Result<AlgElement> {
        match self {
            BraidSpec::UOmega { omega } => Ok(u_omega(omega.value())),
            BraidSpec::Flip { d } => {
                if *d == 0 {
                    return Err(Error::Validation("flip needs d ≥ 1".into()));
                }
                Ok(flip(*d))
            }
            BraidSpec::Matrix { d, entries } => {
                let algebra = BlockAlgebra::full(d * d)?;
                AlgElement::from_interleaved(&algebra, std::slice::from_ref(entries))
            }
        }
    }
}

/// Single-leg unitary on `M_2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSpec {
    Hadamard,
    Phase { omega: ComplexSpec },
    Matrix { entries: Vec<f64> },
}

impl GateSpec {
    pub fn build(&self) -> Result<AlgElement> {
        let m2 = BlockAlgebra::full(2)?;
        match self {
            GateSpec::Hadamard => {
                let p = pauli_matrices();
                let h: Block = (&p[1] + &p[3]) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                AlgElement::from_blocks(&m2, vec![h])
            }
            GateSpec::Phase { omega } => AlgElement::diagonal(&[C64::new(1.0, 0.0), omega.value()]),
            GateSpec::Matrix { entries } => AlgElement::from_interleaved(&m2, std::slice::from_ref(entries)),
        }
    }
}

/// Model kind and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    IidTensor {
        #[serde(default = "default_state")]
        base: StateSpec,
    },
    CoinMixture {
        atoms: Vec<Atom>,
    },
    CodomainPerturbed {
        omega: ComplexSpec,
    },
    YangBaxter {
        braid: BraidSpec,
    },
    /// iid `M_2` chain with one embedding conjugated by `exp(iδ σ_y ⊗ σ_z)`.
    Calibration {
        delta: f64,
    },
    /// iid `M_2` chain with `ι_position` precomposed with `Ad(gate)`.
    DomainPerturbed {
        position: usize,
        gate: GateSpec,
    },
}

impl ModelSpec {
    pub fn build(&self, window: usize) -> Result<RandomSequenceModel> {
        match self {
            ModelSpec::IidTensor { base } => iid_tensor_sequence(&base.build()?, window),
            ModelSpec::CoinMixture { atoms } => {
                let a: Vec<(f64, f64)> = atoms.iter().map(|a| (a.p, a.weight)).collect();
                coin_mixture_sequence(&a, window)
            }
            ModelSpec::CodomainPerturbed { omega } => codomain_perturbed_sequence(omega.value(), window),
            ModelSpec::YangBaxter { braid } => yang_baxter_sequence(&braid.build()?, window),
            ModelSpec::Calibration { delta } => calibration_sequence(*delta, window),
            ModelSpec::DomainPerturbed { position, gate } => {
                let base = FaithfulState::normalized_trace(&BlockAlgebra::full(2)?);
                let iid = iid_tensor_sequence(&base, window)?;
                let gamma = StarHom::inner_automorphism(&base, &gate.build()?)?;
                perturbed_domain_sequence(&iid, *position, &gamma)
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::IidTensor { .. } => "iid_tensor",
            ModelSpec::CoinMixture { .. } => "coin_mixture",
            ModelSpec::CodomainPerturbed { .. } => "codomain_perturbed",
            ModelSpec::YangBaxter { .. } => "yang_baxter",
            ModelSpec::Calibration { .. } => "calibration",
            ModelSpec::DomainPerturbed { .. } => "domain_perturbed",
        }
    }
}

/// A base element: a hermitian-basis index or explicit interleaved blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ElementSpec {
    Basis { basis: usize },
    Entries { entries: Vec<Vec<f64>> },
}

impl ElementSpec {
    pub fn build(&self, model: &RandomSequenceModel) -> Result<AlgElement> {
        match self {
            ElementSpec::Basis { basis } => model.basis().get(*basis).cloned().ok_or_else(|| {
                Error::Validation(format!(
                    "basis index {basis} outside basis of size {}",
                    model.basis().len()
                ))
            }),
            ElementSpec::Entries { entries } => AlgElement::from_interleaved(model.base(), entries),
        }
    }
}

/// `ι[tuple; basis]` in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub tuple: Vec<usize>,
    pub basis: Vec<usize>,
}

impl MonomialConfig {
    pub fn spec(&self) -> Result<MonomialSpec> {
        MonomialSpec::new(self.tuple.clone(), self.basis.clone())
    }

    fn extent(&self) -> usize {
        self.tuple.iter().max().map_or(0, |m| m + 1)
    }
}

/// Conditioning candidate `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Scalars,
    FiberScalars,
}

impl Candidate {
    pub fn build(self, model: &RandomSequenceModel) -> Result<Subalgebra> {
        match self {
            Candidate::Scalars => Ok(Subalgebra::scalars(&model.ambient()?.state)),
            Candidate::FiberScalars => model.fiber_scalars(),
        }
    }
}

/// Expected outcome of a check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
    Skip,
    /// Recorded without an asserted outcome.
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Check {
    Symmetry {
        kind: SymmetryKind,
        degree: usize,
        window: Option<usize>,
    },
    Hierarchy {
        degree: usize,
        window: Option<usize>,
    },
    /// Braid relation of the model's braid, or of `braid` when given.
    Braid {
        braid: Option<BraidSpec>,
    },
    Moment {
        tuple: Vec<usize>,
        basis: Vec<usize>,
        expected: Option<ComplexSpec>,
    },
    Independence {
        mode: IndependenceMode,
        candidate: Candidate,
        max_set_size: usize,
    },
    Factorization {
        candidate: Candidate,
        i: Vec<usize>,
        j: Vec<usize>,
        joined: bool,
    },
    FactorizabilityAudit {
        candidate: Candidate,
        max_set_size: usize,
    },
    CommutingSquare {
        left: Vec<usize>,
        right: Vec<usize>,
        candidate: Candidate,
    },
    /// Runs on the first `window` variables (default: all).
    ZeroOne {
        window: Option<usize>,
    },
    MixingGap {
        x: MonomialConfig,
        y: MonomialConfig,
        candidate: Candidate,
        k: usize,
    },
    Cesaro {
        x: MonomialConfig,
        y: MonomialConfig,
        n_max: usize,
    },
    RefinedAverage {
        x: MonomialConfig,
        tests: Vec<MonomialConfig>,
        n_values: Vec<usize>,
        exact_cap: Option<usize>,
        samples: Option<usize>,
        #[serde(default)]
        require_monotone: bool,
    },
    InducedEndomorphism {
        n: usize,
        degree: usize,
        window: Option<usize>,
    },
    Clt {
        x: ElementSpec,
        p: usize,
        n_values: Vec<usize>,
        candidate: Option<Candidate>,
        bruteforce_cap: Option<u64>,
        expected_limit: Option<f64>,
    },
    ConditionalClt {
        x: ElementSpec,
        p: usize,
        candidate: Candidate,
        #[serde(default)]
        auto_center: bool,
    },
    Reference {
        law: ReferenceLaw,
        p: usize,
        q: Option<f64>,
        expected: Option<f64>,
    },
}

impl Check {
    pub fn type_name(&self) -> &'static str {
        match self {
            Check::Symmetry { .. } => "symmetry",
            Check::Hierarchy { .. } => "hierarchy",
            Check::Braid { .. } => "braid",
            Check::Moment { .. } => "moment",
            Check::Independence { .. } => "independence",
            Check::Factorization { .. } => "factorization",
            Check::FactorizabilityAudit { .. } => "factorizability_audit",
            Check::CommutingSquare { .. } => "commuting_square",
            Check::ZeroOne { .. } => "zero_one",
            Check::MixingGap { .. } => "mixing_gap",
            Check::Cesaro { .. } => "cesaro",
            Check::RefinedAverage { .. } => "refined_average",
            Check::InducedEndomorphism { .. } => "induced_endomorphism",
            Check::Clt { .. } => "clt",
            Check::ConditionalClt { .. } => "conditional_clt",
            Check::Reference { .. } => "reference",
        }
    }

    /// Smallest model window the check needs, with the offending field.
    fn required_window(&self, window: usize) -> Result<(usize, &'static str)> {
        let max_of = |v: &[usize]| v.iter().max().map_or(0, |m| m + 1);
        Ok(match self {
            Check::Symmetry { window: w, .. } | Check::Hierarchy { window: w, .. } => (w.unwrap_or(window), "window"),
            Check::InducedEndomorphism { window: w, .. } | Check::ZeroOne { window: w } => {
                (w.unwrap_or(window), "window")
            }
            Check::Moment { tuple, .. } => (max_of(tuple), "tuple"),
            Check::Factorization { i, j, .. } => (max_of(i).max(max_of(j)), "i"),
            Check::CommutingSquare { left, right, .. } => (max_of(left).max(max_of(right)), "left"),
            Check::MixingGap { x, y, k, .. } => ((x.extent() + k).max(y.extent()), "k"),
            Check::Cesaro { x, y, n_max } => {
                let need = if x.tuple.is_empty() {
                    0
                } else {
                    x.extent() + n_max.saturating_sub(1)
                };
                (need.max(y.extent()), "n_max")
            }
            Check::RefinedAverage { x, tests, n_values, .. } => {
                let n = n_values.iter().copied().max().unwrap_or(0);
                let need = required_window_tn(n, x.extent());
                (
                    need.max(tests.iter().map(|t| t.extent()).max().unwrap_or(0)),
                    "n_values",
                )
            }
            Check::Clt { n_values, p, .. } => (n_values.iter().copied().max().unwrap_or(0).max(p / 2), "n_values"),
            Check::ConditionalClt { p, .. } => ((p / 2).max(1), "p"),
            _ => (0, "window"),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub id: Option<String>,
    #[serde(default)]
    pub expect: Expect,
    pub tolerance: Option<f64>,
    #[serde(flatten)]
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub model: ModelSpec,
    pub window: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub output: Option<OutputSpec>,
    pub checks: Vec<CheckSpec>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Scenario {
    /// Parse and validate a config.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::Config {
            pointer: String::new(),
            message: e.to_string(),
        })?;
        let scenario: Scenario = serde_path_to_error::deserialize(&raw).map_err(|e| Error::Config {
            pointer: to_pointer(e.path()),
            message: e.inner().to_string(),
        })?;
        let echo = serde_json::to_value(&scenario).map_err(|e| Error::Internal(e.to_string()))?;
        reject_unknown_keys(&raw, &echo, String::new())?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn check_id(&self, index: usize) -> String {
        self.checks[index]
            .id
            .clone()
            .unwrap_or_else(|| format!("{:02}_{}", index, self.checks[index].check.type_name()))
    }

    pub fn global_tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(DEFAULT_TOLERANCE)
    }

    fn validate(&self) -> Result<()> {
        let cfg = |pointer: String, message: String| Error::Config { pointer, message };
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(cfg("/name".into(), "name must be non-empty [A-Za-z0-9_-]".into()));
        }
        if self.window == 0 {
            return Err(cfg("/window".into(), "window must be at least 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(cfg(
                    "/tolerance".into(),
                    format!("tolerance {t} is not a finite nonnegative number"),
                ));
            }
        }
        if self.checks.is_empty() {
            return Err(cfg("/checks".into(), "at least one check is required".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for (k, c) in self.checks.iter().enumerate() {
            let at = |field: &str| format!("/checks/{k}/{field}");
            if !ids.insert(self.check_id(k)) {
                return Err(cfg(at("id"), format!("duplicate check id {}", self.check_id(k))));
            }
            if let Some(t) = c.tolerance {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(cfg(
                        at("tolerance"),
                        format!("tolerance {t} is not a finite nonnegative number"),
                    ));
                }
            }
            let (need, field) = c.check.required_window(self.window)?;
            if need > self.window {
                return Err(cfg(
                    at(field),
                    format!(
                        "{} check needs window {need}, scenario window is {}",
                        c.check.type_name(),
                        self.window
                    ),
                ));
            }
            match &c.check {
                Check::Symmetry { degree, .. } | Check::Hierarchy { degree, .. } if *degree == 0 => {
                    return Err(cfg(at("degree"), "degree must be at least 1".into()));
                }
                Check::Moment { tuple, basis, .. } if tuple.len() != basis.len() => {
                    return Err(cfg(at("basis"), "tuple and basis lengths differ".into()));
                }
                Check::Clt { p, n_values, .. } if *p == 0 || n_values.is_empty() || n_values.contains(&0) => {
                    return Err(cfg(
                        at("n_values"),
                        "p ≥ 1 and a nonempty list of N ≥ 1 are required".into(),
                    ));
                }
                Check::RefinedAverage { n_values, .. } if n_values.is_empty() || n_values.contains(&0) => {
                    return Err(cfg(at("n_values"), "a nonempty list of N ≥ 1 is required".into()));
                }
                Check::Cesaro { n_max: 0, .. } => {
                    return Err(cfg(at("n_max"), "n_max must be at least 1".into()));
                }
                Check::MixingGap { x, y, .. } | Check::Cesaro { x, y, .. } => {
                    for (name, m) in [("x", x), ("y", y)] {
                        if m.tuple.len() != m.basis.len() {
                            return Err(cfg(at(name), "tuple and basis lengths differ".into()));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Unknown => {}
        }
    }
    out
}

/// Keys present in the raw config but absent from the re-serialised parse
/// were ignored by the deserialiser, i.e. misspelt or unsupported.
fn reject_unknown_keys(raw: &Value, echo: &Value, pointer: String) -> Result<()> {
    match (raw, echo) {
        (Value::Object(r), Value::Object(e)) => {
            for (k, v) in r {
                let here = format!("{pointer}/{}", k.replace('~', "~0").replace('/', "~1"));
                match e.get(k) {
                    Some(ev) => reject_unknown_keys(v, ev, here)?,
                    None => {
                        return Err(Error::Config {
                            pointer: here,
                            message: format!("unknown field `{k}`"),
                        })
                    }
                }
            }
            Ok(())
        }
        (Value::Array(r), Value::Array(e)) => {
            for (k, (rv, ev)) in r.iter().zip(e).enumerate() {
                reject_unknown_keys(rv, ev, format!("{pointer}/{k}"))?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Shipped scenarios, embedded at build time.
pub const SHIPPED: &[(&str, &str)] = &[
    (
        "definetti_counterexample",
        include_str!("../scenarios/definetti_counterexample.json"),
    ),
    ("omega_sweep_i", include_str!("../scenarios/omega_sweep_i.json")),
    ("iid_exchangeable", include_str!("../scenarios/iid_exchangeable.json")),
    ("coin_ci", include_str!("../scenarios/coin_ci.json")),
    ("coin_clt", include_str!("../scenarios/coin_clt.json")),
    ("iid_clt", include_str!("../scenarios/iid_clt.json")),
    ("braid_yang_baxter", include_str!("../scenarios/braid_yang_baxter.json")),
    ("ergodic_iid", include_str!("../scenarios/ergodic_iid.json")),
    ("calibration", include_str!("../scenarios/calibration.json")),
    ("domain_hadamard", include_str!("../scenarios/domain_hadamard.json")),
    ("reference_laws", include_str!("../scenarios/reference_laws.json")),
];

pub fn shipped(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    SHIPPED.iter().find(|(n, _)| *n == stem).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_shipped_scenarios_parse() {
        for (name, text) in SHIPPED {
            let s = Scenario::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&s.name, name);
        }
        assert!(SHIPPED.len() >= 8);
    }

    #[test]
    fn pointer_errors() {
        let missing = r#"{"name": "x", "model": {"kind": "iid_tensor"}, "checks": []}"#;
        assert!(matches!(Scenario::from_json(missing), Err(Error::Config { .. })));
        let bad = r#"{"name": "x", "model": {"kind": "iid_tensor"}, "window": 3,
            "checks": [{"type": "symmetry", "kind": "stationary", "degree": "four"}]}"#;
        match Scenario::from_json(bad).unwrap_err() {
            Error::Config { pointer, .. } => assert!(pointer.starts_with("/checks/0"), "{pointer}"),
            e => panic!("{e}"),
        }
        let typo = r#"{"name": "x", "model": {"kind": "iid_tensor"}, "window": 3,
            "checks": [{"type": "symmetry", "kind": "stationary", "degree": 2, "tolerence": 1}]}"#;
        match Scenario::from_json(typo).unwrap_err() {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/checks/0/tolerence"),
            e => panic!("{e}"),
        }
        let wide = r#"{"name": "x", "model": {"kind": "iid_tensor"}, "window": 3,
            "checks": [{"type": "moment", "tuple": [0, 5], "basis": [1, 1]}]}"#;
        match Scenario::from_json(wide).unwrap_err() {
            Error::Config { pointer, .. } => assert_eq!(pointer, "/checks/0/tuple"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn complex_forms() {
        let a: ComplexSpec = serde_json::from_str(r#"{"phase_degrees": 180}"#).unwrap();
        assert!((a.value() - C64::new(-1.0, 0.0)).norm() < 1e-15);
        let b: ComplexSpec = serde_json::from_str(r#"{"re": 0, "im": 1}"#).unwrap();
        assert_eq!(b.value(), C64::new(0.0, 1.0));
    }
}
