//! The experiment registry: names, tags, defaults and accepted knobs.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MollifierRates,
    PhaseRates,
    RemainderRates,
    DnmapConsistency,
    GaugeInvariance,
    ReconMagnetic,
    ReconElectric,
    Pipeline,
    CarlemanProbe,
}

/// Type of an experiment option.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptKind {
    Number,
    Integer,
    Bool,
    Choice(&'static [&'static str]),
    Numbers,
    Vector,
}

/// Default value of the `xi_lattice` field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LatticeDefault {
    Cube(i32),
    List(&'static [[f64; 3]]),
}

pub struct Spec {
    pub experiment: Experiment,
    pub name: &'static str,
    pub tag: &'static str,
    pub summary: &'static str,
    pub grid: [usize; 3],
    pub min_points: usize,
    /// Default `gamma`; `None` when the experiment takes none.
    pub gamma: Option<f64>,
    pub h_schedule: &'static [f64],
    pub min_h: usize,
    pub max_h: usize,
    /// Whether all axes must have the same point count.
    pub cubic: bool,
    pub lattice: Option<LatticeDefault>,
    /// Accepted coefficient slots.
    pub coefficients: &'static [&'static str],
    pub thresholds: &'static [(&'static str, f64)],
    /// Name, kind and default (JSON text).
    pub options: &'static [(&'static str, OptKind, &'static str)],
}

const EXPECT: &[&str] = &["any", "indistinguishable", "distinguished-at-curl", "distinguished-at-electric"];

pub const REGISTRY: [Spec; 9] = [
    Spec {
        experiment: Experiment::MollifierRates,
        name: "mollifier-rates",
        tag: "§3",
        summary: "mollifier error and gradient rates at a Hölder cone",
        grid: [64; 3],
        min_points: 16,
        gamma: Some(0.5),
        h_schedule: &[],
        min_h: 0,
        max_h: 0,
        cubic: true,
        lattice: None,
        coefficients: &[],
        thresholds: &[("slope_tol", 0.15)],
        options: &[("thetas", OptKind::Numbers, "[8, 16, 32, 64]"), ("window", OptKind::Number, "8")],
    },
    Spec {
        experiment: Experiment::PhaseRates,
        name: "phase-rates",
        tag: "§3",
        summary: "transport phase of a mollified Hölder potential against the sharp phase",
        grid: [24, 24, 160],
        min_points: 12,
        gamma: Some(0.75),
        h_schedule: &[0.5, 0.35, 0.25],
        min_h: 2,
        max_h: 8,
        cubic: false,
        lattice: None,
        coefficients: &["a"],
        thresholds: &[("grad_slope_tol", 0.2), ("err_slope_margin", 0.2)],
        options: &[
            ("xi", OptKind::Vector, "[0, 0, 2]"),
            ("theta0", OptKind::Number, "8"),
            ("quadrature", OptKind::Integer, "24"),
            ("oracle_quadrature", OptKind::Integer, "48"),
            ("probe_radius", OptKind::Number, "0.175"),
        ],
    },
    Spec {
        experiment: Experiment::RemainderRates,
        name: "remainder-rates",
        tag: "§3",
        summary: "CGO remainder decay in the semiclassical H1 norm",
        grid: [48; 3],
        min_points: 12,
        gamma: Some(0.75),
        h_schedule: &[0.5, 0.35, 0.25],
        min_h: 2,
        max_h: 8,
        cubic: false,
        lattice: None,
        coefficients: &["a", "f", "p"],
        thresholds: &[("slope_margin", 0.2)],
        options: &[
            ("xi", OptKind::Vector, "[0, 0, 2]"),
            ("theta0", OptKind::Number, "8"),
            ("quadrature", OptKind::Integer, "24"),
        ],
    },
    Spec {
        experiment: Experiment::DnmapConsistency,
        name: "dnmap-consistency",
        tag: "§2",
        summary: "DN pairings of a convection field and of its magnetic form agree",
        grid: [14; 3],
        min_points: 8,
        gamma: None,
        h_schedule: &[],
        min_h: 0,
        max_h: 0,
        cubic: false,
        lattice: None,
        coefficients: &[],
        thresholds: &[("max_relative_gap", 1e-8)],
        options: &[
            ("triples", OptKind::Integer, "20"),
            ("max_mode", OptKind::Integer, "1"),
            ("amplitude", OptKind::Number, "2"),
        ],
    },
    Spec {
        experiment: Experiment::GaugeInvariance,
        name: "gauge-invariance",
        tag: "§2",
        summary: "DN matrices of gauge-equivalent potentials converge together",
        grid: [24; 3],
        min_points: 8,
        gamma: None,
        h_schedule: &[],
        min_h: 0,
        max_h: 0,
        cubic: true,
        lattice: None,
        coefficients: &[],
        thresholds: &[("min_order", 1.8)],
        options: &[
            ("fine", OptKind::Integer, "48"),
            ("psi_amplitude", OptKind::Number, "0.5"),
            ("max_mode", OptKind::Integer, "1"),
        ],
    },
    Spec {
        experiment: Experiment::ReconMagnetic,
        name: "recon-magnetic",
        tag: "§4",
        summary: "curl of the magnetic difference recovered from CGO pairings",
        grid: [24; 3],
        min_points: 12,
        gamma: None,
        h_schedule: &[0.25],
        min_h: 1,
        max_h: 1,
        cubic: false,
        lattice: Some(LatticeDefault::Cube(4)),
        coefficients: &[],
        thresholds: &[("born_max_error", 0.15), ("gauge_relative_floor", 0.05), ("noise_factor", 3.0)],
        options: &[
            ("pair", OptKind::Choice(&["born", "gauge"]), "\"born\""),
            ("epsilon", OptKind::Number, "0.05"),
            ("gauge_rotation", OptKind::Number, "2"),
            ("psi_amplitude", OptKind::Number, "0.1"),
            ("theta0", OptKind::Number, "8"),
            ("quadrature", OptKind::Integer, "16"),
        ],
    },
    Spec {
        experiment: Experiment::ReconElectric,
        name: "recon-electric",
        tag: "§5",
        summary: "electric recovery with matched magnetic parts and the second integral",
        grid: [24; 3],
        min_points: 12,
        gamma: Some(0.9),
        h_schedule: &[0.5, 0.35, 0.25],
        min_h: 2,
        max_h: 8,
        cubic: false,
        lattice: Some(LatticeDefault::List(&[[1.0, 0.0, 0.0], [0.0, 2.0, 1.0], [1.0, -1.0, 1.0]])),
        coefficients: &["a", "f1", "p1", "f2", "p2"],
        thresholds: &[("max_relative_error", 0.2), ("slope_margin", 0.2), ("nondecay_max_slope", 0.2)],
        options: &[("theta0", OptKind::Number, "4"), ("quadrature", OptKind::Integer, "16")],
    },
    Spec {
        experiment: Experiment::Pipeline,
        name: "pipeline",
        tag: "§4-§5",
        summary: "two-stage uniqueness pipeline for a pair of convection fields",
        grid: [24; 3],
        min_points: 12,
        gamma: None,
        h_schedule: &[0.25],
        min_h: 1,
        max_h: 1,
        cubic: false,
        lattice: Some(LatticeDefault::Cube(2)),
        coefficients: &["v1", "v2"],
        thresholds: &[
            ("curl_max_error", 0.15),
            ("electric_max_error", 0.2),
            ("noise_factor", 3.0),
            ("relative_floor", 0.05),
            ("gauge_tol", 0.05),
        ],
        options: &[
            ("expect", OptKind::Choice(EXPECT), "\"any\""),
            ("theta0", OptKind::Number, "8"),
            ("electric_theta0", OptKind::Number, "4"),
            ("quadrature", OptKind::Integer, "16"),
            ("quasilinear", OptKind::Bool, "true"),
            ("perturbation", OptKind::Number, "0.2"),
        ],
    },
    Spec {
        experiment: Experiment::CarlemanProbe,
        name: "carleman-probe",
        tag: "Appendix B",
        summary: "empirical Carleman constant and orders of the perturbation terms",
        grid: [41; 3],
        min_points: 9,
        gamma: None,
        h_schedule: &[0.4, 0.2, 0.1],
        min_h: 2,
        max_h: 8,
        cubic: true,
        lattice: None,
        coefficients: &["a", "f", "p"],
        thresholds: &[("max_spread", 3.0), ("min_af_slope", 0.85), ("min_p_slope", 1.85), ("max_degradation", 5.0)],
        options: &[
            ("samples", OptKind::Integer, "200"),
            ("eps", OptKind::Number, "0.25"),
            ("alpha", OptKind::Vector, "[1, 0, 0]"),
        ],
    },
];

pub fn lookup(name: &str) -> Option<&'static Spec> {
    REGISTRY.iter().find(|s| s.name == name)
}

pub fn spec(e: Experiment) -> &'static Spec {
    REGISTRY.iter().find(|s| s.experiment == e).expect("every experiment is registered")
}

/// Closest candidate by edit distance, if reasonably close.
pub fn suggest<'a>(name: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(name, c), c))
        .filter(|(d, c)| *d <= 3.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

/// One registry line: name, tag and summary.
pub fn line(s: &Spec) -> String {
    format!("{:<18} [{}] {}", s.name, s.tag, s.summary)
}
