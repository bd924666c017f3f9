//! Experiment configs: parsing, validation and defaults.

use crate::registry::{self, LatticeDefault, OptKind, Spec};
use cgolab::potentials::{BumpSpec, HolderSpec, Recipe};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

const KEYS: [&str; 11] = [
    "$schema",
    "experiment",
    "grid",
    "gamma",
    "h_schedule",
    "xi_lattice",
    "coefficients",
    "seed",
    "output_dir",
    "thresholds",
    "options",
];

pub const DEFAULT_OUTPUT: &str = "cgolab-out";
const MAX_CUBE: i64 = 8;
const MAX_POINTS: usize = 512;

/// Frequencies: the cube `0 < |xi|_inf <= K` or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lattice {
    Cube(i32),
    List(Vec<[f64; 3]>),
}

impl Lattice {
    pub fn points(&self) -> Vec<[f64; 3]> {
        match self {
            Lattice::Cube(k) => cgolab::recon::integer_lattice(*k),
            Lattice::List(v) => v.clone(),
        }
    }
}

/// A validated config with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub experiment: String,
    pub grid: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub h_schedule: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_lattice: Option<Lattice>,
    pub coefficients: BTreeMap<String, Vec<Recipe>>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub thresholds: BTreeMap<String, f64>,
    pub options: BTreeMap<String, Value>,
}

impl Config {
    pub fn spec(&self) -> &'static Spec {
        registry::lookup(&self.experiment).expect("validated experiment")
    }

    pub fn threshold(&self, name: &str) -> f64 {
        self.thresholds[name]
    }

    pub fn num(&self, name: &str) -> f64 {
        self.options[name].as_f64().expect("validated number")
    }

    pub fn int(&self, name: &str) -> usize {
        self.options[name].as_u64().expect("validated integer") as usize
    }

    pub fn flag(&self, name: &str) -> bool {
        self.options[name].as_bool().expect("validated bool")
    }

    pub fn text(&self, name: &str) -> &str {
        self.options[name].as_str().expect("validated choice")
    }

    pub fn numbers(&self, name: &str) -> Vec<f64> {
        self.options[name].as_array().expect("validated list").iter().map(|v| v.as_f64().unwrap()).collect()
    }

    pub fn vector(&self, name: &str) -> [f64; 3] {
        let v = self.numbers(name);
        [v[0], v[1], v[2]]
    }

    pub fn recipes(&self, slot: &str) -> &[Recipe] {
        self.coefficients.get(slot).map_or(&[], |v| v.as_slice())
    }
}

fn suggestion(name: &str, candidates: &[&str]) -> String {
    match registry::suggest(name, candidates.iter().copied()) {
        Some(s) => format!(" (did you mean \"{s}\"?)"),
        None => String::new(),
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / r)
}

fn as_vec3(v: &Value) -> Option<[f64; 3]> {
    let a = v.as_array()?;
    if a.len() != 3 {
        return None;
    }
    Some([a[0].as_f64()?, a[1].as_f64()?, a[2].as_f64()?])
}

fn is_vector_slot(slot: &str) -> bool {
    !slot.starts_with('p')
}

fn holder_crease(gamma: f64, normal: [f64; 3]) -> Recipe {
    Recipe::Holder {
        holder: HolderSpec { gamma, center: [0.5; 3], radius: 0.35, amplitude: 1.0, normal: Some(normal) },
        direction: Some([1.0, 0.5, -1.0]),
    }
}

fn bump(radius: f64, amplitude: f64, direction: Option<[f64; 3]>) -> Recipe {
    Recipe::Bump { bump: BumpSpec { center: [0.5; 3], radius, amplitude }, direction }
}

/// Default recipes for a slot.
fn default_coefficients(spec: &Spec, gamma: Option<f64>, options: &BTreeMap<String, Value>) -> BTreeMap<String, Vec<Recipe>> {
    let mut out = BTreeMap::new();
    let g = gamma.unwrap_or(1.0);
    let xi_hat = options.get("xi").and_then(as_vec3).map(unit);
    match spec.name {
        "phase-rates" | "remainder-rates" => {
            if let Some(n) = xi_hat {
                out.insert("a".into(), vec![holder_crease(g, n)]);
            }
        }
        "recon-electric" => {
            out.insert("a".into(), vec![holder_crease(g, [0.0, 0.0, 1.0])]);
            out.insert("f1".into(), vec![bump(0.3, 1.0, Some([0.2, -0.1, 0.0]))]);
            out.insert("p1".into(), vec![bump(0.3, 0.2, None)]);
        }
        "pipeline" => {
            let v = bump(0.3, 0.5, Some([1.0, -0.6, 0.4]));
            out.insert("v1".into(), vec![v.clone()]);
            out.insert("v2".into(), vec![v]);
        }
        _ => {}
    }
    out
}

fn check_option(name: &str, kind: OptKind, v: &Value) -> Result<(), String> {
    let ok = match kind {
        OptKind::Number => v.as_f64().is_some_and(f64::is_finite),
        OptKind::Integer => v.as_u64().is_some(),
        OptKind::Bool => v.is_boolean(),
        OptKind::Choice(c) => {
            return match v.as_str() {
                Some(s) if c.contains(&s) => Ok(()),
                Some(s) => Err(format!("options.{name}: \"{s}\" is not one of {c:?}{}", suggestion(s, c))),
                None => Err(format!("options.{name}: expected one of {c:?}")),
            }
        }
        OptKind::Numbers => v.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(|x| x.as_f64().is_some())),
        OptKind::Vector => as_vec3(v).is_some(),
    };
    if ok {
        Ok(())
    } else {
        let what = match kind {
            OptKind::Number => "a finite number",
            OptKind::Integer => "a non-negative integer",
            OptKind::Bool => "true or false",
            OptKind::Numbers => "a non-empty list of numbers",
            OptKind::Vector => "a list of three numbers",
            OptKind::Choice(_) => unreachable!(),
        };
        Err(format!("options.{name}: expected {what}, got {v}"))
    }
}

/// Parses and validates config text. Every problem found is returned, not
/// just the first.
pub fn parse(text: &str) -> Result<Config, Vec<String>> {
    let root: Value = serde_json::from_str(text).map_err(|e| vec![format!("config is not valid JSON: {e}")])?;
    let Value::Object(obj) = root else {
        return Err(vec!["config must be a JSON object".into()]);
    };
    validate(&obj)
}

fn validate(obj: &Map<String, Value>) -> Result<Config, Vec<String>> {
    let mut errs = Vec::new();
    for k in obj.keys() {
        if !KEYS.contains(&k.as_str()) {
            errs.push(format!("unknown field \"{k}\"{}", suggestion(k, &KEYS)));
        }
    }
    let spec = match obj.get("experiment") {
        None => {
            errs.push("missing field \"experiment\"".into());
            None
        }
        Some(Value::String(name)) => {
            let s = registry::lookup(name);
            if s.is_none() {
                let names: Vec<&str> = registry::REGISTRY.iter().map(|s| s.name).collect();
                errs.push(format!("unknown experiment \"{name}\"{}", suggestion(name, &names)));
            }
            s
        }
        Some(v) => {
            errs.push(format!("experiment: expected a string, got {v}"));
            None
        }
    };

    let grid = match obj.get("grid") {
        None => spec.map(|s| s.grid),
        Some(v) => {
            let parsed = if let Some(n) = v.as_u64() {
                Some([n as usize; 3])
            } else if let Some(a) = v.as_array().filter(|a| a.len() == 3) {
                let n: Vec<Option<u64>> = a.iter().map(Value::as_u64).collect();
                n.iter().all(Option::is_some).then(|| [0, 1, 2].map(|d| n[d].unwrap() as usize))
            } else {
                None
            };
            if parsed.is_none() {
                errs.push(format!("grid: expected a point count or three of them, got {v}"));
            }
            parsed
        }
    };
    if let (Some(g), Some(s)) = (grid, spec) {
        if g.iter().any(|&n| n < s.min_points || n > MAX_POINTS) {
            errs.push(format!("grid: {g:?} outside {}..={MAX_POINTS} points per axis", s.min_points));
        }
        if s.cubic && (g[0] != g[1] || g[1] != g[2]) {
            errs.push(format!("grid: {} needs the same point count on every axis", s.name));
        }
    }

    let gamma = match obj.get("gamma") {
        None => spec.and_then(|s| s.gamma),
        Some(v) => match v.as_f64() {
            Some(g) => {
                if !(g > 0.0 && g <= 1.0) {
                    errs.push(format!("gamma: 0 < γ ≤ 1 violated (γ = {g})"));
                }
                if spec.is_some_and(|s| s.gamma.is_none()) {
                    errs.push(format!("gamma: not used by {}", spec.unwrap().name));
                }
                Some(g)
            }
            None => {
                errs.push(format!("gamma: expected a number, got {v}"));
                None
            }
        },
    };

    let seed = match obj.get("seed") {
        None => 0,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            errs.push(format!("seed: expected a non-negative integer, got {v}"));
            0
        }),
    };

    let output_dir = match obj.get("output_dir") {
        None => PathBuf::from(DEFAULT_OUTPUT),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(v) => {
            errs.push(format!("output_dir: expected a non-empty path, got {v}"));
            PathBuf::from(DEFAULT_OUTPUT)
        }
    };

    let Some(spec) = spec else {
        return Err(errs);
    };

    // options first: the default coefficients and the h checks read them
    let mut options: BTreeMap<String, Value> = spec
        .options
        .iter()
        .map(|(n, _, d)| (n.to_string(), serde_json::from_str(d).expect("registry default parses")))
        .collect();
    let option_names: Vec<&str> = spec.options.iter().map(|o| o.0).collect();
    match obj.get("options") {
        None => {}
        Some(Value::Object(m)) => {
            for (k, v) in m {
                match spec.options.iter().find(|o| o.0 == k) {
                    None => errs.push(format!(
                        "options: {} takes no option \"{k}\"{}",
                        spec.name,
                        suggestion(k, &option_names)
                    )),
                    Some(&(_, kind, _)) => match check_option(k, kind, v) {
                        Ok(()) => {
                            options.insert(k.clone(), v.clone());
                        }
                        Err(e) => errs.push(e),
                    },
                }
            }
        }
        Some(v) => errs.push(format!("options: expected an object, got {v}")),
    }
    for (name, v) in &options {
        let positive = ["theta0", "electric_theta0", "window", "probe_radius", "eps", "epsilon", "amplitude"];
        if positive.contains(&name.as_str()) && !v.as_f64().is_some_and(|x| x > 0.0) {
            errs.push(format!("options.{name}: must be positive"));
        }
        if ["quadrature", "oracle_quadrature"].contains(&name.as_str()) && !v.as_u64().is_some_and(|q| (4..=256).contains(&q)) {
            errs.push(format!("options.{name}: quadrature count must lie in 4..=256"));
        }
        if ["triples", "samples", "max_mode"].contains(&name.as_str()) && v.as_u64() == Some(0) {
            errs.push(format!("options.{name}: must be at least 1"));
        }
        if ["xi", "alpha"].contains(&name.as_str()) && as_vec3(v).is_some_and(|x| x == [0.0; 3]) {
            errs.push(format!("options.{name}: must be nonzero"));
        }
    }
    if let Some(t) = options.get("thetas").and_then(Value::as_array) {
        let t: Vec<f64> = t.iter().filter_map(Value::as_f64).collect();
        if t.len() < 2 || t.iter().any(|&x| !(x > 0.0)) {
            errs.push("options.thetas: need at least two positive values".into());
        }
    }
    if let (Some(f), Some(g)) = (options.get("fine").and_then(Value::as_u64), grid) {
        if (f as usize) <= g[0] || f as usize > MAX_POINTS {
            errs.push(format!("options.fine: {f} must exceed the coarse grid {} (at most {MAX_POINTS})", g[0]));
        }
    }

    let xi_lattice = match (obj.get("xi_lattice"), spec.lattice) {
        (None, None) => None,
        (None, Some(LatticeDefault::Cube(k))) => Some(Lattice::Cube(k)),
        (None, Some(LatticeDefault::List(l))) => Some(Lattice::List(l.to_vec())),
        (Some(_), None) => {
            errs.push(format!("xi_lattice: not used by {}", spec.name));
            None
        }
        (Some(v), Some(_)) => {
            if let Some(k) = v.as_i64() {
                if !(1..=MAX_CUBE).contains(&k) {
                    errs.push(format!("xi_lattice: cube size {k} outside 1..={MAX_CUBE}"));
                }
                Some(Lattice::Cube(k as i32))
            } else if let Some(a) = v.as_array() {
                let pts: Vec<Option<[f64; 3]>> = a.iter().map(as_vec3).collect();
                if a.is_empty() || pts.iter().any(Option::is_none) {
                    errs.push("xi_lattice: expected an integer or a non-empty list of 3-vectors".into());
                    None
                } else {
                    let pts: Vec<[f64; 3]> = pts.into_iter().map(Option::unwrap).collect();
                    if pts.iter().any(|x| *x == [0.0; 3]) {
                        errs.push("xi_lattice: zero frequency".into());
                    }
                    Some(Lattice::List(pts))
                }
            } else {
                errs.push(format!("xi_lattice: expected an integer or a list of 3-vectors, got {v}"));
                None
            }
        }
    };
    if spec.name == "pipeline" && matches!(xi_lattice, Some(Lattice::List(_))) {
        errs.push("xi_lattice: pipeline needs a cube size".into());
    }

    let h_schedule = match obj.get("h_schedule") {
        None => spec.h_schedule.to_vec(),
        Some(v) => match v.as_array().map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>()) {
            Some(Some(h)) => h,
            _ => {
                errs.push(format!("h_schedule: expected a list of numbers, got {v}"));
                spec.h_schedule.to_vec()
            }
        },
    };
    if spec.max_h == 0 && obj.contains_key("h_schedule") {
        errs.push(format!("h_schedule: not used by {}", spec.name));
    } else if spec.max_h > 0 {
        if h_schedule.len() < spec.min_h || h_schedule.len() > spec.max_h {
            errs.push(format!(
                "h_schedule: {} needs {}..={} values, got {}",
                spec.name,
                spec.min_h,
                spec.max_h,
                h_schedule.len()
            ));
        }
        if h_schedule.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
            errs.push("h_schedule: every h must lie in (0, 1)".into());
        }
        let mut sorted = h_schedule.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            errs.push("h_schedule: values must be distinct".into());
        }
        let mut freqs: Vec<[f64; 3]> = xi_lattice.as_ref().map(Lattice::points).unwrap_or_default();
        if let Some(x) = options.get("xi").and_then(as_vec3) {
            freqs.push(x);
        }
        let xmax = freqs.iter().map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).fold(0.0, f64::max);
        if let Some(&h) = h_schedule.iter().max_by(|a, b| a.total_cmp(b)) {
            if h * xmax >= 2.0 {
                errs.push(format!("h_schedule: h|ξ| = {:.3} ≥ 2 at h = {h}, |ξ| = {xmax:.3}", h * xmax));
            }
        }
    }

    let mut coefficients = default_coefficients(spec, gamma, &options);
    match obj.get("coefficients") {
        None => {}
        Some(Value::Object(m)) => {
            for (slot, v) in m {
                if !spec.coefficients.contains(&slot.as_str()) {
                    errs.push(format!(
                        "coefficients: {} has no slot \"{slot}\"{}",
                        spec.name,
                        suggestion(slot, spec.coefficients)
                    ));
                    continue;
                }
                let items = match v {
                    Value::Array(a) => a.clone(),
                    other => vec![other.clone()],
                };
                let mut recipes = Vec::new();
                for (i, item) in items.into_iter().enumerate() {
                    match serde_json::from_value::<Recipe>(item) {
                        Err(e) => errs.push(format!("coefficients.{slot}[{i}]: {e}")),
                        Ok(r) => {
                            if let Err(e) = check_recipe(&r, is_vector_slot(slot)) {
                                errs.push(format!("coefficients.{slot}[{i}]: {e}"));
                            }
                            recipes.push(r);
                        }
                    }
                }
                coefficients.insert(slot.clone(), recipes);
            }
        }
        Some(v) => errs.push(format!("coefficients: expected an object, got {v}")),
    }
    if ["phase-rates", "remainder-rates"].contains(&spec.name) && coefficients.get("a").is_none_or(Vec::is_empty) {
        errs.push(format!("coefficients.a: {} needs a magnetic potential", spec.name));
    }

    let mut thresholds: BTreeMap<String, f64> = spec.thresholds.iter().map(|(n, v)| (n.to_string(), *v)).collect();
    let tnames: Vec<&str> = spec.thresholds.iter().map(|t| t.0).collect();
    match obj.get("thresholds") {
        None => {}
        Some(Value::Object(m)) => {
            for (k, v) in m {
                if !tnames.contains(&k.as_str()) {
                    errs.push(format!("thresholds: {} has no threshold \"{k}\"{}", spec.name, suggestion(k, &tnames)));
                } else if let Some(x) = v.as_f64().filter(|x| x.is_finite() && *x >= 0.0) {
                    thresholds.insert(k.clone(), x);
                } else {
                    errs.push(format!("thresholds.{k}: expected a non-negative number, got {v}"));
                }
            }
        }
        Some(v) => errs.push(format!("thresholds: expected an object, got {v}")),
    }

    if !errs.is_empty() {
        return Err(errs);
    }
    Ok(Config {
        experiment: spec.name.to_string(),
        grid: grid.expect("checked above"),
        gamma,
        h_schedule: if spec.max_h == 0 { Vec::new() } else { h_schedule },
        xi_lattice,
        coefficients,
        seed,
        output_dir,
        thresholds,
        options,
    })
}

/// Recipe preconditions plus the slot's rank and support inside the unit box.
fn check_recipe(r: &Recipe, vector: bool) -> Result<(), String> {
    r.validate().map_err(|e| e.to_string())?;
    let c = r.center();
    let probe = if vector { r.vector_at(c).map(|_| ()) } else { r.scalar_at(c).map(|_| ()) };
    probe.map_err(|e| e.to_string())?;
    let margin = (0..3).map(|d| c[d].min(1.0 - c[d])).fold(f64::INFINITY, f64::min);
    if margin < r.support_radius() + 0.05 {
        return Err(format!(
            "support of radius {} about {c:?} must stay 0.05 inside the unit box",
            r.support_radius()
        ));
    }
    Ok(())
}
