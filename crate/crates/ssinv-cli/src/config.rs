//! Run configuration: a flat INI-style file with five sections.
//!
//! ```ini
//! [model]
//! type = beta            ; beta | brownian
//! delta_hat = 0.1        ; beta: linear drift coefficient
//! sigma = 0.2            ; Gaussian coefficient (brownian: > 0)
//! alpha = 3              ; beta: tail decay
//! beta = 1               ; beta: scale
//! varpi = 0.1            ; beta: jump intensity
//! lambda = 1.5           ; beta: small-jump exponent, (0,3) \ {1,2}
//! ; brownian instead takes: drift, sigma
//!
//! [cost]
//! c = 10                 ; proportional order cost
//! k = 10                 ; fixed order cost (0 selects the barrier policy)
//! q = 0.03               ; discount rate
//! f = quadratic          ; quadratic | linear
//! ; linear additionally takes: holding, backorder (rates per unit)
//!
//! [solver]               ; optional
//! n_terms = 2000         ; scale-function series truncation
//! g_tol = 1e-7           ; absolute tolerance on G(s*,S*); default 1e-8 * K
//!
//! [sim]                  ; required by `simulate`, refines `check`
//! n_paths = 10000
//! time_step = 1e-3
//! jump_cutoff_eps = 1e-3
//! horizon = 220
//! seed = 7
//! antithetic = true      ; optional, default true
//! x0 = 0                 ; optional: start level for the cost estimates
//! exit_x = 1             ; optional: start for the exit functionals
//! exit_level = 0         ; optional: exit barrier
//!
//! [output]               ; optional
//! dir = out
//! x_min = -5
//! x_max = 5
//! x_step = 0.05
//! ```
//!
//! Comments start at `;` or `#`. Numbers are decimal with scientific
//! notation allowed, parsed locale-independently. Unknown sections and
//! keys are rejected so typos cannot silently fall back to defaults.
//! Command-line flags `--out`, `--x-min/--x-max/--x-step`, and `--seed`
//! override their configuration counterparts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ssinv_core::cost::CostFn;
use ssinv_core::{CostModel, HoldingCost, Model, SimConfig};

/// CLI failure classes, mapped onto the process exit codes: unusable
/// configuration or environment exits 2, numerical failure on a valid
/// configuration exits 3 (a failed `check` run exits 1 separately).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Numerical(m) => write!(f, "numerical: {m}"),
        }
    }
}

impl From<ssinv_core::Error> for CliError {
    fn from(e: ssinv_core::Error) -> Self {
        match e {
            ssinv_core::Error::InvalidParameter(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

// ----------------------------------------------------------------------
// INI scanning.
// ----------------------------------------------------------------------

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_ini(text: &str) -> CliResult<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let uncommented = match raw.find([';', '#']) {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = uncommented.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return config_err(format!("line {lineno}: unterminated section header"));
            };
            let name = name.trim();
            if name.is_empty() {
                return config_err(format!("line {lineno}: empty section name"));
            }
            if sections.contains_key(name) {
                return config_err(format!("line {lineno}: duplicate section [{name}]"));
            }
            sections.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
        } else if let Some((key, value)) = line.split_once('=') {
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return config_err(format!("line {lineno}: expected `key = value`"));
            }
            let Some(section) = &current else {
                return config_err(format!("line {lineno}: key `{key}` outside any [section]"));
            };
            let map = sections.get_mut(section).expect("section just inserted");
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return config_err(format!(
                    "line {lineno}: duplicate key `{key}` in [{section}]"
                ));
            }
        } else {
            return config_err(format!(
                "line {lineno}: expected `key = value` or `[section]`, got `{line}`"
            ));
        }
    }
    Ok(sections)
}

/// Allowed keys per section; anything else is a hard error.
const SCHEMA: &[(&str, &[&str])] = &[
    (
        "model",
        &["type", "delta_hat", "sigma", "alpha", "beta", "varpi", "lambda", "drift"],
    ),
    ("cost", &["c", "k", "q", "f", "holding", "backorder"]),
    ("solver", &["n_terms", "g_tol"]),
    (
        "sim",
        &[
            "n_paths",
            "time_step",
            "jump_cutoff_eps",
            "horizon",
            "seed",
            "antithetic",
            "x0",
            "exit_x",
            "exit_level",
        ],
    ),
    ("output", &["dir", "x_min", "x_max", "x_step"]),
];

fn check_schema(sections: &Sections) -> CliResult<()> {
    for (name, map) in sections {
        let Some((_, allowed)) = SCHEMA.iter().find(|(s, _)| s == name) else {
            return config_err(format!("unknown section [{name}]"));
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return config_err(format!("unknown key `{key}` in [{name}]"));
            }
        }
    }
    Ok(())
}

/// Typed view of one section with contextual error messages.
struct Section<'a> {
    name: &'a str,
    map: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.and_then(|m| m.get(key)).map(String::as_str)
    }

    fn require(&self, key: &str) -> CliResult<&'a str> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing key `{key}` in [{}]", self.name)))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, raw: &str) -> CliResult<T> {
        raw.parse().map_err(|_| {
            CliError::Config(format!(
                "key `{key}` in [{}]: cannot parse `{raw}` as {}",
                self.name,
                std::any::type_name::<T>()
            ))
        })
    }

    fn require_f64(&self, key: &str) -> CliResult<f64> {
        let raw = self.require(key)?;
        self.parse(key, raw)
    }

    fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.get(key) {
            Some(raw) => Ok(Some(self.parse(key, raw)?)),
            None => Ok(None),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    fn require_usize(&self, key: &str) -> CliResult<usize> {
        let raw = self.require(key)?;
        self.parse(key, raw)
    }

    fn require_u64(&self, key: &str) -> CliResult<u64> {
        let raw = self.require(key)?;
        self.parse(key, raw)
    }

    fn bool_or(&self, key: &str, default: bool) -> CliResult<bool> {
        match self.get(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(raw) => config_err(format!(
                "key `{key}` in [{}]: expected true or false, got `{raw}`",
                self.name
            )),
            None => Ok(default),
        }
    }

    fn exists(&self) -> bool {
        self.map.is_some()
    }
}

// ----------------------------------------------------------------------
// Typed configuration.
// ----------------------------------------------------------------------

/// Cost parameters kept in raw form so sweeps can rebuild the cost
/// model with a substituted `C` or `K` (the tilted slope floor of the
/// linear cost depends on `C·q`, so the holding spec cannot be shared).
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub c: f64,
    pub k: f64,
    pub q: f64,
    kind: CostKind,
}

#[derive(Debug, Clone)]
enum CostKind {
    Quadratic,
    Linear { holding: f64, backorder: f64 },
}

/// Simulation settings: the core configuration plus the probe points
/// used by `simulate` and `check`.
#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    pub cfg: SimConfig,
    pub x0: f64,
    pub exit_x: f64,
    pub exit_level: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    fn validate(&self) -> CliResult<()> {
        if !self.min.is_finite() || !self.max.is_finite() || !(self.step > 0.0) {
            return config_err(format!(
                "grid needs finite bounds and a positive step, got [{}, {}] step {}",
                self.min, self.max, self.step
            ));
        }
        if self.max < self.min {
            return config_err(format!(
                "grid bounds are reversed: x_min = {}, x_max = {}",
                self.min, self.max
            ));
        }
        if (self.max - self.min) / self.step > 200_000.0 {
            return config_err(format!(
                "grid would hold {} points; refusing",
                ((self.max - self.min) / self.step) as u64
            ));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug)]
pub struct RunConfig {
    pub model: Model,
    pub cost: CostSpec,
    pub n_terms: usize,
    g_tol: Option<f64>,
    pub sim: Option<SimSettings>,
    pub out_dir: PathBuf,
    pub grid: GridSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let sections = parse_ini(&text)?;
        check_schema(&sections)?;
        let section = |name: &'static str| Section {
            name,
            map: sections.get(name),
        };

        let model_sec = section("model");
        if !model_sec.exists() {
            return config_err("missing [model] section");
        }
        let model = match model_sec.require("type")? {
            "beta" => {
                for key in ["drift"] {
                    if model_sec.get(key).is_some() {
                        return config_err(format!("key `{key}` is not a beta-family parameter"));
                    }
                }
                Model::BetaFamily {
                    delta_hat: model_sec.require_f64("delta_hat")?,
                    sigma: model_sec.f64_or("sigma", 0.0)?,
                    alpha: model_sec.require_f64("alpha")?,
                    beta: model_sec.require_f64("beta")?,
                    varpi: model_sec.require_f64("varpi")?,
                    lambda: model_sec.require_f64("lambda")?,
                }
            }
            "brownian" => {
                for key in ["delta_hat", "alpha", "beta", "varpi", "lambda"] {
                    if model_sec.get(key).is_some() {
                        return config_err(format!("key `{key}` is not a brownian parameter"));
                    }
                }
                Model::BrownianDrift {
                    drift: model_sec.require_f64("drift")?,
                    sigma: model_sec.require_f64("sigma")?,
                }
            }
            other => {
                return config_err(format!(
                    "model type must be `beta` or `brownian`, got `{other}`"
                ))
            }
        };
        model.validate()?;

        let cost_sec = section("cost");
        if !cost_sec.exists() {
            return config_err("missing [cost] section");
        }
        let kind = match cost_sec.get("f").unwrap_or("quadratic") {
            "quadratic" => {
                for key in ["holding", "backorder"] {
                    if cost_sec.get(key).is_some() {
                        return config_err(format!(
                            "key `{key}` only applies to the linear cost"
                        ));
                    }
                }
                CostKind::Quadratic
            }
            "linear" => {
                let holding = cost_sec.require_f64("holding")?;
                let backorder = cost_sec.require_f64("backorder")?;
                if !(holding > 0.0) || !(backorder > 0.0) {
                    return config_err(format!(
                        "linear cost rates must be positive, got holding = {holding}, \
                         backorder = {backorder}"
                    ));
                }
                CostKind::Linear { holding, backorder }
            }
            other => {
                return config_err(format!(
                    "cost type must be `quadratic` or `linear`, got `{other}`"
                ))
            }
        };
        let cost = CostSpec {
            c: cost_sec.require_f64("c")?,
            k: cost_sec.require_f64("k")?,
            q: cost_sec.require_f64("q")?,
            kind,
        };

        let solver_sec = section("solver");
        let n_terms = solver_sec.usize_or("n_terms", 2_000)?;
        let g_tol = solver_sec.opt_f64("g_tol")?;
        if let Some(t) = g_tol {
            if !(t > 0.0) {
                return config_err(format!("g_tol must be positive, got {t}"));
            }
        }

        let sim_sec = section("sim");
        let sim = if sim_sec.exists() {
            let cfg = SimConfig {
                n_paths: sim_sec.require_usize("n_paths")?,
                dt: sim_sec.require_f64("time_step")?,
                eps: sim_sec.require_f64("jump_cutoff_eps")?,
                horizon: sim_sec.require_f64("horizon")?,
                seed: sim_sec.require_u64("seed")?,
                antithetic: sim_sec.bool_or("antithetic", true)?,
            };
            Some(SimSettings {
                cfg,
                x0: sim_sec.f64_or("x0", 0.0)?,
                exit_x: sim_sec.f64_or("exit_x", 1.0)?,
                exit_level: sim_sec.f64_or("exit_level", 0.0)?,
            })
        } else {
            None
        };

        let out_sec = section("output");
        let out_dir = PathBuf::from(out_sec.get("dir").unwrap_or("."));
        let grid = GridSpec {
            min: out_sec.f64_or("x_min", -5.0)?,
            max: out_sec.f64_or("x_max", 5.0)?,
            step: out_sec.f64_or("x_step", 0.05)?,
        };
        grid.validate()?;

        Ok(RunConfig {
            model,
            cost,
            n_terms,
            g_tol,
            sim,
            out_dir,
            grid,
        })
    }

    /// Fold the command-line overrides in, validating the result.
    pub fn with_overrides(
        mut self,
        out: Option<PathBuf>,
        x_min: Option<f64>,
        x_max: Option<f64>,
        x_step: Option<f64>,
        seed: Option<u64>,
    ) -> CliResult<Self> {
        if let Some(dir) = out {
            self.out_dir = dir;
        }
        if let Some(v) = x_min {
            self.grid.min = v;
        }
        if let Some(v) = x_max {
            self.grid.max = v;
        }
        if let Some(v) = x_step {
            self.grid.step = v;
        }
        self.grid.validate()?;
        if let Some(s) = seed {
            match &mut self.sim {
                Some(sim) => sim.cfg.seed = s,
                None => return config_err("--seed given but the file has no [sim] section"),
            }
        }
        Ok(self)
    }

    /// Build the cost model from the configured parameters.
    pub fn cost_model(&self) -> CliResult<CostModel> {
        self.cost_model_with(self.cost.c, self.cost.k)
    }

    /// Build the cost model with a substituted `C` or `K` (sweeps).
    pub fn cost_model_with(&self, c: f64, k: f64) -> CliResult<CostModel> {
        let q = self.cost.q;
        let holding = match self.cost.kind {
            CostKind::Quadratic => HoldingCost::Quadratic,
            CostKind::Linear { holding, backorder } => {
                let f: CostFn = Arc::new(move |x: f64| {
                    if x >= 0.0 {
                        holding * x
                    } else {
                        -backorder * x
                    }
                });
                let f_prime: CostFn =
                    Arc::new(move |x: f64| if x >= 0.0 { holding } else { -backorder });
                HoldingCost::PiecewiseC1 {
                    f,
                    f_prime,
                    kinks: vec![0.0],
                    turning_point: 0.0,
                    slope_floor: holding + c * q,
                    slope_from: 0.0,
                    growth_degree: 1,
                }
            }
        };
        CostModel::new(c, k, q, holding).map_err(Into::into)
    }

    /// Threshold-equation tolerance: configured, or `1e-8·K`.
    pub fn g_tol(&self, k: f64) -> f64 {
        self.g_tol.unwrap_or(1e-8 * k)
    }

    /// Probe points for `simulate`/`check`: `(x0, exit_x, exit_level,
    /// seed)`, falling back to `(0, 1, 0, 1)` without a [sim] section.
    pub fn probe(&self) -> (f64, f64, f64, u64) {
        match &self.sim {
            Some(s) => (s.x0, s.exit_x, s.exit_level, s.cfg.seed),
            None => (0.0, 1.0, 0.0, 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn load_str(body: &str) -> CliResult<RunConfig> {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(body.as_bytes()).unwrap();
        RunConfig::load(file.path())
    }

    const REFERENCE: &str = "\
[model]
type = beta
delta_hat = 0.1
sigma = 0.2
alpha = 3
beta = 1
varpi = 0.1
lambda = 1.5

[cost]
c = 10
k = 10
q = 0.03
f = quadratic
";

    #[test]
    fn reference_config_parses_with_defaults() {
        let cfg = load_str(REFERENCE).unwrap();
        assert!(matches!(cfg.model, Model::BetaFamily { sigma, .. } if sigma == 0.2));
        assert_eq!(cfg.n_terms, 2_000);
        assert_eq!(cfg.g_tol(10.0), 1e-7);
        assert!(cfg.sim.is_none());
        assert_eq!(cfg.out_dir, PathBuf::from("."));
        assert_eq!(cfg.grid.points().len(), 201);
        let cost = cfg.cost_model().unwrap();
        assert_eq!(cost.c(), 10.0);
        assert_eq!(cost.f(2.0), 4.0);
    }

    #[test]
    fn comments_whitespace_and_scientific_notation_are_accepted() {
        let cfg = load_str(
            "[model]\ntype = brownian   ; inline comment\n  drift = 5e-2\nsigma = 0.3\n\
             # full-line comment\n[cost]\nc = 1e1\nk = 0\nq = 3e-2\n\
             [solver]\nn_terms = 50\ng_tol = 1e-9\n",
        )
        .unwrap();
        assert!(matches!(cfg.model, Model::BrownianDrift { drift, .. } if drift == 0.05));
        assert_eq!(cfg.cost.c, 10.0);
        assert_eq!(cfg.g_tol(0.0), 1e-9);
    }

    #[test]
    fn unknown_keys_sections_and_duplicates_are_rejected() {
        let cases = [
            ("[model]\ntype = beta\nxdelta = 1\n", "unknown key"),
            ("[modle]\ntype = beta\n", "unknown section"),
            ("[model]\ntype = beta\ntype = beta\n", "duplicate key"),
            ("[model]\n[model]\n", "duplicate section"),
            ("type = beta\n", "outside any"),
            ("[model\ntype = beta\n", "unterminated"),
            ("[model]\njust words\n", "expected `key = value`"),
        ];
        for (body, needle) in cases {
            let err = load_str(body).unwrap_err();
            let CliError::Config(msg) = err else {
                panic!("expected config error for {body:?}");
            };
            assert!(msg.contains(needle), "{msg:?} missing {needle:?}");
        }
    }

    #[test]
    fn model_parameters_are_cross_checked_by_type() {
        let err = load_str("[model]\ntype = brownian\ndrift = 1\nsigma = 1\nalpha = 3\n[cost]\nc=1\nk=1\nq=0.1\n")
            .unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("not a brownian parameter")));
        // Core validation runs at load: the subordinator exclusion.
        let err = load_str(
            "[model]\ntype = beta\ndelta_hat = -0.1\nsigma = 0\nalpha = 3\nbeta = 1\n\
             varpi = 0.1\nlambda = 1.5\n[cost]\nc=1\nk=1\nq=0.1\n",
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn linear_cost_builds_a_validated_piecewise_model() {
        let body = "\
[model]
type = beta
delta_hat = 0.1
sigma = 0.2
alpha = 3
beta = 1
varpi = 0.1
lambda = 1.5

[cost]
c = 1
k = 5
q = 0.03
f = linear
holding = 2
backorder = 3
";
        let cfg = load_str(body).unwrap();
        let cost = cfg.cost_model().unwrap();
        assert_eq!(cost.f(2.0), 4.0);
        assert_eq!(cost.f(-2.0), 6.0);
        // Backorder rate below C·q leaves the tilted cost monotone: the
        // declared turning point fails core validation.
        let steep = body.replace("backorder = 3", "backorder = 0.02");
        let cfg = load_str(&steep).unwrap();
        assert!(cfg.cost_model().is_err());
    }

    #[test]
    fn overrides_apply_and_are_validated() {
        let cfg = load_str(REFERENCE)
            .unwrap()
            .with_overrides(
                Some(PathBuf::from("elsewhere")),
                Some(-1.0),
                Some(1.0),
                Some(0.5),
                None,
            )
            .unwrap();
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.grid.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let err = load_str(REFERENCE)
            .unwrap()
            .with_overrides(None, Some(2.0), Some(-2.0), None, None)
            .unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("reversed")));
        let err = load_str(REFERENCE)
            .unwrap()
            .with_overrides(None, None, None, None, Some(9))
            .unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("[sim]")));
    }

    #[test]
    fn sim_section_maps_onto_the_core_configuration() {
        let body = format!(
            "{REFERENCE}\n[sim]\nn_paths = 500\ntime_step = 0.01\njump_cutoff_eps = 1e-3\n\
             horizon = 50\nseed = 11\nantithetic = false\nx0 = 0.5\n"
        );
        let cfg = load_str(&body).unwrap();
        let sim = cfg.sim.unwrap();
        assert_eq!(sim.cfg.n_paths, 500);
        assert_eq!(sim.cfg.seed, 11);
        assert!(!sim.cfg.antithetic);
        assert_eq!(cfg.probe(), (0.5, 1.0, 0.0, 11));
    }
}
