//! Experiment configuration: a flat TOML file merged with command-line flags.
//!
//! ```toml
//! case = "m1"
//! kernel = "singular"
//! epsilon = 0.01
//! h_list = "2^-3..2^-7"
//! solver = "normal"
//! ```
//!
//! Grid sizes are either numbers or `2^-k` literals. `h_list` also accepts
//! a range `2^-a..2^-b` (every power of two in between) or an array. Flags
//! override file values; setting one of `epsilon`/`epsilon_list` (or
//! `h`/`h_list`) by flag drops the other from the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ltn_core::{BfgsOptions, Cubic, Interval, KernelFamily, Solver};
use serde::{Deserialize, Serialize};

/// Named experiments. The first six map to coupled test problems; the
/// other two run the horizon sweep and the property checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    Patch,
    M1,
    M2,
    A1,
    A2,
    ModelingSweep,
    PropertySuite,
    Custom,
}

impl CaseKind {
    pub const ALL: [CaseKind; 8] = [
        CaseKind::Patch,
        CaseKind::M1,
        CaseKind::M2,
        CaseKind::A1,
        CaseKind::A2,
        CaseKind::ModelingSweep,
        CaseKind::PropertySuite,
        CaseKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Patch => "patch",
            CaseKind::M1 => "m1",
            CaseKind::M2 => "m2",
            CaseKind::A1 => "a1",
            CaseKind::A2 => "a2",
            CaseKind::ModelingSweep => "modeling-sweep",
            CaseKind::PropertySuite => "property-suite",
            CaseKind::Custom => "custom",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['.', '_', '-', ' '], "");
        CaseKind::ALL
            .into_iter()
            .find(|c| c.name().replace('-', "") == key)
            .ok_or_else(|| {
                let names: Vec<&str> = CaseKind::ALL.iter().map(|c| c.name()).collect();
                anyhow!("unknown case '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// Parses a grid size: a positive decimal or `2^-k` (also `2^(-k)`).
pub fn parse_h(s: &str) -> Result<f64> {
    let t = s.trim();
    let h = if let Some(exp) = t.strip_prefix("2^") {
        let exp = exp.trim().trim_start_matches('(').trim_end_matches(')');
        let k: i32 = exp
            .parse()
            .with_context(|| format!("bad exponent in grid size '{s}'"))?;
        2f64.powi(k)
    } else {
        t.parse::<f64>().with_context(|| format!("bad grid size '{s}'"))?
    };
    if !(h.is_finite() && h > 0.0 && h < 1.0) {
        bail!("grid size '{s}' must lie in (0, 1)");
    }
    Ok(h)
}

/// Parses `2^-a..2^-b` or a comma-separated list. The result is sorted
/// from coarse to fine.
pub fn parse_h_list(s: &str) -> Result<Vec<f64>> {
    let t = s.trim();
    let list = if let Some((lo, hi)) = t.split_once("..") {
        let exponent = |v: &str| -> Result<i32> {
            let v = v.trim();
            let e = v
                .strip_prefix("2^")
                .ok_or_else(|| anyhow!("range bound '{v}' is not of the form 2^-k"))?;
            e.trim_start_matches('(')
                .trim_end_matches(')')
                .parse()
                .with_context(|| format!("bad range bound '{v}'"))
        };
        let (a, b) = (exponent(lo)?, exponent(hi)?);
        (a.min(b)..=a.max(b))
            .map(|k| parse_h(&format!("2^{k}")))
            .collect::<Result<Vec<_>>>()?
    } else {
        t.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(parse_h)
            .collect::<Result<Vec<_>>>()?
    };
    normalize_h_list(list)
}

fn normalize_h_list(mut list: Vec<f64>) -> Result<Vec<f64>> {
    if list.is_empty() {
        bail!("the h list is empty");
    }
    list.sort_by(|a, b| b.total_cmp(a));
    if list.windows(2).any(|w| w[0] == w[1]) {
        bail!("the h list contains duplicates");
    }
    Ok(list)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridValue {
    Number(f64),
    Text(String),
}

impl GridValue {
    fn value(&self) -> Result<f64> {
        match self {
            GridValue::Number(h) => parse_h(&h.to_string()),
            GridValue::Text(s) => parse_h(s),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridList {
    Items(Vec<GridValue>),
    Text(String),
}

impl GridList {
    fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridList::Items(items) => normalize_h_list(items.iter().map(GridValue::value).collect::<Result<_>>()?),
            GridList::Text(s) => parse_h_list(s),
        }
    }
}

/// Keys accepted in the configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    case: Option<String>,
    kernel: Option<String>,
    epsilon: Option<f64>,
    epsilon_list: Option<Vec<f64>>,
    h: Option<GridValue>,
    h_list: Option<GridList>,
    solver: Option<String>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    jobs: Option<usize>,
    dump_matrices: Option<bool>,
    /// Cubic coefficients `[c0, c1, c2, c3]` for `custom` and, optionally,
    /// the modeling sweep.
    coefficients: Option<[f64; 4]>,
    /// Local forcing on the part of Ω_l in the global interaction layer for
    /// the modeling sweep: `"zero"` or `"full"`.
    local_forcing: Option<String>,
    /// Layout override: `[a, b]` of the nonlocal interior ω_n.
    omega_n: Option<[f64; 2]>,
    /// Layout override: `[Γ_c, Γ_D]`.
    omega_l: Option<[f64; 2]>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid configuration file")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Values given on the command line, already split into typed strings.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<String>,
    pub kernel: Option<String>,
    pub epsilon: Option<f64>,
    pub epsilon_list: Option<Vec<f64>>,
    pub h: Option<String>,
    pub h_list: Option<String>,
    pub solver: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub dump_matrices: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalForcingChoice {
    Zero,
    Full,
}

/// A validated experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub case: CaseKind,
    pub kernel: KernelFamily,
    /// Horizons, in the order given.
    pub epsilons: Vec<f64>,
    /// Grid sizes, coarse to fine.
    pub h_list: Vec<f64>,
    pub solver: Solver,
    pub bfgs: BfgsOptions,
    pub seed: u64,
    pub coefficients: Option<Cubic>,
    pub local_forcing: LocalForcingChoice,
    pub omega_n: Option<Interval>,
    pub omega_l: Option<Interval>,
    pub dump_matrices: bool,
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool choose.
    #[serde(skip)]
    pub jobs: usize,
}

pub const DEFAULT_EPSILON: f64 = 0.065;
pub const DEFAULT_SEED: u64 = 20_190_806;

fn interval(pair: [f64; 2], key: &str) -> Result<Interval> {
    Interval::new(pair[0], pair[1]).map_err(|e| anyhow!("{key}: {e}"))
}

impl ExperimentConfig {
    /// Merges `file` and `flags`; flags win.
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self> {
        if file.epsilon.is_some() && file.epsilon_list.is_some() {
            bail!("the configuration file sets both epsilon and epsilon_list");
        }
        if flags.epsilon.is_some() && flags.epsilon_list.is_some() {
            bail!("--epsilon and --epsilon-list conflict");
        }
        if file.h.is_some() && file.h_list.is_some() {
            bail!("the configuration file sets both h and h_list");
        }
        if flags.h.is_some() && flags.h_list.is_some() {
            bail!("--h and --h-list conflict");
        }

        let case: CaseKind = flags.case.or(file.case).as_deref().unwrap_or("patch").parse()?;
        let kernel: KernelFamily = flags
            .kernel
            .or(file.kernel)
            .as_deref()
            .unwrap_or("integrable")
            .parse()
            .map_err(|e| anyhow!("{e}"))?;
        let solver: Solver = flags
            .solver
            .or(file.solver)
            .as_deref()
            .unwrap_or("normal")
            .parse()
            .map_err(|e| anyhow!("{e}"))?;

        let epsilons = if let Some(e) = flags.epsilon {
            vec![e]
        } else if let Some(list) = flags.epsilon_list {
            list
        } else if let Some(e) = file.epsilon {
            vec![e]
        } else if let Some(list) = file.epsilon_list {
            list
        } else {
            vec![DEFAULT_EPSILON]
        };
        if epsilons.is_empty() {
            bail!("the epsilon list is empty");
        }
        if let Some(e) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            bail!("horizon {e} must be positive");
        }

        let h_list = if let Some(h) = flags.h {
            vec![parse_h(&h)?]
        } else if let Some(list) = flags.h_list {
            parse_h_list(&list)?
        } else if let Some(h) = file.h {
            vec![h.value()?]
        } else if let Some(list) = file.h_list {
            list.values()?
        } else {
            bail!("no grid size given (set h or h_list)");
        };

        let mut bfgs = BfgsOptions::default();
        if let Some(tol) = flags.tol.or(file.tol) {
            if !(tol > 0.0) {
                bail!("tolerance {tol} must be positive");
            }
            bfgs.tol = tol;
        }
        if let Some(n) = flags.max_iter.or(file.max_iter) {
            bfgs.max_iter = n;
        }

        let coefficients = file.coefficients.map(Cubic);
        if case == CaseKind::Custom && coefficients.is_none() {
            bail!("case custom needs coefficients = [c0, c1, c2, c3] in the configuration file");
        }
        let local_forcing = match file.local_forcing.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("zero") => LocalForcingChoice::Zero,
            Some("full") => LocalForcingChoice::Full,
            Some(other) => bail!("unknown local_forcing '{other}' (expected zero or full)"),
        };

        Ok(Self {
            case,
            kernel,
            epsilons,
            h_list,
            solver,
            bfgs,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            coefficients,
            local_forcing,
            omega_n: file.omega_n.map(|p| interval(p, "omega_n")).transpose()?,
            omega_l: file.omega_l.map(|p| interval(p, "omega_l")).transpose()?,
            dump_matrices: flags.dump_matrices || file.dump_matrices.unwrap_or(false),
            output_dir: flags
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("ltn-output")),
            jobs: flags.jobs.or(file.jobs).unwrap_or(0),
        })
    }

    /// Reads the optional file at `path` and applies `flags`.
    pub fn load(path: Option<&Path>, flags: Overrides) -> Result<Self> {
        let file = path.map(FileConfig::load).transpose()?.unwrap_or_default();
        Self::resolve(file, flags)
    }
}
