//! Experiment configuration documents.
//!
//! Grammar: `[experiment]` section headers, `key = value` lines, full-line
//! comments starting with `#`, blank lines ignored. Values reuse the
//! environment/mixture spec grammar and exact rationals (`3/10`). Parsing is
//! strict: unknown sections, unknown keys, duplicate keys, and malformed
//! values are errors carrying the offending line number.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::env::{parse_bracket_list, parse_env_spec, Environment};
use crate::error::{Error, Result};
use crate::machine::GridMap;
use crate::mixture::{parse_mixture_spec, MixtureModel};
use crate::numeric::{parse_rational, rat, rat_to_f64, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Confirm,
    Bounds,
    Continuous,
    Universal,
    Invariance,
    Predict,
}

pub const EXPERIMENT_NAMES: [(&str, ExperimentKind); 6] = [
    ("confirm", ExperimentKind::Confirm),
    ("bounds", ExperimentKind::Bounds),
    ("continuous", ExperimentKind::Continuous),
    ("universal", ExperimentKind::Universal),
    ("invariance", ExperimentKind::Invariance),
    ("predict", ExperimentKind::Predict),
];

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        EXPERIMENT_NAMES.iter().find(|(_, k)| *k == self).unwrap().0
    }

    pub fn from_name(s: &str) -> Option<ExperimentKind> {
        EXPERIMENT_NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, k)| *k)
    }
}

/// Posterior-confirmation table over observations `1^n`, n = 0..=n_max.
#[derive(Debug, Clone)]
pub struct ConfirmConfig {
    pub n_max: u64,
    /// The epsilon of the tail hypothesis "bias at least 1-eps".
    pub eps: Rat,
    /// Prior mass of the point hypothesis "bias exactly 1" in the mixed
    /// prior; the rest stays on the uniform density.
    pub atom_mass: Rat,
}

/// Cumulative divergence of a finite i.i.d. mixture against one of its own
/// components as truth.
#[derive(Debug, Clone)]
pub struct BoundsConfig {
    pub mixture: MixtureModel,
    pub truth_index: usize,
    pub n_max: usize,
    /// Monte-Carlo sample count (float mode).
    pub samples: u64,
    /// Horizons reported in float mode; exact mode reports every n.
    pub grid: Vec<usize>,
}

/// Divergence of a Bernoulli truth against the mixture over the whole
/// parameter interval, with the Fisher-information bound.
#[derive(Debug, Clone)]
pub struct ContinuousConfig {
    pub theta0: Rat,
    pub prior: crate::divergence::ParamPrior,
    pub grid: Vec<usize>,
    pub slack_nats: f64,
}

/// Program enumeration census, table invariants, and complexity trends.
#[derive(Debug, Clone)]
pub struct UniversalConfig {
    pub l_max: u32,
    pub t_max: u64,
    pub max_output: usize,
    /// Export one CSV row per program (disables the table cache).
    pub export_programs: bool,
    /// Depth of the exported per-string table.
    pub strings_depth: usize,
    /// Report shortest exact printers of the binary expansions of 1..=this.
    pub k_trend_max: u64,
}

/// Pushforward of the grid prior under a reparameterization.
#[derive(Debug, Clone)]
pub struct InvarianceConfig {
    pub b_max: u64,
    pub map: GridMap,
}

/// Step-by-step predictive report of the enumeration mixture along a fixed
/// bit sequence.
#[derive(Debug, Clone)]
pub struct PredictConfig {
    pub l_max: u32,
    pub t_max: u64,
    pub max_output: usize,
    pub x: Vec<u8>,
}

#[derive(Debug, Clone)]
pub enum ExperimentConfig {
    Confirm(ConfirmConfig),
    Bounds(BoundsConfig),
    Continuous(ContinuousConfig),
    Universal(UniversalConfig),
    Invariance(InvarianceConfig),
    Predict(PredictConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentConfig::Confirm(_) => ExperimentKind::Confirm,
            ExperimentConfig::Bounds(_) => ExperimentKind::Bounds,
            ExperimentConfig::Continuous(_) => ExperimentKind::Continuous,
            ExperimentConfig::Universal(_) => ExperimentKind::Universal,
            ExperimentConfig::Invariance(_) => ExperimentKind::Invariance,
            ExperimentConfig::Predict(_) => ExperimentKind::Predict,
        }
    }
}

/// A section's keys with their line numbers, consumed by the per-experiment
/// builders so leftovers can be reported as unknown keys.
struct Section {
    name: &'static str,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, String)> {
        self.take(key).ok_or_else(|| {
            Error::parse(format!(
                "section [{}] is missing required key `{key}`",
                self.name
            ))
        })
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(Error::parse_at(
                line,
                format!("unknown key `{key}` in section [{}]", self.name),
            ));
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::parse_at(
                    line_no,
                    format!("unterminated section header {line:?}"),
                ));
            }
            let name = line[1..line.len() - 1].trim().to_string();
            let Some(kind) = ExperimentKind::from_name(&name) else {
                let known: Vec<&str> = EXPERIMENT_NAMES.iter().map(|(n, _)| *n).collect();
                return Err(Error::parse_at(
                    line_no,
                    format!(
                        "unknown section [{name}]; expected one of {}",
                        known.join(", ")
                    ),
                ));
            };
            if sections.contains_key(&name) {
                return Err(Error::parse_at(
                    line_no,
                    format!("duplicate section [{name}]"),
                ));
            }
            sections.insert(
                name.clone(),
                Section {
                    name: kind.name(),
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse_at(
                line_no,
                format!("expected `key = value` or a [section] header, got {line:?}"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::parse_at(line_no, "empty key before `=`".to_string()));
        }
        let Some(section_name) = &current else {
            return Err(Error::parse_at(
                line_no,
                format!("key `{key}` appears before any [section] header"),
            ));
        };
        let section = sections.get_mut(section_name).unwrap();
        if section.entries.contains_key(key) {
            return Err(Error::parse_at(
                line_no,
                format!("duplicate key `{key}` in section [{section_name}]"),
            ));
        }
        section
            .entries
            .insert(key.to_string(), (line_no, value.to_string()));
    }
    Ok(sections)
}

fn parse_u64_at(line: usize, key: &str, v: &str) -> Result<u64> {
    v.trim().parse::<u64>().map_err(|_| {
        Error::parse_at(
            line,
            format!("key `{key}` needs a nonnegative integer, got {v:?}"),
        )
    })
}

fn parse_bool_at(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::parse_at(
            line,
            format!("key `{key}` needs true or false, got {v:?}"),
        )),
    }
}

fn parse_rat_at(line: usize, key: &str, v: &str) -> Result<Rat> {
    parse_rational(v).map_err(|e| Error::parse_at(line, format!("key `{key}`: {e}")))
}

fn parse_grid_at(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    let items =
        parse_bracket_list(v).map_err(|e| Error::parse_at(line, format!("key `{key}`: {e}")))?;
    let mut grid = Vec::with_capacity(items.len());
    for item in items {
        let n = item.trim().parse::<usize>().map_err(|_| {
            Error::parse_at(line, format!("key `{key}`: {item:?} is not a horizon"))
        })?;
        grid.push(n);
    }
    if grid.is_empty() {
        return Err(Error::parse_at(
            line,
            format!("key `{key}` needs at least one horizon"),
        ));
    }
    Ok(grid)
}

/// Bit-string values: `ones:N`, `zeros:N`, or `bits:0110...`.
fn parse_bits_at(line: usize, key: &str, v: &str) -> Result<Vec<u8>> {
    let v = v.trim();
    let parsed = if let Some(n) = v.strip_prefix("ones:") {
        n.trim().parse::<usize>().ok().map(|n| vec![1u8; n])
    } else if let Some(n) = v.strip_prefix("zeros:") {
        n.trim().parse::<usize>().ok().map(|n| vec![0u8; n])
    } else if let Some(b) = v.strip_prefix("bits:") {
        b.trim()
            .chars()
            .map(|c| match c {
                '0' => Some(0u8),
                '1' => Some(1u8),
                _ => None,
            })
            .collect::<Option<Vec<u8>>>()
            .filter(|bits| !bits.is_empty())
    } else {
        None
    };
    parsed.ok_or_else(|| {
        Error::parse_at(
            line,
            format!("key `{key}` needs `ones:N`, `zeros:N`, or `bits:0101...`, got {v:?}"),
        )
    })
}

fn build_confirm(mut s: Section) -> Result<ConfirmConfig> {
    let (line, v) = s.require("n_max")?;
    let n_max = parse_u64_at(line, "n_max", &v)?;
    let eps = match s.take("eps") {
        Some((line, v)) => {
            let eps = parse_rat_at(line, "eps", &v)?;
            if eps <= Rat::zero() || eps >= Rat::one() {
                return Err(Error::parse_at(
                    line,
                    format!("eps must lie in (0,1), got {v}"),
                ));
            }
            eps
        }
        None => rat(1, 100),
    };
    let atom_mass = match s.take("atom_mass") {
        Some((line, v)) => {
            let m = parse_rat_at(line, "atom_mass", &v)?;
            if m <= Rat::zero() || m >= Rat::one() {
                return Err(Error::parse_at(
                    line,
                    format!("atom_mass must lie in (0,1), got {v}"),
                ));
            }
            m
        }
        None => rat(1, 2),
    };
    s.finish()?;
    Ok(ConfirmConfig {
        n_max,
        eps,
        atom_mass,
    })
}

fn build_bounds(mut s: Section) -> Result<BoundsConfig> {
    let (line, v) = s.require("mixture")?;
    let mixture = parse_mixture_spec(&v).map_err(|e| e.at_line(line))?;
    let (line, v) = s.require("truth")?;
    let truth: Environment = parse_env_spec(&v).map_err(|e| e.at_line(line))?;
    let truth_spec = truth.spec_string();
    let truth_index = mixture
        .components()
        .iter()
        .position(|c| c.spec_string() == truth_spec)
        .ok_or_else(|| {
            Error::parse_at(
                line,
                format!("truth {truth_spec} is not a mixture component; the divergence bound needs the truth inside the class"),
            )
        })?;
    let n_max = match s.take("n_max") {
        Some((line, v)) => parse_u64_at(line, "n_max", &v)? as usize,
        None => 200,
    };
    if n_max == 0 {
        return Err(Error::parse("n_max must be at least 1".to_string()));
    }
    let samples = match s.take("samples") {
        Some((line, v)) => parse_u64_at(line, "samples", &v)?,
        None => 100_000,
    };
    let grid = match s.take("grid") {
        Some((line, v)) => parse_grid_at(line, "grid", &v)?,
        None => vec![n_max],
    };
    s.finish()?;
    Ok(BoundsConfig {
        mixture,
        truth_index,
        n_max,
        samples,
        grid,
    })
}

fn build_continuous(mut s: Section) -> Result<ContinuousConfig> {
    let (line, v) = s.require("theta0")?;
    let theta0 = parse_rat_at(line, "theta0", &v)?;
    let prior = match s.take("prior") {
        Some((line, v)) => match v.trim() {
            "uniform" => crate::divergence::ParamPrior::Uniform,
            "jeffreys" => crate::divergence::ParamPrior::Jeffreys,
            other => {
                return Err(Error::parse_at(
                    line,
                    format!("prior must be uniform or jeffreys, got {other:?}"),
                ))
            }
        },
        None => crate::divergence::ParamPrior::Uniform,
    };
    let grid = match s.take("grid") {
        Some((line, v)) => parse_grid_at(line, "grid", &v)?,
        None => vec![100, 1000, 10_000],
    };
    let slack_nats = match s.take("slack") {
        Some((line, v)) => rat_to_f64(&parse_rat_at(line, "slack", &v)?),
        None => 1.0,
    };
    s.finish()?;
    Ok(ContinuousConfig {
        theta0,
        prior,
        grid,
        slack_nats,
    })
}

fn take_budgets(s: &mut Section) -> Result<(u32, u64, usize)> {
    let l_max = match s.take("lmax") {
        Some((line, v)) => parse_u64_at(line, "lmax", &v)? as u32,
        None => 6,
    };
    let t_max = match s.take("tmax") {
        Some((line, v)) => parse_u64_at(line, "tmax", &v)?,
        None => 500,
    };
    let max_output = match s.take("max_output") {
        Some((line, v)) => parse_u64_at(line, "max_output", &v)? as usize,
        None => 256,
    };
    Ok((l_max, t_max, max_output))
}

fn build_universal(mut s: Section) -> Result<UniversalConfig> {
    let (l_max, t_max, max_output) = take_budgets(&mut s)?;
    let export_programs = match s.take("export_programs") {
        Some((line, v)) => parse_bool_at(line, "export_programs", &v)?,
        None => false,
    };
    let strings_depth = match s.take("strings_depth") {
        Some((line, v)) => parse_u64_at(line, "strings_depth", &v)? as usize,
        None => 8,
    };
    let k_trend_max = match s.take("k_trend_max") {
        Some((line, v)) => parse_u64_at(line, "k_trend_max", &v)?,
        None => 64,
    };
    s.finish()?;
    Ok(UniversalConfig {
        l_max,
        t_max,
        max_output,
        export_programs,
        strings_depth,
        k_trend_max,
    })
}

fn build_invariance(mut s: Section) -> Result<InvarianceConfig> {
    let b_max = match s.take("b_max") {
        Some((line, v)) => parse_u64_at(line, "b_max", &v)?,
        None => 20,
    };
    let (line, v) = s.require("map")?;
    let map = match v.trim() {
        "identity" => GridMap::Identity,
        "square" => GridMap::Square,
        "sqrt" => GridMap::SqrtRounded,
        other => {
            return Err(Error::parse_at(
                line,
                format!("map must be identity, square, or sqrt, got {other:?}"),
            ))
        }
    };
    s.finish()?;
    Ok(InvarianceConfig { b_max, map })
}

fn build_predict(mut s: Section) -> Result<PredictConfig> {
    let (l_max, t_max, max_output) = take_budgets(&mut s)?;
    let (line, v) = s.require("x")?;
    let x = parse_bits_at(line, "x", &v)?;
    s.finish()?;
    Ok(PredictConfig {
        l_max,
        t_max,
        max_output,
        x,
    })
}

/// Parse the section for `kind` out of a config document. Other (known)
/// sections may coexist in the same file and are ignored for this run.
pub fn parse_config(text: &str, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut sections = split_sections(text)?;
    let section = sections
        .remove(kind.name())
        .ok_or_else(|| Error::parse(format!("config has no [{}] section", kind.name())))?;
    Ok(match kind {
        ExperimentKind::Confirm => ExperimentConfig::Confirm(build_confirm(section)?),
        ExperimentKind::Bounds => ExperimentConfig::Bounds(build_bounds(section)?),
        ExperimentKind::Continuous => ExperimentConfig::Continuous(build_continuous(section)?),
        ExperimentKind::Universal => ExperimentConfig::Universal(build_universal(section)?),
        ExperimentKind::Invariance => ExperimentConfig::Invariance(build_invariance(section)?),
        ExperimentKind::Predict => ExperimentConfig::Predict(build_predict(section)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_confirm_config_parses() {
        let cfg = parse_config("[confirm]\nn_max = 100\n", ExperimentKind::Confirm).unwrap();
        let ExperimentConfig::Confirm(c) = cfg else {
            panic!()
        };
        assert_eq!(c.n_max, 100);
        assert_eq!(c.eps, rat(1, 100));
        assert_eq!(c.atom_mass, rat(1, 2));
    }

    #[test]
    fn comments_blanks_and_other_sections_are_fine() {
        let text =
            "# top comment\n\n[confirm]\nn_max = 3\neps = 1/10\n\n[invariance]\nmap = identity\n";
        let cfg = parse_config(text, ExperimentKind::Confirm).unwrap();
        let ExperimentConfig::Confirm(c) = cfg else {
            panic!()
        };
        assert_eq!(c.eps, rat(1, 10));
        let cfg = parse_config(text, ExperimentKind::Invariance).unwrap();
        let ExperimentConfig::Invariance(i) = cfg else {
            panic!()
        };
        assert_eq!(i.b_max, 20);
        assert_eq!(i.map, GridMap::Identity);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err =
            parse_config("[confirm]\nn_max = 3\nbogus = 1\n", ExperimentKind::Confirm).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn structural_errors_carry_lines() {
        for (text, needle) in [
            ("n_max = 1\n", "before any [section]"),
            ("[confirm]\nn_max\n", "key = value"),
            ("[nonsense]\n", "unknown section"),
            (
                "[confirm]\nn_max = 1\n[confirm]\nn_max = 2\n",
                "duplicate section",
            ),
            ("[confirm]\nn_max = 1\nn_max = 2\n", "duplicate key"),
            ("[confirm\nn_max = 1\n", "unterminated"),
        ] {
            let err = parse_config(text, ExperimentKind::Confirm).unwrap_err();
            assert!(err.to_string().contains(needle), "{text:?} -> {err}");
        }
        let err =
            parse_config("[bounds]\ntruth = bernoulli:1/2\n", ExperimentKind::Bounds).unwrap_err();
        assert!(err.to_string().contains("mixture"), "{err}");
    }

    #[test]
    fn bounds_section_resolves_truth_index() {
        let text = "[bounds]\nmixture = mix:[(bernoulli:3/10, 1/2), (bernoulli:7/10, 1/2)]\ntruth = bernoulli:7/10\nn_max = 50\n";
        let ExperimentConfig::Bounds(b) = parse_config(text, ExperimentKind::Bounds).unwrap()
        else {
            panic!()
        };
        assert_eq!(b.truth_index, 1);
        assert_eq!(b.n_max, 50);
        assert_eq!(b.grid, vec![50]);

        let text = "[bounds]\nmixture = mix:[(bernoulli:3/10, 1/2)]\ntruth = bernoulli:1/3\n";
        let err = parse_config(text, ExperimentKind::Bounds).unwrap_err();
        assert!(err.to_string().contains("not a mixture component"), "{err}");
    }

    #[test]
    fn malformed_rational_names_field() {
        let err = parse_config(
            "[bounds]\nmixture = mix:[(bernoulli:3/0, 1/2)]\ntruth = bernoulli:3/0\n",
            ExperimentKind::Bounds,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("zero") || msg.contains("3/0"), "{msg}");
        let err =
            parse_config("[continuous]\ntheta0 = x/y\n", ExperimentKind::Continuous).unwrap_err();
        assert!(err.to_string().contains("theta0"), "{err}");
    }

    #[test]
    fn continuous_defaults() {
        let ExperimentConfig::Continuous(c) =
            parse_config("[continuous]\ntheta0 = 3/10\n", ExperimentKind::Continuous).unwrap()
        else {
            panic!()
        };
        assert_eq!(c.grid, vec![100, 1000, 10_000]);
        assert_eq!(c.slack_nats, 1.0);
        let err = parse_config(
            "[continuous]\ntheta0 = 1/2\ngrid = [100, oops]\n",
            ExperimentKind::Continuous,
        )
        .unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn predict_bit_strings() {
        let ExperimentConfig::Predict(p) =
            parse_config("[predict]\nx = ones:5\n", ExperimentKind::Predict).unwrap()
        else {
            panic!()
        };
        assert_eq!(p.x, vec![1; 5]);
        assert_eq!(p.l_max, 6);
        let ExperimentConfig::Predict(p) = parse_config(
            "[predict]\nx = bits:0101\nlmax = 4\ntmax = 99\n",
            ExperimentKind::Predict,
        )
        .unwrap() else {
            panic!()
        };
        assert_eq!(p.x, vec![0, 1, 0, 1]);
        assert_eq!((p.l_max, p.t_max), (4, 99));
        assert!(parse_config("[predict]\nx = 0101\n", ExperimentKind::Predict).is_err());
        assert!(parse_config("[predict]\nx = bits:012\n", ExperimentKind::Predict).is_err());
    }

    #[test]
    fn missing_section_is_an_error() {
        let err = parse_config("[confirm]\nn_max = 1\n", ExperimentKind::Bounds).unwrap_err();
        assert!(err.to_string().contains("[bounds]"), "{err}");
    }
}
