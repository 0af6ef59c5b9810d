use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sigbudget::model::{CostFamily, DensityShape, ModelPrimitives, NoncogFamily, OutputFamily, TypeDistribution};
use sigbudget::riley_ode::StepControl;
use sigbudget::verifier::VerifyOptions;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{}: {field}: {message}", line_label(*line))]
    Schema {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{}: unknown {slot} family `{name}` (known: {known})", line_label(*line))]
    UnknownFamily {
        slot: String,
        name: String,
        known: String,
        line: Option<usize>,
    },
}

fn line_label(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}"),
        None => "config".to_string(),
    }
}

/// Family name plus its named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: String,
    pub t_lo: f64,
    pub t_hi: f64,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

/// A single budget or a sweep list; each entry is one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budget {
    Single(f64),
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    /// Type samples for schedules, structure checks and CSV rows.
    pub types: usize,
    /// Points per message axis in the IC grid.
    pub messages: usize,
    pub ic_types: usize,
    pub assumptions: usize,
    pub d1_messages: usize,
    pub d1_types: usize,
    pub reasonable_samples: usize,
    pub oracle_types: usize,
    pub oracle_signals: usize,
}

impl Default for Grids {
    fn default() -> Self {
        let v = VerifyOptions::default();
        Self {
            types: v.structure_types,
            messages: v.ic_messages,
            ic_types: v.ic_types,
            assumptions: 201,
            d1_messages: v.d1_messages,
            d1_types: v.d1_types,
            reasonable_samples: v.reasonable_samples,
            oracle_types: 400,
            oracle_signals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ic: f64,
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub foc: f64,
    pub bottom_foc: f64,
    pub indifference: f64,
    /// Allowed oracle gap, in grid steps.
    pub oracle_steps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let v = VerifyOptions::default();
        let c = StepControl::default();
        Self {
            ic: v.ic_tol,
            ode_rtol: c.rtol,
            ode_atol: c.atol,
            foc: v.foc_tol,
            bottom_foc: v.bottom_tol,
            indifference: v.indifference_tol,
            oracle_steps: 5.0,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Scalars precede tables so the serialized form is valid TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub budget: Budget,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub cost: FamilySpec,
    pub output: FamilySpec,
    pub noncog: FamilySpec,
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// 1-based line of `key` inside `[table]` (top level when `table` is
/// `None`); falls back to the table header.
fn locate(text: &str, table: Option<&str>, key: Option<&str>) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if current.as_deref() == table {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != table {
            continue;
        }
        if let Some(k) = key {
            if let Some(rest) = line.strip_prefix(k) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn schema(&self, table: Option<&str>, key: &str, message: impl Into<String>) -> ConfigError {
        let field = match table {
            Some(t) => format!("{t}.{key}"),
            None => key.to_string(),
        };
        ConfigError::Schema {
            field,
            line: locate(self.text, table, Some(key)),
            message: message.into(),
        }
    }

    fn unknown(&self, slot: &str, name: &str, known: &[&str]) -> ConfigError {
        ConfigError::UnknownFamily {
            slot: slot.to_string(),
            name: name.to_string(),
            known: known.join(", "),
            line: locate(self.text, Some(slot), Some("family")),
        }
    }

    /// Takes exactly the named parameters from `params`.
    fn params<const N: usize>(
        &self,
        slot: &str,
        params: &BTreeMap<String, f64>,
        names: [&str; N],
    ) -> Result<[f64; N], ConfigError> {
        if let Some(extra) = params.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(self.schema(Some(slot), extra, "unknown parameter for this family"));
        }
        let mut out = [0.0; N];
        for (slot_value, name) in out.iter_mut().zip(names) {
            let v = *params
                .get(name)
                .ok_or_else(|| self.schema(Some(slot), name, "missing parameter"))?;
            if !v.is_finite() {
                return Err(self.schema(Some(slot), name, "must be finite"));
            }
            *slot_value = v;
        }
        Ok(out)
    }
}

const COST_FAMILIES: [&str; 2] = ["power", "bilinear"];
const OUTPUT_FAMILIES: [&str; 2] = ["affine", "multiplicative"];
const NONCOG_FAMILIES: [&str; 2] = ["quadratic", "exponential"];
const DENSITY_FAMILIES: [&str; 2] = ["uniform", "truncated_exponential"];

impl RunConfig {
    /// Every budget in the order given; one job each.
    pub fn budgets(&self) -> Vec<f64> {
        match &self.budget {
            Budget::Single(m) => vec![*m],
            Budget::Sweep(ms) => ms.clone(),
        }
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self.budget, Budget::Sweep(_))
    }

    pub fn primitives(&self, budget: f64) -> ModelPrimitives {
        self.resolve("").expect("validated at parse time").0.with_budget(budget)
    }

    pub fn distribution(&self) -> TypeDistribution {
        self.resolve("").expect("validated at parse time").1
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.tolerances.ode_rtol,
            atol: self.tolerances.ode_atol,
            ..StepControl::default()
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            ic_types: self.grids.ic_types,
            ic_messages: self.grids.messages,
            ic_tol: self.tolerances.ic,
            structure_types: self.grids.types,
            foc_tol: self.tolerances.foc,
            bottom_tol: self.tolerances.bottom_foc,
            indifference_tol: self.tolerances.indifference,
            d1_messages: self.grids.d1_messages,
            d1_types: self.grids.d1_types,
            reasonable_samples: self.grids.reasonable_samples,
            seed: self.seed,
        }
    }

    /// Serializes to the same structured format `parse_config` reads.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable")
    }

    fn resolve(&self, text: &str) -> Result<(ModelPrimitives, TypeDistribution), ConfigError> {
        let ctx = Ctx { text };
        let cost = match self.cost.family.as_str() {
            "power" => {
                let [a, b] = ctx.params("cost", &self.cost.params, ["a", "b"])?;
                CostFamily::Power { a, b }
            }
            "bilinear" => {
                let [k] = ctx.params("cost", &self.cost.params, ["k"])?;
                CostFamily::Bilinear { k }
            }
            other => return Err(ctx.unknown("cost", other, &COST_FAMILIES)),
        };
        let output = match self.output.family.as_str() {
            "affine" => {
                let [gamma] = ctx.params("output", &self.output.params, ["gamma"])?;
                OutputFamily::Affine { gamma }
            }
            "multiplicative" => {
                let [gamma] = ctx.params("output", &self.output.params, ["gamma"])?;
                OutputFamily::Multiplicative { gamma }
            }
            other => return Err(ctx.unknown("output", other, &OUTPUT_FAMILIES)),
        };
        let noncog = match self.noncog.family.as_str() {
            "quadratic" => {
                let [k] = ctx.params("noncog", &self.noncog.params, ["k"])?;
                NoncogFamily::Quadratic { k }
            }
            "exponential" => {
                let [k] = ctx.params("noncog", &self.noncog.params, ["k"])?;
                NoncogFamily::Exponential { k }
            }
            other => return Err(ctx.unknown("noncog", other, &NONCOG_FAMILIES)),
        };
        let d = &self.distribution;
        let shape = match d.family.as_str() {
            "uniform" => {
                ctx.params("distribution", &d.params, [])?;
                DensityShape::Uniform
            }
            "truncated_exponential" => {
                let [rate] = ctx.params("distribution", &d.params, ["rate"])?;
                DensityShape::TruncatedExponential { rate }
            }
            other => return Err(ctx.unknown("distribution", other, &DENSITY_FAMILIES)),
        };
        if !(d.t_lo > 0.0 && d.t_lo.is_finite()) {
            return Err(ctx.schema(Some("distribution"), "t_lo", "must satisfy 0 < t_lo"));
        }
        if !(d.t_hi > d.t_lo && d.t_hi.is_finite()) {
            return Err(ctx.schema(Some("distribution"), "t_hi", "must satisfy t_lo < t_hi"));
        }
        let dist = TypeDistribution::new(d.t_lo, d.t_hi, shape)
            .map_err(|e| ctx.schema(Some("distribution"), "family", e.to_string()))?;
        let prims = ModelPrimitives::new(cost, output, noncog, self.alpha, 1.0);
        Ok((prims, dist))
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let ctx = Ctx { text };
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ctx.schema(None, "alpha", "must be a finite nonnegative number"));
        }
        let budgets = self.budgets();
        if budgets.is_empty() {
            return Err(ctx.schema(None, "budget", "sweep list is empty"));
        }
        if let Some(bad) = budgets.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(ctx.schema(None, "budget", format!("budget {bad} must be positive and finite")));
        }
        self.resolve(text)?;
        let g = &self.grids;
        let grid_minimums = [
            ("types", g.types, 2),
            ("messages", g.messages, 2),
            ("ic_types", g.ic_types, 2),
            ("assumptions", g.assumptions, 2),
            ("d1_messages", g.d1_messages, 2),
            ("d1_types", g.d1_types, 2),
            ("reasonable_samples", g.reasonable_samples, 1),
            ("oracle_types", g.oracle_types, 1),
            ("oracle_signals", g.oracle_signals, 10),
        ];
        for (name, value, min) in grid_minimums {
            if value < min {
                return Err(ctx.schema(Some("grids"), name, format!("must be at least {min}")));
            }
        }
        let t = &self.tolerances;
        let tolerances = [
            ("ic", t.ic),
            ("ode_rtol", t.ode_rtol),
            ("ode_atol", t.ode_atol),
            ("foc", t.foc),
            ("bottom_foc", t.bottom_foc),
            ("indifference", t.indifference),
            ("oracle_steps", t.oracle_steps),
        ];
        for (name, value) in tolerances {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ctx.schema(Some("tolerances"), name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Parses and validates a TOML run configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        ConfigError::Schema {
            field: backticked(&message).unwrap_or("<document>").to_string(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message,
        }
    })?;
    config.validate(text)?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "alpha = 1\nbudget = 2\n\n[cost]\nfamily = \"power\"\na = 2\nb = 2\n\n[output]\nfamily = \"affine\"\ngamma = 0\n\n[noncog]\nfamily = \"quadratic\"\nk = 1\n\n[distribution]\nfamily = \"uniform\"\nt_lo = 1\nt_hi = 3\n";

    #[test]
    fn locate_finds_keys_in_tables() {
        assert_eq!(locate(DOC, None, Some("alpha")), Some(1));
        assert_eq!(locate(DOC, Some("cost"), Some("b")), Some(7));
        assert_eq!(locate(DOC, Some("noncog"), Some("missing")), Some(13));
    }

    #[test]
    fn resolves_benchmark() {
        let c = parse_config(DOC).unwrap();
        assert_eq!(c.primitives(2.0), ModelPrimitives::quadratic_benchmark(2.0));
    }

    #[test]
    fn missing_parameter_names_field() {
        let doc = DOC.replace("b = 2\n", "");
        match parse_config(&doc).unwrap_err() {
            ConfigError::Schema { field, .. } => assert_eq!(field, "cost.b"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn extra_parameter_rejected() {
        let doc = DOC.replace("k = 1\n", "k = 1\nq = 3\n");
        match parse_config(&doc).unwrap_err() {
            ConfigError::Schema { field, line, .. } => {
                assert_eq!(field, "noncog.q");
                assert_eq!(line, Some(16));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn zero_tolerance_rejected() {
        let doc = format!("{DOC}\n[tolerances]\nfoc = 0\n");
        assert!(matches!(parse_config(&doc), Err(ConfigError::Schema { field, .. }) if field == "tolerances.foc"));
    }

    #[test]
    fn bad_support_rejected() {
        let doc = DOC.replace("t_hi = 3", "t_hi = 0.5");
        assert!(matches!(parse_config(&doc), Err(ConfigError::Schema { field, .. }) if field == "distribution.t_hi"));
    }
}
