//! Domain vocabulary: levels, factors, combinations and the experiment description.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Relative tolerance used for granularity membership checks.
pub const GRANULE_TOLERANCE: f64 = 1e-9;

/// Type tag shared by every level of a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelTag {
    Int,
    Real,
    Text,
}

impl LevelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelTag::Int => "int",
            LevelTag::Real => "float",
            LevelTag::Text => "string",
        }
    }

    pub fn parse(s: &str) -> Option<LevelTag> {
        match s {
            "int" => Some(LevelTag::Int),
            "float" | "real" => Some(LevelTag::Real),
            "string" | "text" => Some(LevelTag::Text),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, LevelTag::Text)
    }
}

/// A single level. Reals are always finite.
#[derive(Debug, Clone)]
pub enum LevelValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl LevelValue {
    /// Builds a real level, rejecting NaN and infinities.
    pub fn real(v: f64) -> Option<LevelValue> {
        v.is_finite().then_some(LevelValue::Real(if v == 0.0 { 0.0 } else { v }))
    }

    pub fn tag(&self) -> LevelTag {
        match self {
            LevelValue::Int(_) => LevelTag::Int,
            LevelValue::Real(_) => LevelTag::Real,
            LevelValue::Text(_) => LevelTag::Text,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            LevelValue::Int(v) => Some(*v as f64),
            LevelValue::Real(v) => Some(*v),
            LevelValue::Text(_) => None,
        }
    }

    /// Parses `text` as a level of the given tag.
    pub fn parse(tag: LevelTag, text: &str) -> Option<LevelValue> {
        let t = text.trim();
        match tag {
            LevelTag::Int => t.parse::<i64>().ok().map(LevelValue::Int),
            LevelTag::Real => t.parse::<f64>().ok().and_then(LevelValue::real),
            LevelTag::Text => Some(LevelValue::Text(text.to_string())),
        }
    }

    /// Numeric value converted to a level of `tag`, rounding for integers.
    pub fn from_f64(tag: LevelTag, v: f64) -> Option<LevelValue> {
        match tag {
            LevelTag::Int => {
                let r = v.round();
                (r.is_finite() && r.abs() < 9.0e15).then_some(LevelValue::Int(r as i64))
            }
            LevelTag::Real => LevelValue::real(v),
            LevelTag::Text => None,
        }
    }

    /// Ordering between values of the same tag; `None` across tags.
    pub fn compare(&self, other: &LevelValue) -> Option<Ordering> {
        match (self, other) {
            (LevelValue::Int(a), LevelValue::Int(b)) => Some(a.cmp(b)),
            (LevelValue::Real(a), LevelValue::Real(b)) => a.partial_cmp(b),
            (LevelValue::Text(a), LevelValue::Text(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl PartialEq for LevelValue {
    fn eq(&self, other: &Self) -> bool {
        self.compare(other) == Some(Ordering::Equal)
    }
}

impl Eq for LevelValue {}

impl Hash for LevelValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            LevelValue::Int(v) => {
                0u8.hash(state);
                v.hash(state);
            }
            LevelValue::Real(v) => {
                1u8.hash(state);
                // -0.0 and 0.0 compare equal, so they must hash equal.
                (if *v == 0.0 { 0.0f64 } else { *v }).to_bits().hash(state);
            }
            LevelValue::Text(v) => {
                2u8.hash(state);
                v.hash(state);
            }
        }
    }
}

impl fmt::Display for LevelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelValue::Int(v) => write!(f, "{v}"),
            LevelValue::Real(v) => write!(f, "{v}"),
            LevelValue::Text(v) => f.write_str(v),
        }
    }
}

/// The set of levels a factor may take.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelDomain {
    Enumeration {
        tag: LevelTag,
        levels: Vec<LevelValue>,
    },
    Range {
        tag: LevelTag,
        lower: f64,
        upper: f64,
        legal_granularity: f64,
        sample_granularity: f64,
    },
}

impl LevelDomain {
    pub fn tag(&self) -> LevelTag {
        match self {
            LevelDomain::Enumeration { tag, .. } | LevelDomain::Range { tag, .. } => *tag,
        }
    }

    /// Checks the domain invariants, returning a description of the first violation.
    pub fn check(&self) -> Result<(), String> {
        match self {
            LevelDomain::Enumeration { tag, levels } => {
                if levels.is_empty() {
                    return Err("enumeration is empty".into());
                }
                for (i, l) in levels.iter().enumerate() {
                    if l.tag() != *tag {
                        return Err(format!("level {l} is not of type {}", tag.as_str()));
                    }
                    if levels[..i].contains(l) {
                        return Err(format!("duplicate level {l}"));
                    }
                }
                Ok(())
            }
            LevelDomain::Range {
                tag,
                lower,
                upper,
                legal_granularity: g,
                sample_granularity: s,
            } => {
                if !tag.is_numeric() {
                    return Err("range requires a numeric type".into());
                }
                if !(lower.is_finite() && upper.is_finite()) {
                    return Err("range bounds must be finite".into());
                }
                if lower > upper {
                    return Err(format!("range start {lower} exceeds end {upper}"));
                }
                if !(g.is_finite() && *g > 0.0) {
                    return Err("legalGranular must be positive".into());
                }
                if !(s.is_finite() && *s > 0.0) {
                    return Err("sampleGranular must be positive".into());
                }
                if !is_multiple(upper - lower, *g) {
                    return Err(format!(
                        "range {lower}..{upper} is not a whole number of legal granules ({g})"
                    ));
                }
                if !is_multiple(*s, *g) {
                    return Err(format!(
                        "sampleGranular {s} is not a multiple of legalGranular {g}"
                    ));
                }
                if *tag == LevelTag::Int
                    && (lower.fract() != 0.0 || upper.fract() != 0.0 || g.fract() != 0.0)
                {
                    return Err("int range needs integral bounds and granularity".into());
                }
                Ok(())
            }
        }
    }
}

fn is_multiple(x: f64, g: f64) -> bool {
    let k = (x / g).round();
    (x - k * g).abs() <= GRANULE_TOLERANCE * g
}

/// Whether a factor is a target-system setting or a condition of use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Control,
    Noise,
}

/// Time quantity with the unit it was written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub amount: f64,
    pub units: TimeUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Millis,
    Secs,
    Mins,
    Hours,
}

impl TimeUnit {
    pub fn parse(s: &str) -> Option<TimeUnit> {
        match s {
            "ms" | "millis" => Some(TimeUnit::Millis),
            "s" | "sec" | "secs" | "seconds" => Some(TimeUnit::Secs),
            "min" | "mins" | "minutes" => Some(TimeUnit::Mins),
            "h" | "hour" | "hours" => Some(TimeUnit::Hours),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Millis => "ms",
            TimeUnit::Secs => "secs",
            TimeUnit::Mins => "mins",
            TimeUnit::Hours => "hours",
        }
    }

    fn factor(self) -> f64 {
        match self {
            TimeUnit::Millis => 1e-3,
            TimeUnit::Secs => 1.0,
            TimeUnit::Mins => 60.0,
            TimeUnit::Hours => 3600.0,
        }
    }
}

impl TimeSpec {
    pub fn secs(amount: f64) -> TimeSpec {
        TimeSpec { amount, units: TimeUnit::Secs }
    }

    pub fn seconds(&self) -> f64 {
        self.amount * self.units.factor()
    }
}

/// External command template. `{level}` and `{factor}` are substituted per call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    pub program: String,
    pub args: Vec<String>,
}

/// How a wrapper function is located: an explicit command or a library/function pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommandSpec {
    Command(CommandTemplate),
    FuncLocation { dll: String, func: String },
}

impl CommandSpec {
    /// Command line for this spec. A `FuncLocation` runs `dll` with `func` as first
    /// argument, followed by `{level}` when used for adaptation.
    pub fn template(&self, adaptation: bool) -> CommandTemplate {
        match self {
            CommandSpec::Command(t) => t.clone(),
            CommandSpec::FuncLocation { dll, func } => {
                let mut args = vec![func.clone()];
                if adaptation {
                    args.push("{level}".into());
                }
                CommandTemplate { program: dll.clone(), args }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    pub role: Role,
    pub domain: LevelDomain,
    pub time_to_adapt: TimeSpec,
    pub adaptation: Option<CommandSpec>,
}

impl Factor {
    pub fn new(name: &str, role: Role, domain: LevelDomain) -> Factor {
        Factor {
            name: name.to_string(),
            role,
            domain,
            time_to_adapt: TimeSpec::secs(0.0),
            adaptation: None,
        }
    }

    /// Integer or real range with the given granularities.
    pub fn range(name: &str, tag: LevelTag, lower: f64, upper: f64, legal: f64, sample: f64) -> Factor {
        Factor::new(
            name,
            Role::Control,
            LevelDomain::Range {
                tag,
                lower,
                upper,
                legal_granularity: legal,
                sample_granularity: sample,
            },
        )
    }

    pub fn enumeration(name: &str, levels: Vec<LevelValue>) -> Factor {
        let tag = levels.first().map(LevelValue::tag).unwrap_or(LevelTag::Text);
        Factor::new(name, Role::Control, LevelDomain::Enumeration { tag, levels })
    }

    pub fn with_role(mut self, role: Role) -> Factor {
        self.role = role;
        self
    }

    pub fn tag(&self) -> LevelTag {
        self.domain.tag()
    }
}

/// Levels a strategy should sample: the enumeration verbatim, or the range stepped by
/// sample granularity with the upper bound always included.
pub fn enumerate_levels(factor: &Factor) -> Vec<LevelValue> {
    match &factor.domain {
        LevelDomain::Enumeration { levels, .. } => levels.clone(),
        LevelDomain::Range {
            tag,
            lower,
            upper,
            legal_granularity,
            sample_granularity,
        } => {
            let mut out = Vec::new();
            let tol = GRANULE_TOLERANCE * legal_granularity;
            let mut k = 0u64;
            loop {
                let v = lower + k as f64 * sample_granularity;
                if v > upper - tol {
                    break;
                }
                out.extend(LevelValue::from_f64(*tag, v));
                k += 1;
            }
            out.extend(LevelValue::from_f64(*tag, *upper));
            out
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("level {level} ({found}) does not match type {expected} of factor {factor}")]
pub struct TagMismatch {
    pub factor: String,
    pub level: String,
    pub expected: &'static str,
    pub found: &'static str,
}

/// Membership test: enumeration contains `v`, or `v` sits on a legal granule of the range.
pub fn level_in_domain(factor: &Factor, v: &LevelValue) -> Result<bool, TagMismatch> {
    let tag = factor.tag();
    let compatible = v.tag() == tag || (tag == LevelTag::Real && v.tag() == LevelTag::Int);
    if !compatible {
        return Err(TagMismatch {
            factor: factor.name.clone(),
            level: v.to_string(),
            expected: tag.as_str(),
            found: v.tag().as_str(),
        });
    }
    Ok(match &factor.domain {
        LevelDomain::Enumeration { levels, .. } => levels.contains(v),
        LevelDomain::Range {
            lower,
            upper,
            legal_granularity: g,
            ..
        } => {
            let x = v.as_f64().unwrap_or(f64::NAN);
            let tol = GRANULE_TOLERANCE * g;
            x >= lower - tol && x <= upper + tol && is_multiple(x - lower, *g)
        }
    })
}

/// One level per control factor plus one per noise factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Combination {
    pub configuration: Vec<(String, LevelValue)>,
    pub condition: Vec<(String, LevelValue)>,
}

impl Combination {
    /// Splits `levels` (in the order of `factors`) by role.
    pub fn from_levels(factors: &[Factor], levels: &[LevelValue]) -> Combination {
        let mut c = Combination::default();
        for (f, l) in factors.iter().zip(levels) {
            let entry = (f.name.clone(), l.clone());
            match f.role {
                Role::Control => c.configuration.push(entry),
                Role::Noise => c.condition.push(entry),
            }
        }
        c
    }

    pub fn get(&self, name: &str) -> Option<&LevelValue> {
        self.configuration
            .iter()
            .chain(&self.condition)
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    pub fn set(&mut self, name: &str, value: LevelValue) -> bool {
        for (n, v) in self.configuration.iter_mut().chain(self.condition.iter_mut()) {
            if n == name {
                *v = value;
                return true;
            }
        }
        false
    }

    /// Levels in the order of `factors`; `None` if any is missing.
    pub fn levels_for(&self, factors: &[Factor]) -> Option<Vec<LevelValue>> {
        factors.iter().map(|f| self.get(&f.name).cloned()).collect()
    }

    /// Checks one in-domain level per declared factor.
    pub fn check(&self, factors: &[Factor]) -> Result<(), String> {
        let n = self.configuration.len() + self.condition.len();
        if n != factors.len() {
            return Err(format!("combination has {n} levels for {} factors", factors.len()));
        }
        for f in factors {
            let v = self
                .get(&f.name)
                .ok_or_else(|| format!("no level for factor {}", f.name))?;
            if !level_in_domain(f, v).map_err(|e| e.to_string())? {
                return Err(format!("level {v} outside the domain of {}", f.name));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (n, v) in self.configuration.iter().chain(&self.condition) {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggregationMode {
    SingleMetric(String),
    WeightedSum(Vec<(String, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationSpec {
    pub mode: AggregationMode,
    pub normalizer: Option<f64>,
}

/// One step or threshold term of a synthetic response.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTerm {
    pub factor: String,
    pub threshold: f64,
    pub offset: f64,
}

/// Ground-truth response for one metric of the synthetic target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntheticMetric {
    pub name: String,
    pub intercept: f64,
    pub linear: Vec<(String, f64)>,
    pub quadratic: Vec<(String, f64)>,
    pub interaction: Vec<(String, String, f64)>,
    pub steps: Vec<StepTerm>,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTargetSpec {
    pub metrics: Vec<SyntheticMetric>,
    pub fail_probability: f64,
    pub seed: u64,
    /// Simulated duration of one trial.
    pub trial_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Commands {
        run: CommandSpec,
        recover: Option<CommandSpec>,
        validate: Option<CommandSpec>,
    },
    Synthetic(SyntheticTargetSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resources {
    pub time_limit: TimeSpec,
    pub machines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSettings {
    pub start: Option<Vec<(String, LevelValue)>>,
    pub budget: usize,
    pub initial_temperature: Option<f64>,
    pub cooling: f64,
    pub span: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaguchiSettings {
    pub levels: u8,
    pub replications: usize,
    pub interactions: Vec<(String, String)>,
    pub significance: f64,
    pub scaling: Vec<(String, f64)>,
    pub array: Option<String>,
    pub allocation: Vec<(String, usize)>,
    pub level_maps: Vec<(String, Vec<LevelValue>)>,
    pub alpha_star: Option<f64>,
    pub centre_points: usize,
    pub steps: Vec<(String, f64)>,
    pub stop_after_phase1: bool,
}

impl Default for TaguchiSettings {
    fn default() -> Self {
        TaguchiSettings {
            levels: 3,
            replications: 4,
            interactions: Vec::new(),
            significance: 0.05,
            scaling: Vec::new(),
            array: None,
            allocation: Vec::new(),
            level_maps: Vec::new(),
            alpha_star: None,
            centre_points: 6,
            steps: Vec::new(),
            stop_after_phase1: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Grid {
        replications: usize,
    },
    Random {
        budget: usize,
    },
    HillClimb {
        start: Option<Vec<(String, LevelValue)>>,
        budget: usize,
    },
    Annealing(AnnealSettings),
    Taguchi(TaguchiSettings),
    Sequence {
        budget: Option<usize>,
        steps: Vec<StrategySpec>,
    },
}

impl StrategySpec {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Grid { .. } => "grid",
            StrategySpec::Random { .. } => "random",
            StrategySpec::HillClimb { .. } => "hillClimb",
            StrategySpec::Annealing(_) => "annealing",
            StrategySpec::Taguchi(_) => "taguchi",
            StrategySpec::Sequence { .. } => "sequence",
        }
    }
}

/// Complete declarative description of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDescription {
    pub factors: Vec<Factor>,
    pub metrics: Vec<String>,
    pub target: TargetSpec,
    pub resources: Resources,
    pub trial_timeout: TimeSpec,
    pub max_recovers: u32,
    pub seed: u64,
    pub strategy: StrategySpec,
    pub aggregation: AggregationSpec,
}

impl ExperimentDescription {
    pub fn control_factors(&self) -> impl Iterator<Item = &Factor> {
        self.factors.iter().filter(|f| f.role == Role::Control)
    }

    pub fn noise_factors(&self) -> impl Iterator<Item = &Factor> {
        self.factors.iter().filter(|f| f.role == Role::Noise)
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    /// Factors with control factors first, then noise factors, each in declaration order.
    pub fn ordered_factors(&self) -> Vec<Factor> {
        self.control_factors().chain(self.noise_factors()).cloned().collect()
    }
}
