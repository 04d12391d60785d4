//! Reading and writing experiment descriptions (XML, rooted at `<ACT>`).
//!
//! Every error carries the element path at which it was detected, e.g.
//! `ACT/factors/targFactors/targFactor[2]/levels/range`.

use std::str::FromStr;

use roxmltree::{Document, Node, ParsingOptions};

use crate::model::*;
use crate::xml::Writer;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DescriptionError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("{path}: unknown element <{name}>")]
    UnknownField { path: String, name: String },
    #[error("{path}: missing <{name}>")]
    Missing { path: String, name: String },
    #[error("{path}: cannot read {text:?} as {expected}")]
    Type {
        path: String,
        text: String,
        expected: &'static str,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl DescriptionError {
    pub fn path(&self) -> Option<&str> {
        match self {
            DescriptionError::Malformed(_) => None,
            DescriptionError::UnknownField { path, .. }
            | DescriptionError::Missing { path, .. }
            | DescriptionError::Type { path, .. }
            | DescriptionError::Invalid { path, .. } => Some(path),
        }
    }
}

type Result<T> = std::result::Result<T, DescriptionError>;

fn invalid(path: &str, message: impl Into<String>) -> DescriptionError {
    DescriptionError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy)]
struct El<'a, 'i> {
    node: Node<'a, 'i>,
}

impl<'a, 'i> El<'a, 'i> {
    fn name(&self) -> &'a str {
        self.node.tag_name().name()
    }

    fn elements(&self) -> impl Iterator<Item = El<'a, 'i>> {
        self.node.children().filter(|n| n.is_element()).map(|node| El { node })
    }

    fn only(&self, path: &str, allowed: &[&str]) -> Result<()> {
        for c in self.elements() {
            if !allowed.contains(&c.name()) {
                return Err(DescriptionError::UnknownField {
                    path: path.to_string(),
                    name: c.name().to_string(),
                });
            }
        }
        for a in self.node.attributes() {
            return Err(DescriptionError::UnknownField {
                path: path.to_string(),
                name: format!("@{}", a.name()),
            });
        }
        Ok(())
    }

    fn only_with_attrs(&self, path: &str, allowed: &[&str], attrs: &[&str]) -> Result<()> {
        for c in self.elements() {
            if !allowed.contains(&c.name()) {
                return Err(DescriptionError::UnknownField {
                    path: path.to_string(),
                    name: c.name().to_string(),
                });
            }
        }
        for a in self.node.attributes() {
            if !attrs.contains(&a.name()) {
                return Err(DescriptionError::UnknownField {
                    path: path.to_string(),
                    name: format!("@{}", a.name()),
                });
            }
        }
        Ok(())
    }

    fn child(&self, path: &str, name: &str) -> Result<Option<El<'a, 'i>>> {
        let mut it = self.elements().filter(|c| c.name() == name);
        let first = it.next();
        if it.next().is_some() {
            return Err(invalid(path, format!("<{name}> given more than once")));
        }
        Ok(first)
    }

    fn req(&self, path: &str, name: &str) -> Result<El<'a, 'i>> {
        self.child(path, name)?.ok_or_else(|| DescriptionError::Missing {
            path: path.to_string(),
            name: name.to_string(),
        })
    }

    fn all(&self, name: &str) -> Vec<El<'a, 'i>> {
        self.elements().filter(|c| c.name() == name).collect()
    }

    fn text(&self) -> String {
        self.node
            .children()
            .filter(|n| n.is_text())
            .filter_map(|n| n.text())
            .collect::<String>()
            .trim()
            .to_string()
    }

    fn attr(&self, path: &str, name: &str) -> Result<&'a str> {
        self.node.attribute(name).ok_or_else(|| DescriptionError::Missing {
            path: path.to_string(),
            name: format!("@{name}"),
        })
    }
}

fn sub(path: &str, name: &str) -> String {
    format!("{path}/{name}")
}

fn parse_text<T: FromStr>(el: El, path: &str, expected: &'static str) -> Result<T> {
    let t = el.text();
    t.parse::<T>().map_err(|_| DescriptionError::Type {
        path: path.to_string(),
        text: t,
        expected,
    })
}

fn parse_str<T: FromStr>(t: &str, path: &str, expected: &'static str) -> Result<T> {
    t.trim().parse::<T>().map_err(|_| DescriptionError::Type {
        path: path.to_string(),
        text: t.to_string(),
        expected,
    })
}

fn parse_real(el: El, path: &str) -> Result<f64> {
    let v: f64 = parse_text(el, path, "a number")?;
    if !v.is_finite() {
        return Err(invalid(path, "value must be finite"));
    }
    Ok(v)
}

fn parse_bool(el: El, path: &str) -> Result<bool> {
    match el.text().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        t => Err(DescriptionError::Type {
            path: path.to_string(),
            text: t.to_string(),
            expected: "a boolean",
        }),
    }
}

fn parse_time(el: El, path: &str) -> Result<TimeSpec> {
    el.only_with_attrs(path, &[], &["UNITS"])?;
    let units = match el.node.attribute("UNITS") {
        None => TimeUnit::Secs,
        Some(u) => TimeUnit::parse(u).ok_or_else(|| DescriptionError::Type {
            path: format!("{path}/@UNITS"),
            text: u.to_string(),
            expected: "a time unit (ms, secs, mins, hours)",
        })?,
    };
    let amount = parse_real(el, path)?;
    if amount < 0.0 {
        return Err(invalid(path, "time must not be negative"));
    }
    Ok(TimeSpec { amount, units })
}

/// Parses and validates an experiment description document.
pub fn parse_experiment_description(document: &str) -> Result<ExperimentDescription> {
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(document, opts)
        .map_err(|e| DescriptionError::Malformed(e.to_string()))?;
    let root = El {
        node: doc.root_element(),
    };
    if root.name() != "ACT" {
        return Err(DescriptionError::Malformed(format!(
            "root element is <{}>, expected <ACT>",
            root.name()
        )));
    }
    let p = "ACT";
    root.only(
        p,
        &[
            "factors",
            "fitnessMetrics",
            "aggregation",
            "functions",
            "resources",
            "miscellaneous",
        ],
    )?;

    let factors = parse_factors(root.req(p, "factors")?, &sub(p, "factors"))?;
    let metrics = parse_metrics(root.req(p, "fitnessMetrics")?, &sub(p, "fitnessMetrics"))?;
    let aggregation = match root.child(p, "aggregation")? {
        Some(a) => parse_aggregation(a, &sub(p, "aggregation"))?,
        None => AggregationSpec {
            mode: AggregationMode::SingleMetric(metrics.first().cloned().unwrap_or_default()),
            normalizer: None,
        },
    };
    let target = parse_functions(root.req(p, "functions")?, &sub(p, "functions"))?;
    let resources = parse_resources(root.req(p, "resources")?, &sub(p, "resources"))?;
    let misc_path = sub(p, "miscellaneous");
    let misc = root.req(p, "miscellaneous")?;
    misc.only(
        &misc_path,
        &["timeout", "maxRecovers", "seed", "searchStrategy"],
    )?;
    let trial_timeout = parse_time(misc.req(&misc_path, "timeout")?, &sub(&misc_path, "timeout"))?;
    let max_recovers = match misc.child(&misc_path, "maxRecovers")? {
        Some(e) => parse_text(e, &sub(&misc_path, "maxRecovers"), "a non-negative integer")?,
        None => 1,
    };
    let seed = match misc.child(&misc_path, "seed")? {
        Some(e) => parse_text(e, &sub(&misc_path, "seed"), "a 64-bit unsigned integer")?,
        None => 0,
    };
    let strategy = match misc.child(&misc_path, "searchStrategy")? {
        Some(e) => parse_strategy(e, &sub(&misc_path, "searchStrategy"), &factors)?,
        None => StrategySpec::Grid { replications: 1 },
    };

    let desc = ExperimentDescription {
        factors,
        metrics,
        target,
        resources,
        trial_timeout,
        max_recovers,
        seed,
        strategy,
        aggregation,
    };
    validate_description(&desc)?;
    Ok(desc)
}

fn parse_factors(el: El, path: &str) -> Result<Vec<Factor>> {
    el.only(path, &["targFactors", "conditionsFactors"])?;
    let mut out = Vec::new();
    let targ_path = sub(path, "targFactors");
    let targ = el.req(path, "targFactors")?;
    targ.only(&targ_path, &["targFactor"])?;
    for (i, f) in targ.all("targFactor").into_iter().enumerate() {
        out.push(parse_factor(f, &format!("{targ_path}/targFactor[{}]", i + 1), Role::Control)?);
    }
    if let Some(cond) = el.child(path, "conditionsFactors")? {
        let cpath = sub(path, "conditionsFactors");
        cond.only(&cpath, &["conditionsFactor"])?;
        for (i, f) in cond.all("conditionsFactor").into_iter().enumerate() {
            out.push(parse_factor(
                f,
                &format!("{cpath}/conditionsFactor[{}]", i + 1),
                Role::Noise,
            )?);
        }
    }
    Ok(out)
}

fn parse_factor(el: El, path: &str, role: Role) -> Result<Factor> {
    el.only(path, &["name", "levels", "timeToAdapt", "adaptationFunc"])?;
    let name = el.req(path, "name")?.text();
    if name.is_empty() || name.contains(['\t', '\n', '{', '}', '=']) {
        return Err(invalid(&sub(path, "name"), format!("{name:?} is not a usable factor name")));
    }
    let lpath = sub(path, "levels");
    let levels = el.req(path, "levels")?;
    levels.only(&lpath, &["enumeration", "range"])?;
    let domain = match (levels.child(&lpath, "enumeration")?, levels.child(&lpath, "range")?) {
        (Some(e), None) => parse_enumeration(e, &sub(&lpath, "enumeration"))?,
        (None, Some(r)) => parse_range(r, &sub(&lpath, "range"))?,
        (None, None) => {
            return Err(DescriptionError::Missing {
                path: lpath,
                name: "enumeration or range".into(),
            })
        }
        (Some(_), Some(_)) => return Err(invalid(&lpath, "both <enumeration> and <range> given")),
    };
    let time_to_adapt = match el.child(path, "timeToAdapt")? {
        Some(t) => parse_time(t, &sub(path, "timeToAdapt"))?,
        None => TimeSpec::secs(0.0),
    };
    let adaptation = match el.child(path, "adaptationFunc")? {
        Some(a) => Some(parse_command(a, &sub(path, "adaptationFunc"))?),
        None => None,
    };
    Ok(Factor {
        name,
        role,
        domain,
        time_to_adapt,
        adaptation,
    })
}

fn parse_tag(el: El, path: &str) -> Result<LevelTag> {
    let t = el.attr(path, "TYPE")?;
    LevelTag::parse(t).ok_or_else(|| DescriptionError::Type {
        path: format!("{path}/@TYPE"),
        text: t.to_string(),
        expected: "int, float or string",
    })
}

fn parse_enumeration(el: El, path: &str) -> Result<LevelDomain> {
    el.only_with_attrs(path, &["level"], &["TYPE"])?;
    let tag = parse_tag(el, path)?;
    let mut levels = Vec::new();
    for (i, l) in el.all("level").into_iter().enumerate() {
        let lp = format!("{path}/level[{}]", i + 1);
        let text = l.text();
        let v = LevelValue::parse(tag, &text).ok_or_else(|| DescriptionError::Type {
            path: lp,
            text,
            expected: tag.as_str(),
        })?;
        levels.push(v);
    }
    let d = LevelDomain::Enumeration { tag, levels };
    d.check().map_err(|m| invalid(path, m))?;
    Ok(d)
}

fn parse_range(el: El, path: &str) -> Result<LevelDomain> {
    el.only_with_attrs(
        path,
        &["start", "end", "legalGranular", "sampleGranular"],
        &["TYPE"],
    )?;
    let tag = parse_tag(el, path)?;
    let num = |name: &str| -> Result<f64> {
        let p = sub(path, name);
        let e = el.req(path, name)?;
        match tag {
            LevelTag::Int => parse_text::<i64>(e, &p, "an integer").map(|v| v as f64),
            _ => parse_real(e, &p),
        }
    };
    let lower = num("start")?;
    let upper = num("end")?;
    let legal = match el.child(path, "legalGranular")? {
        Some(e) => parse_real(e, &sub(path, "legalGranular"))?,
        None if tag == LevelTag::Int => 1.0,
        None => {
            return Err(DescriptionError::Missing {
                path: path.to_string(),
                name: "legalGranular".into(),
            })
        }
    };
    let sample = match el.child(path, "sampleGranular")? {
        Some(e) => parse_real(e, &sub(path, "sampleGranular"))?,
        None => legal,
    };
    let d = LevelDomain::Range {
        tag,
        lower,
        upper,
        legal_granularity: legal,
        sample_granularity: sample,
    };
    d.check().map_err(|m| invalid(path, m))?;
    Ok(d)
}

fn parse_command(el: El, path: &str) -> Result<CommandSpec> {
    el.only(path, &["command", "funcLocation"])?;
    match (el.child(path, "command")?, el.child(path, "funcLocation")?) {
        (Some(c), None) => {
            let cp = sub(path, "command");
            c.only(&cp, &["program", "arg"])?;
            let program = c.req(&cp, "program")?.text();
            if program.is_empty() {
                return Err(invalid(&sub(&cp, "program"), "program is empty"));
            }
            // Arguments keep their exact text; only the program is trimmed.
            let args = c
                .all("arg")
                .into_iter()
                .map(|a| a.node.text().unwrap_or("").to_string())
                .collect();
            Ok(CommandSpec::Command(CommandTemplate { program, args }))
        }
        (None, Some(f)) => {
            let fp = sub(path, "funcLocation");
            f.only(&fp, &["dll", "func"])?;
            Ok(CommandSpec::FuncLocation {
                dll: f.req(&fp, "dll")?.text(),
                func: f.req(&fp, "func")?.text(),
            })
        }
        (None, None) => Err(DescriptionError::Missing {
            path: path.to_string(),
            name: "command or funcLocation".into(),
        }),
        (Some(_), Some(_)) => Err(invalid(path, "both <command> and <funcLocation> given")),
    }
}

fn parse_metrics(el: El, path: &str) -> Result<Vec<String>> {
    el.only(path, &["fitnessMetric"])?;
    Ok(el.all("fitnessMetric").into_iter().map(|m| m.text()).collect())
}

fn parse_aggregation(el: El, path: &str) -> Result<AggregationSpec> {
    el.only(path, &["singleMetric", "weightedSum", "normaliser"])?;
    let mode = match (el.child(path, "singleMetric")?, el.child(path, "weightedSum")?) {
        (Some(s), None) => AggregationMode::SingleMetric(s.text()),
        (None, Some(w)) => {
            let wp = sub(path, "weightedSum");
            w.only(&wp, &["term"])?;
            let mut terms = Vec::new();
            for (i, t) in w.all("term").into_iter().enumerate() {
                let tp = format!("{wp}/term[{}]", i + 1);
                t.only_with_attrs(&tp, &[], &["metric", "weight"])?;
                let metric = t.attr(&tp, "metric")?.to_string();
                let weight: f64 = parse_str(t.attr(&tp, "weight")?, &format!("{tp}/@weight"), "a number")?;
                terms.push((metric, weight));
            }
            AggregationMode::WeightedSum(terms)
        }
        (None, None) => {
            return Err(DescriptionError::Missing {
                path: path.to_string(),
                name: "singleMetric or weightedSum".into(),
            })
        }
        (Some(_), Some(_)) => return Err(invalid(path, "both <singleMetric> and <weightedSum> given")),
    };
    let normalizer = match el.child(path, "normaliser")? {
        Some(n) => Some(parse_real(n, &sub(path, "normaliser"))?),
        None => None,
    };
    Ok(AggregationSpec { mode, normalizer })
}

fn parse_functions(el: El, path: &str) -> Result<TargetSpec> {
    el.only(
        path,
        &[
            "runFunc",
            "recoveryFunc",
            "validationFunc",
            "newResultObjFunc",
            "syntheticTarget",
        ],
    )?;
    if let Some(s) = el.child(path, "syntheticTarget")? {
        for other in ["runFunc", "recoveryFunc", "validationFunc", "newResultObjFunc"] {
            if el.child(path, other)?.is_some() {
                return Err(invalid(path, format!("<{other}> cannot be combined with <syntheticTarget>")));
            }
        }
        return parse_synthetic(s, &sub(path, "syntheticTarget")).map(TargetSpec::Synthetic);
    }
    let run = parse_command(el.req(path, "runFunc")?, &sub(path, "runFunc"))?;
    let recover = match el.child(path, "recoveryFunc")? {
        Some(r) => Some(parse_command(r, &sub(path, "recoveryFunc"))?),
        None => None,
    };
    let validate = match el.child(path, "validationFunc")? {
        Some(v) => Some(parse_command(v, &sub(path, "validationFunc"))?),
        None => None,
    };
    // Result objects are built by the harness itself; the entry is accepted for
    // compatibility and otherwise ignored.
    if let Some(n) = el.child(path, "newResultObjFunc")? {
        parse_command(n, &sub(path, "newResultObjFunc"))?;
    }
    Ok(TargetSpec::Commands {
        run,
        recover,
        validate,
    })
}

fn parse_synthetic(el: El, path: &str) -> Result<SyntheticTargetSpec> {
    el.only(path, &["metric", "failProbability", "seed", "trialSeconds"])?;
    let mut metrics = Vec::new();
    for (i, m) in el.all("metric").into_iter().enumerate() {
        let mp = format!("{path}/metric[{}]", i + 1);
        m.only_with_attrs(
            &mp,
            &["intercept", "linear", "quadratic", "interaction", "step", "noiseSigma"],
            &["name"],
        )?;
        let mut sm = SyntheticMetric {
            name: m.attr(&mp, "name")?.to_string(),
            ..SyntheticMetric::default()
        };
        if let Some(e) = m.child(&mp, "intercept")? {
            sm.intercept = parse_real(e, &sub(&mp, "intercept"))?;
        }
        for (j, e) in m.all("linear").into_iter().enumerate() {
            let p = format!("{mp}/linear[{}]", j + 1);
            e.only_with_attrs(&p, &[], &["factor"])?;
            sm.linear.push((e.attr(&p, "factor")?.to_string(), parse_real(e, &p)?));
        }
        for (j, e) in m.all("quadratic").into_iter().enumerate() {
            let p = format!("{mp}/quadratic[{}]", j + 1);
            e.only_with_attrs(&p, &[], &["factor"])?;
            sm.quadratic.push((e.attr(&p, "factor")?.to_string(), parse_real(e, &p)?));
        }
        for (j, e) in m.all("interaction").into_iter().enumerate() {
            let p = format!("{mp}/interaction[{}]", j + 1);
            e.only_with_attrs(&p, &[], &["a", "b"])?;
            sm.interaction.push((
                e.attr(&p, "a")?.to_string(),
                e.attr(&p, "b")?.to_string(),
                parse_real(e, &p)?,
            ));
        }
        for (j, e) in m.all("step").into_iter().enumerate() {
            let p = format!("{mp}/step[{}]", j + 1);
            e.only_with_attrs(&p, &[], &["factor", "threshold"])?;
            sm.steps.push(StepTerm {
                factor: e.attr(&p, "factor")?.to_string(),
                threshold: parse_str(e.attr(&p, "threshold")?, &format!("{p}/@threshold"), "a number")?,
                offset: parse_real(e, &p)?,
            });
        }
        if let Some(e) = m.child(&mp, "noiseSigma")? {
            sm.noise_sigma = parse_real(e, &sub(&mp, "noiseSigma"))?;
        }
        metrics.push(sm);
    }
    let fail_probability = match el.child(path, "failProbability")? {
        Some(e) => parse_real(e, &sub(path, "failProbability"))?,
        None => 0.0,
    };
    let seed = match el.child(path, "seed")? {
        Some(e) => parse_text(e, &sub(path, "seed"), "a 64-bit unsigned integer")?,
        None => 0,
    };
    let trial_seconds = match el.child(path, "trialSeconds")? {
        Some(e) => parse_real(e, &sub(path, "trialSeconds"))?,
        None => 1.0,
    };
    Ok(SyntheticTargetSpec {
        metrics,
        fail_probability,
        seed,
        trial_seconds,
    })
}

fn parse_resources(el: El, path: &str) -> Result<Resources> {
    el.only(path, &["timeLimit", "machines"])?;
    let time_limit = parse_time(el.req(path, "timeLimit")?, &sub(path, "timeLimit"))?;
    let machines = match el.child(path, "machines")? {
        Some(m) => {
            let mp = sub(path, "machines");
            m.only(&mp, &["machine"])?;
            m.all("machine").into_iter().map(|x| x.text()).collect()
        }
        None => Vec::new(),
    };
    Ok(Resources {
        time_limit,
        machines,
    })
}

fn find_factor<'f>(factors: &'f [Factor], name: &str, path: &str) -> Result<&'f Factor> {
    factors
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| invalid(path, format!("unknown factor {name:?}")))
}

fn parse_start(el: El, path: &str, factors: &[Factor]) -> Result<Vec<(String, LevelValue)>> {
    el.only(path, &["level"])?;
    let mut out = Vec::new();
    for (i, l) in el.all("level").into_iter().enumerate() {
        let lp = format!("{path}/level[{}]", i + 1);
        l.only_with_attrs(&lp, &[], &["factor"])?;
        let name = l.attr(&lp, "factor")?;
        let f = find_factor(factors, name, &lp)?;
        let text = l.text();
        let v = LevelValue::parse(f.tag(), &text).ok_or_else(|| DescriptionError::Type {
            path: lp.clone(),
            text,
            expected: f.tag().as_str(),
        })?;
        out.push((name.to_string(), v));
    }
    Ok(out)
}

fn usize_child(el: El, path: &str, name: &str, default: usize) -> Result<usize> {
    match el.child(path, name)? {
        Some(e) => parse_text(e, &sub(path, name), "a non-negative integer"),
        None => Ok(default),
    }
}

fn parse_strategy(el: El, path: &str, factors: &[Factor]) -> Result<StrategySpec> {
    let name = el.attr(path, "NAME")?;
    match name {
        "grid" => {
            el.only_with_attrs(path, &["replications"], &["NAME"])?;
            Ok(StrategySpec::Grid {
                replications: usize_child(el, path, "replications", 1)?,
            })
        }
        "random" => {
            el.only_with_attrs(path, &["budget"], &["NAME"])?;
            Ok(StrategySpec::Random {
                budget: parse_text(el.req(path, "budget")?, &sub(path, "budget"), "a non-negative integer")?,
            })
        }
        "hillClimb" => {
            el.only_with_attrs(path, &["start", "budget"], &["NAME"])?;
            let start = match el.child(path, "start")? {
                Some(s) => Some(parse_start(s, &sub(path, "start"), factors)?),
                None => None,
            };
            Ok(StrategySpec::HillClimb {
                start,
                budget: usize_child(el, path, "budget", 100)?,
            })
        }
        "annealing" => {
            el.only_with_attrs(
                path,
                &["start", "budget", "initialTemperature", "cooling", "span"],
                &["NAME"],
            )?;
            let start = match el.child(path, "start")? {
                Some(s) => Some(parse_start(s, &sub(path, "start"), factors)?),
                None => None,
            };
            let initial_temperature = match el.child(path, "initialTemperature")? {
                Some(e) => Some(parse_real(e, &sub(path, "initialTemperature"))?),
                None => None,
            };
            let cooling = match el.child(path, "cooling")? {
                Some(e) => parse_real(e, &sub(path, "cooling"))?,
                None => 0.95,
            };
            let span = match el.child(path, "span")? {
                Some(e) => parse_text(e, &sub(path, "span"), "a positive integer")?,
                None => 3,
            };
            Ok(StrategySpec::Annealing(AnnealSettings {
                start,
                budget: usize_child(el, path, "budget", 200)?,
                initial_temperature,
                cooling,
                span,
            }))
        }
        "taguchi" => parse_taguchi(el, path, factors).map(StrategySpec::Taguchi),
        "sequence" => {
            el.only_with_attrs(path, &["searchStrategy", "budget"], &["NAME"])?;
            let budget = match el.child(path, "budget")? {
                Some(e) => Some(parse_text(e, &sub(path, "budget"), "a non-negative integer")?),
                None => None,
            };
            let mut steps = Vec::new();
            for (i, s) in el.all("searchStrategy").into_iter().enumerate() {
                steps.push(parse_strategy(s, &format!("{path}/searchStrategy[{}]", i + 1), factors)?);
            }
            Ok(StrategySpec::Sequence { budget, steps })
        }
        other => Err(DescriptionError::Type {
            path: format!("{path}/@NAME"),
            text: other.to_string(),
            expected: "grid, random, hillClimb, annealing, taguchi or sequence",
        }),
    }
}

fn parse_taguchi(el: El, path: &str, factors: &[Factor]) -> Result<TaguchiSettings> {
    el.only_with_attrs(
        path,
        &[
            "levels",
            "replications",
            "interaction",
            "significance",
            "scaling",
            "array",
            "allocation",
            "levelMap",
            "alphaStar",
            "centrePoints",
            "step",
            "stopAfterPhase1",
        ],
        &["NAME"],
    )?;
    let mut s = TaguchiSettings::default();
    if let Some(e) = el.child(path, "levels")? {
        s.levels = parse_text(e, &sub(path, "levels"), "2 or 3")?;
    }
    s.replications = usize_child(el, path, "replications", s.replications)?;
    for (i, e) in el.all("interaction").into_iter().enumerate() {
        let p = format!("{path}/interaction[{}]", i + 1);
        e.only_with_attrs(&p, &[], &["a", "b"])?;
        s.interactions
            .push((e.attr(&p, "a")?.to_string(), e.attr(&p, "b")?.to_string()));
    }
    if let Some(e) = el.child(path, "significance")? {
        s.significance = parse_real(e, &sub(path, "significance"))?;
    }
    for (i, e) in el.all("scaling").into_iter().enumerate() {
        let p = format!("{path}/scaling[{}]", i + 1);
        e.only_with_attrs(&p, &[], &["factor"])?;
        s.scaling.push((e.attr(&p, "factor")?.to_string(), parse_real(e, &p)?));
    }
    if let Some(e) = el.child(path, "array")? {
        s.array = Some(e.text());
    }
    for (i, e) in el.all("allocation").into_iter().enumerate() {
        let p = format!("{path}/allocation[{}]", i + 1);
        e.only_with_attrs(&p, &[], &["factor", "column"])?;
        let col = parse_str(e.attr(&p, "column")?, &format!("{p}/@column"), "a column number")?;
        s.allocation.push((e.attr(&p, "factor")?.to_string(), col));
    }
    for (i, e) in el.all("levelMap").into_iter().enumerate() {
        let p = format!("{path}/levelMap[{}]", i + 1);
        e.only_with_attrs(&p, &["level"], &["factor"])?;
        let name = e.attr(&p, "factor")?;
        let f = find_factor(factors, name, &p)?;
        let mut levels = Vec::new();
        for (j, l) in e.all("level").into_iter().enumerate() {
            let lp = format!("{p}/level[{}]", j + 1);
            let text = l.text();
            levels.push(LevelValue::parse(f.tag(), &text).ok_or_else(|| DescriptionError::Type {
                path: lp,
                text,
                expected: f.tag().as_str(),
            })?);
        }
        s.level_maps.push((name.to_string(), levels));
    }
    if let Some(e) = el.child(path, "alphaStar")? {
        s.alpha_star = Some(parse_real(e, &sub(path, "alphaStar"))?);
    }
    s.centre_points = usize_child(el, path, "centrePoints", s.centre_points)?;
    for (i, e) in el.all("step").into_iter().enumerate() {
        let p = format!("{path}/step[{}]", i + 1);
        e.only_with_attrs(&p, &[], &["factor"])?;
        s.steps.push((e.attr(&p, "factor")?.to_string(), parse_real(e, &p)?));
    }
    if let Some(e) = el.child(path, "stopAfterPhase1")? {
        s.stop_after_phase1 = parse_bool(e, &sub(path, "stopAfterPhase1"))?;
    }
    Ok(s)
}

fn count_level_tokens(t: &CommandTemplate) -> usize {
    std::iter::once(&t.program)
        .chain(&t.args)
        .map(|a| a.matches("{level}").count())
        .sum()
}

/// Checks cross-field invariants of a description.
pub fn validate_description(d: &ExperimentDescription) -> Result<()> {
    let fpath = "ACT/factors";
    for (i, f) in d.factors.iter().enumerate() {
        if d.factors[..i].iter().any(|g| g.name == f.name) {
            return Err(invalid(fpath, format!("factor name {:?} used twice", f.name)));
        }
        f.domain
            .check()
            .map_err(|m| invalid(&format!("{fpath}/{}", f.name), m))?;
    }
    if d.control_factors().next().is_none() {
        return Err(invalid(fpath, "at least one targFactor is required"));
    }
    let mpath = "ACT/fitnessMetrics";
    if d.metrics.is_empty() {
        return Err(invalid(mpath, "at least one fitnessMetric is required"));
    }
    for (i, m) in d.metrics.iter().enumerate() {
        if m.is_empty() || m.contains(['\t', '\n']) {
            return Err(invalid(mpath, format!("{m:?} is not a usable metric name")));
        }
        if d.metrics[..i].contains(m) {
            return Err(invalid(mpath, format!("metric {m:?} declared twice")));
        }
    }
    let apath = "ACT/aggregation";
    let known = |m: &str| d.metrics.iter().any(|x| x == m);
    match &d.aggregation.mode {
        AggregationMode::SingleMetric(m) => {
            if !known(m) {
                return Err(invalid(apath, format!("unknown metric {m:?}")));
            }
        }
        AggregationMode::WeightedSum(terms) => {
            if terms.is_empty() {
                return Err(invalid(apath, "weightedSum has no terms"));
            }
            for (m, w) in terms {
                if !known(m) {
                    return Err(invalid(apath, format!("unknown metric {m:?}")));
                }
                if !w.is_finite() {
                    return Err(invalid(apath, format!("weight of {m} is not finite")));
                }
            }
        }
    }
    if let Some(a) = d.aggregation.normalizer {
        if !(a > 0.0) {
            return Err(invalid(apath, "normaliser must be positive"));
        }
    }
    let timeout = d.trial_timeout.seconds();
    if !(timeout > 0.0) {
        return Err(invalid("ACT/miscellaneous/timeout", "timeout must be positive"));
    }
    if d.resources.time_limit.seconds() < timeout {
        return Err(invalid(
            "ACT/resources/timeLimit",
            "time limit is shorter than the trial timeout",
        ));
    }
    match &d.target {
        TargetSpec::Commands { run, .. } => {
            if count_level_tokens(&run.template(false)) != 0 {
                return Err(invalid("ACT/functions/runFunc", "run command must not contain {level}"));
            }
            for f in &d.factors {
                let p = format!("{fpath}/{}/adaptationFunc", f.name);
                let a = f.adaptation.as_ref().ok_or_else(|| DescriptionError::Missing {
                    path: format!("{fpath}/{}", f.name),
                    name: "adaptationFunc".into(),
                })?;
                if count_level_tokens(&a.template(true)) != 1 {
                    return Err(invalid(&p, "adaptation command needs exactly one {level}"));
                }
            }
        }
        TargetSpec::Synthetic(s) => check_synthetic(d, s)?,
    }
    check_strategy(d, &d.strategy, "ACT/miscellaneous/searchStrategy")
}

fn check_synthetic(d: &ExperimentDescription, s: &SyntheticTargetSpec) -> Result<()> {
    let p = "ACT/functions/syntheticTarget";
    if !(0.0..=1.0).contains(&s.fail_probability) {
        return Err(invalid(p, "failProbability must lie in [0, 1]"));
    }
    if !(s.trial_seconds >= 0.0) {
        return Err(invalid(p, "trialSeconds must not be negative"));
    }
    for m in &d.metrics {
        if !s.metrics.iter().any(|x| &x.name == m) {
            return Err(invalid(p, format!("no response defined for metric {m:?}")));
        }
    }
    let numeric = |name: &str| -> Result<()> {
        match d.factor(name) {
            Some(f) if f.tag().is_numeric() => Ok(()),
            Some(_) => Err(invalid(p, format!("factor {name:?} is not numeric"))),
            None => Err(invalid(p, format!("unknown factor {name:?}"))),
        }
    };
    for m in &s.metrics {
        if !d.metrics.contains(&m.name) {
            return Err(invalid(p, format!("metric {:?} is not declared", m.name)));
        }
        if !(m.noise_sigma >= 0.0) {
            return Err(invalid(p, "noiseSigma must not be negative"));
        }
        for (f, _) in m.linear.iter().chain(&m.quadratic) {
            numeric(f)?;
        }
        for (a, b, _) in &m.interaction {
            numeric(a)?;
            numeric(b)?;
        }
        for st in &m.steps {
            numeric(&st.factor)?;
        }
    }
    Ok(())
}

fn check_start(d: &ExperimentDescription, start: &[(String, LevelValue)], path: &str) -> Result<()> {
    for (name, v) in start {
        let f = find_factor(&d.factors, name, path)?;
        if !level_in_domain(f, v).map_err(|e| invalid(path, e.to_string()))? {
            return Err(invalid(path, format!("start level {v} outside the domain of {name}")));
        }
    }
    Ok(())
}

fn check_strategy(d: &ExperimentDescription, s: &StrategySpec, path: &str) -> Result<()> {
    match s {
        StrategySpec::Grid { replications } => {
            if *replications == 0 {
                return Err(invalid(path, "replications must be at least 1"));
            }
        }
        StrategySpec::Random { .. } => {}
        StrategySpec::HillClimb { start, .. } => {
            if let Some(st) = start {
                check_start(d, st, path)?;
            }
        }
        StrategySpec::Annealing(a) => {
            if let Some(st) = &a.start {
                check_start(d, st, path)?;
            }
            if let Some(t) = a.initial_temperature {
                if !(t > 0.0) {
                    return Err(invalid(path, "initialTemperature must be positive"));
                }
            }
            if !(a.cooling > 0.0 && a.cooling < 1.0) {
                return Err(invalid(path, "cooling must lie strictly between 0 and 1"));
            }
            if a.span == 0 {
                return Err(invalid(path, "span must be at least 1"));
            }
        }
        StrategySpec::Taguchi(t) => {
            if !(t.levels == 2 || t.levels == 3) {
                return Err(invalid(path, "levels must be 2 or 3"));
            }
            if t.replications < 2 {
                return Err(invalid(path, "signal-to-noise analysis needs at least 2 replications"));
            }
            if !(t.significance > 0.0 && t.significance < 1.0) {
                return Err(invalid(path, "significance must lie strictly between 0 and 1"));
            }
            for (a, b) in &t.interactions {
                let fa = find_factor(&d.factors, a, path)?;
                let fb = find_factor(&d.factors, b, path)?;
                if a == b || fa.role != Role::Control || fb.role != Role::Control {
                    return Err(invalid(path, format!("interaction {a}x{b} needs two distinct control factors")));
                }
            }
            for (f, v) in t.scaling.iter().chain(&t.steps) {
                find_factor(&d.factors, f, path)?;
                if !(*v > 0.0) {
                    return Err(invalid(path, format!("scaling and step for {f} must be positive")));
                }
            }
            for (f, c) in &t.allocation {
                find_factor(&d.factors, f, path)?;
                if *c == 0 {
                    return Err(invalid(path, "columns are numbered from 1"));
                }
            }
            for (f, levels) in &t.level_maps {
                let fac = find_factor(&d.factors, f, path)?;
                if levels.len() != t.levels as usize {
                    return Err(invalid(path, format!("levelMap for {f} needs {} levels", t.levels)));
                }
                for l in levels {
                    if !level_in_domain(fac, l).map_err(|e| invalid(path, e.to_string()))? {
                        return Err(invalid(path, format!("levelMap value {l} outside the domain of {f}")));
                    }
                }
            }
            if let Some(a) = t.alpha_star {
                if !(a > 0.0) {
                    return Err(invalid(path, "alphaStar must be positive"));
                }
            }
            if t.centre_points == 0 {
                return Err(invalid(path, "centrePoints must be at least 1"));
            }
            for f in d.control_factors() {
                if !f.tag().is_numeric() {
                    return Err(invalid(path, format!("factor {} is not numeric", f.name)));
                }
            }
        }
        StrategySpec::Sequence { steps, .. } => {
            if steps.is_empty() {
                return Err(invalid(path, "sequence has no strategies"));
            }
            for (i, st) in steps.iter().enumerate() {
                check_strategy(d, st, &format!("{path}/searchStrategy[{}]", i + 1))?;
            }
        }
    }
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_time(w: &mut Writer, name: &str, t: &TimeSpec) {
    w.leaf(name, &[("UNITS", t.units.as_str().into())], &num(t.amount));
}

fn write_command(w: &mut Writer, name: &str, c: &CommandSpec) {
    w.open(name, &[]);
    match c {
        CommandSpec::Command(t) => {
            w.open("command", &[]);
            w.leaf("program", &[], &t.program);
            for a in &t.args {
                w.leaf("arg", &[], a);
            }
            w.close("command");
        }
        CommandSpec::FuncLocation { dll, func } => {
            w.open("funcLocation", &[]);
            w.leaf("dll", &[], dll);
            w.leaf("func", &[], func);
            w.close("funcLocation");
        }
    }
    w.close(name);
}

fn write_factor(w: &mut Writer, name: &str, f: &Factor) {
    w.open(name, &[]);
    w.leaf("name", &[], &f.name);
    w.open("levels", &[]);
    match &f.domain {
        LevelDomain::Enumeration { tag, levels } => {
            w.open("enumeration", &[("TYPE", tag.as_str().into())]);
            for l in levels {
                w.leaf("level", &[], &l.to_string());
            }
            w.close("enumeration");
        }
        LevelDomain::Range {
            tag,
            lower,
            upper,
            legal_granularity,
            sample_granularity,
        } => {
            w.open("range", &[("TYPE", tag.as_str().into())]);
            w.leaf("start", &[], &num(*lower));
            w.leaf("end", &[], &num(*upper));
            w.leaf("legalGranular", &[], &num(*legal_granularity));
            w.leaf("sampleGranular", &[], &num(*sample_granularity));
            w.close("range");
        }
    }
    w.close("levels");
    write_time(w, "timeToAdapt", &f.time_to_adapt);
    if let Some(a) = &f.adaptation {
        write_command(w, "adaptationFunc", a);
    }
    w.close(name);
}

fn write_start(w: &mut Writer, start: &Option<Vec<(String, LevelValue)>>) {
    if let Some(s) = start {
        w.open("start", &[]);
        for (f, v) in s {
            w.leaf("level", &[("factor", f.clone())], &v.to_string());
        }
        w.close("start");
    }
}

fn write_strategy(w: &mut Writer, s: &StrategySpec) {
    w.open("searchStrategy", &[("NAME", s.name().into())]);
    match s {
        StrategySpec::Grid { replications } => w.leaf("replications", &[], &replications.to_string()),
        StrategySpec::Random { budget } => w.leaf("budget", &[], &budget.to_string()),
        StrategySpec::HillClimb { start, budget } => {
            write_start(w, start);
            w.leaf("budget", &[], &budget.to_string());
        }
        StrategySpec::Annealing(a) => {
            write_start(w, &a.start);
            w.leaf("budget", &[], &a.budget.to_string());
            if let Some(t) = a.initial_temperature {
                w.leaf("initialTemperature", &[], &num(t));
            }
            w.leaf("cooling", &[], &num(a.cooling));
            w.leaf("span", &[], &a.span.to_string());
        }
        StrategySpec::Taguchi(t) => {
            w.leaf("levels", &[], &t.levels.to_string());
            w.leaf("replications", &[], &t.replications.to_string());
            for (a, b) in &t.interactions {
                w.empty("interaction", &[("a", a.clone()), ("b", b.clone())]);
            }
            w.leaf("significance", &[], &num(t.significance));
            for (f, v) in &t.scaling {
                w.leaf("scaling", &[("factor", f.clone())], &num(*v));
            }
            if let Some(a) = &t.array {
                w.leaf("array", &[], a);
            }
            for (f, c) in &t.allocation {
                w.empty("allocation", &[("factor", f.clone()), ("column", c.to_string())]);
            }
            for (f, levels) in &t.level_maps {
                w.open("levelMap", &[("factor", f.clone())]);
                for l in levels {
                    w.leaf("level", &[], &l.to_string());
                }
                w.close("levelMap");
            }
            if let Some(a) = t.alpha_star {
                w.leaf("alphaStar", &[], &num(a));
            }
            w.leaf("centrePoints", &[], &t.centre_points.to_string());
            for (f, v) in &t.steps {
                w.leaf("step", &[("factor", f.clone())], &num(*v));
            }
            w.leaf("stopAfterPhase1", &[], if t.stop_after_phase1 { "true" } else { "false" });
        }
        StrategySpec::Sequence { budget, steps } => {
            if let Some(b) = budget {
                w.leaf("budget", &[], &b.to_string());
            }
            for st in steps {
                write_strategy(w, st);
            }
        }
    }
    w.close("searchStrategy");
}

/// Serializes a description; `parse_experiment_description` reads it back unchanged.
pub fn serialize_experiment_description(d: &ExperimentDescription) -> String {
    let mut w = Writer::new();
    w.open("ACT", &[]);
    w.open("factors", &[]);
    w.open("targFactors", &[]);
    for f in d.control_factors() {
        write_factor(&mut w, "targFactor", f);
    }
    w.close("targFactors");
    if d.noise_factors().next().is_some() {
        w.open("conditionsFactors", &[]);
        for f in d.noise_factors() {
            write_factor(&mut w, "conditionsFactor", f);
        }
        w.close("conditionsFactors");
    }
    w.close("factors");

    w.open("fitnessMetrics", &[]);
    for m in &d.metrics {
        w.leaf("fitnessMetric", &[], m);
    }
    w.close("fitnessMetrics");

    w.open("aggregation", &[]);
    match &d.aggregation.mode {
        AggregationMode::SingleMetric(m) => w.leaf("singleMetric", &[], m),
        AggregationMode::WeightedSum(terms) => {
            w.open("weightedSum", &[]);
            for (m, wt) in terms {
                w.empty("term", &[("metric", m.clone()), ("weight", num(*wt))]);
            }
            w.close("weightedSum");
        }
    }
    if let Some(a) = d.aggregation.normalizer {
        w.leaf("normaliser", &[], &num(a));
    }
    w.close("aggregation");

    w.open("functions", &[]);
    match &d.target {
        TargetSpec::Commands {
            run,
            recover,
            validate,
        } => {
            write_command(&mut w, "runFunc", run);
            if let Some(r) = recover {
                write_command(&mut w, "recoveryFunc", r);
            }
            if let Some(v) = validate {
                write_command(&mut w, "validationFunc", v);
            }
        }
        TargetSpec::Synthetic(s) => {
            w.open("syntheticTarget", &[]);
            for m in &s.metrics {
                w.open("metric", &[("name", m.name.clone())]);
                w.leaf("intercept", &[], &num(m.intercept));
                for (f, c) in &m.linear {
                    w.leaf("linear", &[("factor", f.clone())], &num(*c));
                }
                for (f, c) in &m.quadratic {
                    w.leaf("quadratic", &[("factor", f.clone())], &num(*c));
                }
                for (a, b, c) in &m.interaction {
                    w.leaf("interaction", &[("a", a.clone()), ("b", b.clone())], &num(*c));
                }
                for st in &m.steps {
                    w.leaf(
                        "step",
                        &[("factor", st.factor.clone()), ("threshold", num(st.threshold))],
                        &num(st.offset),
                    );
                }
                w.leaf("noiseSigma", &[], &num(m.noise_sigma));
                w.close("metric");
            }
            w.leaf("failProbability", &[], &num(s.fail_probability));
            w.leaf("seed", &[], &s.seed.to_string());
            w.leaf("trialSeconds", &[], &num(s.trial_seconds));
            w.close("syntheticTarget");
        }
    }
    w.close("functions");

    w.open("resources", &[]);
    write_time(&mut w, "timeLimit", &d.resources.time_limit);
    if !d.resources.machines.is_empty() {
        w.open("machines", &[]);
        for m in &d.resources.machines {
            w.leaf("machine", &[], m);
        }
        w.close("machines");
    }
    w.close("resources");

    w.open("miscellaneous", &[]);
    write_time(&mut w, "timeout", &d.trial_timeout);
    w.leaf("maxRecovers", &[], &d.max_recovers.to_string());
    w.leaf("seed", &[], &d.seed.to_string());
    write_strategy(&mut w, &d.strategy);
    w.close("miscellaneous");
    w.close("ACT");
    w.finish()
}
