//! Incrementally written experiment results.
//!
//! Every trial appends one line to each of the configuration, condition and
//! result-object files (configurations and conditions only when new), then one
//! line to the links file tying them together. Each file stays well formed after
//! every append because its closing tag is rewritten.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::coordinator::{Recorder, TrialRecord};
use crate::description::{parse_experiment_description, DescriptionError};
use crate::harness::{Failure, FailureStage, TrialResult};
use crate::model::{Combination, ExperimentDescription, LevelValue};
use crate::xml::escape;

pub const DESCRIPTION_FILE: &str = "experimentDescription.xml";
pub const ENVIRONMENT_FILE: &str = "envDescription.txt";
pub const CONFIGS_FILE: &str = "configs.xml";
pub const CONDITIONS_FILE: &str = "conditions.xml";
pub const RESULT_OBJECTS_FILE: &str = "resultobjs.xml";
pub const LINKS_FILE: &str = "links.xml";
pub const INDEX_FILE: &str = "results.xml";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error("stored experiment description: {0}")]
    Description(#[from] DescriptionError),
    #[error("record {found} appended where {expected} was expected")]
    Sequence { expected: u64, found: u64 },
    #[error("{} already holds an experiment", .0.display())]
    Exists(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An XML file of one-line entries under a single root element.
struct EntryFile {
    path: PathBuf,
    closing: String,
    len: u64,
}

impl EntryFile {
    fn create(path: PathBuf, root: &str) -> Result<EntryFile, StoreError> {
        let closing = format!("</{root}>\n");
        let head = format!("<?xml version=\"1.0\"?>\n<{root}>\n{closing}");
        fs::write(&path, &head).map_err(io_err(&path))?;
        Ok(EntryFile {
            path,
            closing,
            len: head.len() as u64,
        })
    }

    fn append(&mut self, line: &str) -> Result<(), StoreError> {
        let mut f: File = OpenOptions::new().write(true).open(&self.path).map_err(io_err(&self.path))?;
        let body_end = self.len - self.closing.len() as u64;
        f.set_len(body_end).map_err(io_err(&self.path))?;
        f.seek(SeekFrom::Start(body_end)).map_err(io_err(&self.path))?;
        let chunk = format!("  {line}\n{}", self.closing);
        f.write_all(chunk.as_bytes()).map_err(io_err(&self.path))?;
        f.flush().map_err(io_err(&self.path))?;
        self.len = body_end + chunk.len() as u64;
        Ok(())
    }
}

fn levels_xml(levels: &[(String, LevelValue)]) -> String {
    levels
        .iter()
        .map(|(n, v)| format!("<level factor=\"{}\">{}</level>", escape(n), escape(&v.to_string())))
        .collect()
}

fn result_xml(r: &TrialRecord) -> String {
    let id = r.sequence;
    match &r.result {
        TrialResult::Success { metrics, wall_time } => {
            let mut s = format!(
                "<result id=\"r{id}\" status=\"success\" attempts=\"{}\" wallTime=\"{wall_time}\">",
                r.attempts
            );
            for (n, v) in metrics {
                s.push_str(&format!("<metric name=\"{}\">{v}</metric>", escape(n)));
            }
            if let Some(y) = r.response {
                s.push_str(&format!("<response>{y}</response>"));
            }
            s.push_str("</result>");
            s
        }
        TrialResult::Failure(f) => format!(
            "<result id=\"r{id}\" status=\"failure\" stage=\"{}\" attempts=\"{}\"><detail>{}</detail></result>",
            f.stage,
            r.attempts,
            escape(&f.detail)
        ),
    }
}

const INDEX: &str = r#"<?xml version="1.0"?>
<results>
  <file role="experimentDescription">experimentDescription.xml</file>
  <file role="environmentDescription">envDescription.txt</file>
  <file role="configurations">configs.xml</file>
  <file role="conditions">conditions.xml</file>
  <file role="resultObjects">resultobjs.xml</file>
  <file role="links">links.xml</file>
  <note>Result objects carry the raw metric values and, for successful trials, the aggregated response used by the analyses.</note>
</results>
"#;

type Levels = Vec<(String, LevelValue)>;

/// On-disk experiment store with its in-memory record list.
pub struct Store {
    dir: PathBuf,
    desc: ExperimentDescription,
    records: Vec<TrialRecord>,
    config_ids: HashMap<Levels, usize>,
    condition_ids: HashMap<Levels, usize>,
    configs: EntryFile,
    conditions: EntryFile,
    results: EntryFile,
    links: EntryFile,
}

impl Store {
    /// Starts a new store in `dir`, copying both inputs verbatim.
    pub fn create(dir: &Path, description_text: &str, environment_text: &str) -> Result<Store, StoreError> {
        let desc = parse_experiment_description(description_text)?;
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        if dir.join(LINKS_FILE).exists() {
            return Err(StoreError::Exists(dir.to_path_buf()));
        }
        Store::init(dir, desc, description_text, environment_text)
    }

    fn init(dir: &Path, desc: ExperimentDescription, description_text: &str, environment_text: &str) -> Result<Store, StoreError> {
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(io_err(&p))
        };
        write(DESCRIPTION_FILE, description_text)?;
        write(ENVIRONMENT_FILE, environment_text)?;
        write(INDEX_FILE, INDEX)?;
        Ok(Store {
            dir: dir.to_path_buf(),
            desc,
            records: Vec::new(),
            config_ids: HashMap::new(),
            condition_ids: HashMap::new(),
            configs: EntryFile::create(dir.join(CONFIGS_FILE), "configurations")?,
            conditions: EntryFile::create(dir.join(CONDITIONS_FILE), "conditions")?,
            results: EntryFile::create(dir.join(RESULT_OBJECTS_FILE), "resultObjects")?,
            links: EntryFile::create(dir.join(LINKS_FILE), "links")?,
        })
    }

    /// Reloads an interrupted experiment. A partially written final entry is
    /// dropped and reported in the returned warnings; the files are then
    /// rewritten from the recovered records.
    pub fn resume(dir: &Path) -> Result<(Store, Vec<String>), StoreError> {
        let (loaded, description_text, environment_text) = read_store(dir)?;
        for w in &loaded.warnings {
            log::warn!("{w}");
        }
        let mut store = Store::init(dir, loaded.description, &description_text, &environment_text)?;
        for r in &loaded.records {
            store.append(r)?;
        }
        Ok((store, loaded.warnings))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn description(&self) -> &ExperimentDescription {
        &self.desc
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn export_tab_separated(&self) -> String {
        export_tab_separated(&self.desc, &self.records)
    }

    fn intern(
        ids: &mut HashMap<Levels, usize>,
        file: &mut EntryFile,
        element: &str,
        prefix: char,
        levels: &Levels,
    ) -> Result<usize, StoreError> {
        if let Some(&i) = ids.get(levels) {
            return Ok(i);
        }
        let i = ids.len();
        file.append(&format!("<{element} id=\"{prefix}{i}\">{}</{element}>", levels_xml(levels)))?;
        ids.insert(levels.clone(), i);
        Ok(i)
    }
}

impl Recorder for Store {
    fn append(&mut self, record: &TrialRecord) -> Result<(), StoreError> {
        let expected = self.records.len() as u64;
        if record.sequence != expected {
            return Err(StoreError::Sequence {
                expected,
                found: record.sequence,
            });
        }
        let c = Store::intern(
            &mut self.config_ids,
            &mut self.configs,
            "configuration",
            'c',
            &record.combination.configuration,
        )?;
        let n = Store::intern(
            &mut self.condition_ids,
            &mut self.conditions,
            "condition",
            'n',
            &record.combination.condition,
        )?;
        self.results.append(&result_xml(record))?;
        self.links.append(&format!(
            "<trial seq=\"{}\" time=\"{}\" configuration=\"c{c}\" condition=\"n{n}\" result=\"r{}\"/>",
            record.sequence, record.timestamp, record.sequence
        ))?;
        self.records.push(record.clone());
        Ok(())
    }
}

/// A store's contents, read without modifying any file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub description: ExperimentDescription,
    pub records: Vec<TrialRecord>,
    /// Partial trailing entries that were ignored.
    pub warnings: Vec<String>,
}

/// Reads a store for analysis; unlike [`Store::resume`] nothing is rewritten.
pub fn load(dir: &Path) -> Result<Loaded, StoreError> {
    read_store(dir).map(|(l, _, _)| l)
}

fn read_store(dir: &Path) -> Result<(Loaded, String, String), StoreError> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(io_err(&p))
    };
    let description_text = read(DESCRIPTION_FILE)?;
    let environment_text = read(ENVIRONMENT_FILE)?;
    let desc = parse_experiment_description(&description_text)?;
    let mut warnings = Vec::new();
    let configs = parse_entries(CONFIGS_FILE, &read(CONFIGS_FILE)?, "configurations", &mut warnings)?;
    let conditions = parse_entries(CONDITIONS_FILE, &read(CONDITIONS_FILE)?, "conditions", &mut warnings)?;
    let results = parse_entries(RESULT_OBJECTS_FILE, &read(RESULT_OBJECTS_FILE)?, "resultObjects", &mut warnings)?;
    let links = parse_entries(LINKS_FILE, &read(LINKS_FILE)?, "links", &mut warnings)?;

    let by_id = |entries: &[Entry]| -> HashMap<String, usize> {
        entries.iter().enumerate().filter_map(|(i, e)| e.id.clone().map(|id| (id, i))).collect()
    };
    let (cfg_ix, cond_ix, res_ix) = (by_id(&configs), by_id(&conditions), by_id(&results));
    let mut records = Vec::with_capacity(links.len());
    for (k, link) in links.iter().enumerate() {
        let corrupt = |m: String| StoreError::Corrupt {
            file: LINKS_FILE.into(),
            line: link.line,
            message: m,
        };
        let doc = roxmltree::Document::parse(&link.text).map_err(|e| corrupt(e.to_string()))?;
        let el = doc.root_element();
        let attr = |n: &str| el.attribute(n).ok_or_else(|| corrupt(format!("missing attribute {n}")));
        let seq: u64 = attr("seq")?.parse().map_err(|_| corrupt("bad seq".into()))?;
        if seq != k as u64 {
            return Err(corrupt(format!("sequence {seq} where {k} was expected")));
        }
        let timestamp: f64 = attr("time")?.parse().map_err(|_| corrupt("bad time".into()))?;
        let lookup = |ix: &HashMap<String, usize>, entries: &[Entry], id: &str, file: &str| -> Result<Entry, StoreError> {
            ix.get(id).map(|&i| entries[i].clone()).ok_or_else(|| StoreError::Corrupt {
                file: LINKS_FILE.into(),
                line: link.line,
                message: format!("{id} is not in {file}"),
            })
        };
        let cfg = lookup(&cfg_ix, &configs, attr("configuration")?, CONFIGS_FILE)?;
        let cond = lookup(&cond_ix, &conditions, attr("condition")?, CONDITIONS_FILE)?;
        let res = lookup(&res_ix, &results, attr("result")?, RESULT_OBJECTS_FILE)?;
        let combination = Combination {
            configuration: parse_levels(&desc, &cfg, CONFIGS_FILE)?,
            condition: parse_levels(&desc, &cond, CONDITIONS_FILE)?,
        };
        let (result, response, attempts) = parse_result(&res)?;
        records.push(TrialRecord {
            sequence: seq,
            combination,
            result,
            response,
            attempts,
            timestamp,
        });
    }
    let loaded = Loaded {
        description: desc,
        records,
        warnings,
    };
    Ok((loaded, description_text, environment_text))
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    text: String,
    id: Option<String>,
}

/// Entry lines of a store file. An unparsable last entry with no closing tag
/// after it is treated as a torn write and dropped with a warning.
fn parse_entries(file: &str, content: &str, root: &str, warnings: &mut Vec<String>) -> Result<Vec<Entry>, StoreError> {
    let corrupt = |line: usize, message: String| StoreError::Corrupt {
        file: file.into(),
        line,
        message,
    };
    let lines: Vec<&str> = content.lines().collect();
    if lines.len() < 2 || !lines[0].starts_with("<?xml") || lines[1].trim() != format!("<{root}>") {
        return Err(corrupt(1, format!("expected an XML declaration and <{root}>")));
    }
    let closing = format!("</{root}>");
    let mut out = Vec::new();
    let mut closed = false;
    for (i, raw) in lines.iter().enumerate().skip(2) {
        let line_no = i + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if closed {
            return Err(corrupt(line_no, "content after the closing tag".into()));
        }
        if t == closing {
            closed = true;
            continue;
        }
        match roxmltree::Document::parse(t) {
            Ok(doc) => out.push(Entry {
                line: line_no,
                text: t.to_string(),
                id: doc.root_element().attribute("id").map(str::to_string),
            }),
            Err(e) => {
                let last = lines[i + 1..].iter().all(|l| l.trim().is_empty());
                if last {
                    warnings.push(format!("{file} line {line_no}: discarded partial entry ({e})"));
                } else {
                    return Err(corrupt(line_no, e.to_string()));
                }
            }
        }
    }
    Ok(out)
}

fn parse_levels(desc: &ExperimentDescription, e: &Entry, file: &str) -> Result<Levels, StoreError> {
    let corrupt = |m: String| StoreError::Corrupt {
        file: file.into(),
        line: e.line,
        message: m,
    };
    let doc = roxmltree::Document::parse(&e.text).map_err(|x| corrupt(x.to_string()))?;
    let mut out = Vec::new();
    for l in doc.root_element().children().filter(|n| n.is_element()) {
        let name = l.attribute("factor").ok_or_else(|| corrupt("level without factor".into()))?;
        let f = desc.factor(name).ok_or_else(|| corrupt(format!("unknown factor {name}")))?;
        let text = l.text().unwrap_or("");
        let v = LevelValue::parse(f.tag(), text).ok_or_else(|| corrupt(format!("bad level {text:?} for {name}")))?;
        out.push((name.to_string(), v));
    }
    Ok(out)
}

fn parse_result(e: &Entry) -> Result<(TrialResult, Option<f64>, u32), StoreError> {
    let corrupt = |m: String| StoreError::Corrupt {
        file: RESULT_OBJECTS_FILE.into(),
        line: e.line,
        message: m,
    };
    let doc = roxmltree::Document::parse(&e.text).map_err(|x| corrupt(x.to_string()))?;
    let el = doc.root_element();
    let num = |s: Option<&str>, what: &str| -> Result<f64, StoreError> {
        s.and_then(|t| t.trim().parse().ok()).ok_or_else(|| corrupt(format!("bad {what}")))
    };
    let attempts: u32 = el
        .attribute("attempts")
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| corrupt("bad attempts".into()))?;
    match el.attribute("status") {
        Some("success") => {
            let wall_time = num(el.attribute("wallTime"), "wallTime")?;
            let mut metrics = Vec::new();
            let mut response = None;
            for c in el.children().filter(|n| n.is_element()) {
                match c.tag_name().name() {
                    "metric" => {
                        let name = c.attribute("name").ok_or_else(|| corrupt("metric without name".into()))?;
                        metrics.push((name.to_string(), num(c.text(), "metric value")?));
                    }
                    "response" => response = Some(num(c.text(), "response")?),
                    other => return Err(corrupt(format!("unexpected element {other}"))),
                }
            }
            Ok((TrialResult::Success { metrics, wall_time }, response, attempts))
        }
        Some("failure") => {
            let stage = el
                .attribute("stage")
                .and_then(FailureStage::parse)
                .ok_or_else(|| corrupt("bad stage".into()))?;
            let detail = el
                .children()
                .find(|n| n.has_tag_name("detail"))
                .and_then(|d| d.text())
                .unwrap_or("")
                .to_string();
            Ok((TrialResult::Failure(Failure::new(stage, detail)), None, attempts))
        }
        _ => Err(corrupt("bad status".into())),
    }
}

/// One line per trial: control then noise factor levels, then metric values
/// (`ERROR` for failed trials).
pub fn export_tab_separated(desc: &ExperimentDescription, records: &[TrialRecord]) -> String {
    let factors = desc.ordered_factors();
    let mut header: Vec<&str> = factors.iter().map(|f| f.name.as_str()).collect();
    header.extend(desc.metrics.iter().map(String::as_str));
    let mut out = header.join("\t");
    out.push('\n');
    for r in records {
        let mut cells: Vec<String> = factors
            .iter()
            .map(|f| r.combination.get(&f.name).map_or(String::new(), |l| l.to_string()))
            .collect();
        for m in &desc.metrics {
            cells.push(r.result.metric(m).map_or("ERROR".into(), |v| v.to_string()));
        }
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}
