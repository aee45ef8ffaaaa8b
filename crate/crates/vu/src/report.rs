//! Report documents computed from a study snapshot, rendered as JSON, CSV
//! or a plain-text table.
//!
//! Every body keeps its tabular part in `rows`; the CSV render writes all
//! other fields as `# key: value` comment lines (values JSON-encoded) above
//! the table, so it parses back into the same document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use vu_core::events::StudySnapshot;
use vu_core::metrics::{
    divergence_markers, rank_table, BlankPolicy, Evaluation, Marker, MetricKind, RatePercent,
    DEFAULT_DIVERGENCE_THRESHOLD,
};
use vu_core::model::{summarize_cohort, AreaId, FamiliarityPooling, FreeTextItem, GroupView, ParticipantRecord};
use vu_core::semantic::{
    element_frequencies, top_k_elements, SemanticLexicon, SemanticOptions, Theme, ThematicGroup, DEFAULT_TOP_K,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Metrics,
    Semantic,
    Demographics,
    Histogram,
}

impl ReportKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "metrics" => Some(ReportKind::Metrics),
            "semantic" => Some(ReportKind::Semantic),
            "demographics" => Some(ReportKind::Demographics),
            "histogram" => Some(ReportKind::Histogram),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Render {
    Json,
    Csv,
    Text,
}

impl Render {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" | "json-like" => Some(Render::Json),
            "csv" | "csv-like" => Some(Render::Csv),
            "text" | "txt" | "plain" => Some(Render::Text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub policy: BlankPolicy,
    pub k: usize,
    pub threshold: u32,
    /// `None` defers to the study's setting; documents store the value used.
    pub familiarity_pooling: Option<FamiliarityPooling>,
    pub items: Vec<FreeTextItem>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            policy: BlankPolicy::default(),
            k: DEFAULT_TOP_K,
            threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            familiarity_pooling: None,
            items: FreeTextItem::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("the study has not been created")]
    NoStudy,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("threshold must be at least 1")]
    InvalidThreshold,
    #[error("no free-text items selected")]
    NoItems,
}

impl ReportError {
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::NoStudy => "study_not_created",
            _ => "invalid_option",
        }
    }
}

/// Correct of considered, with its display percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateCell {
    pub correct: u64,
    pub considered: u64,
    pub display: u32,
}

/// One rank position: the UIL ordering on the left, the familiarity
/// ordering on the right, as in a side-by-side comparison table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub position: u32,
    pub uil_area: Option<AreaId>,
    pub uil_name: Option<String>,
    pub uil_correct: Option<u64>,
    pub uil_considered: Option<u64>,
    pub uil_display: Option<u32>,
    pub marker: Marker,
    pub rank_delta: Option<i64>,
    pub fr_area: Option<AreaId>,
    pub fr_name: Option<String>,
    pub fr_numerator: Option<u64>,
    pub fr_denominator: Option<u64>,
    pub fr_display: Option<u32>,
    pub fr_respondents: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsBody {
    pub participants: usize,
    pub responses: usize,
    pub cohort_mean: Option<RateCell>,
    pub rows: Vec<MetricsRow>,
}

impl MetricsBody {
    pub fn uil_display(&self, area: &str) -> Option<u32> {
        self.rows.iter().find(|r| r.uil_area.as_ref().is_some_and(|a| a.as_str() == area)).and_then(|r| r.uil_display)
    }

    pub fn fr_display(&self, area: &str) -> Option<u32> {
        self.rows.iter().find(|r| r.fr_area.as_ref().is_some_and(|a| a.as_str() == area)).and_then(|r| r.fr_display)
    }

    pub fn marker(&self, area: &str) -> Option<Marker> {
        self.rows.iter().find(|r| r.uil_area.as_ref().is_some_and(|a| a.as_str() == area)).map(|r| r.marker)
    }
}

/// One ranked element of an area, or a bare area line when nothing matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticRow {
    pub area_id: AreaId,
    pub area_name: String,
    pub responses: usize,
    pub tokens: usize,
    pub hits: u64,
    pub matched_tokens: usize,
    pub unmatched_tokens: usize,
    pub rank: Option<u32>,
    pub group: Option<ThematicGroup>,
    pub theme: Option<Theme>,
    pub canonical_term: Option<String>,
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticBody {
    pub lexicon_version: String,
    pub rows: Vec<SemanticRow>,
}

impl SemanticBody {
    /// `(group, term, count)` triples of an area, in rank order.
    pub fn elements(&self, area: &str) -> Vec<(ThematicGroup, String, u64)> {
        self.rows
            .iter()
            .filter(|r| r.area_id.as_str() == area)
            .filter_map(|r| Some((r.group?, r.canonical_term.clone()?, r.count?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicsRow {
    pub category: String,
    pub value: String,
    pub participants: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicsBody {
    pub total: usize,
    pub age_min: Option<u32>,
    pub age_max: Option<u32>,
    pub age_unspecified: usize,
    pub rows: Vec<DemographicsRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub display_percent: u32,
    pub participants: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBody {
    pub participants: usize,
    pub cohort_mean: Option<RateCell>,
    pub rows: Vec<HistogramRow>,
}

impl HistogramBody {
    pub fn bin(&self, display: u32) -> usize {
        self.rows.iter().find(|r| r.display_percent == display).map_or(0, |r| r.participants)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportBody {
    Metrics(MetricsBody),
    Semantic(SemanticBody),
    Demographics(DemographicsBody),
    Histogram(HistogramBody),
    InsufficientData { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub kind: ReportKind,
    pub study_id: String,
    pub group: GroupView,
    /// Time of the last event in the snapshot, so equal snapshots give
    /// equal documents.
    pub generated_at: String,
    pub options: ReportOptions,
    pub body: ReportBody,
}

fn timestamp(ms: u64) -> String {
    chrono::DateTime::from_timestamp_millis(ms as i64)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn insufficient(reason: impl Into<String>) -> ReportBody {
    ReportBody::InsufficientData { reason: reason.into() }
}

/// Computes a report from the snapshot.
pub fn build_report(
    snapshot: &StudySnapshot,
    lexicon: &SemanticLexicon,
    kind: ReportKind,
    group: GroupView,
    options: &ReportOptions,
) -> Result<ReportDocument, ReportError> {
    let study = snapshot.study.as_ref().ok_or(ReportError::NoStudy)?;
    if options.k == 0 {
        return Err(ReportError::InvalidK);
    }
    if options.threshold == 0 {
        return Err(ReportError::InvalidThreshold);
    }
    if kind == ReportKind::Semantic && options.items.is_empty() {
        return Err(ReportError::NoItems);
    }
    let mut options = options.clone();
    options.familiarity_pooling = Some(options.familiarity_pooling.unwrap_or(study.familiarity_pooling));
    let mut items = options.items.clone();
    items.sort();
    items.dedup();
    options.items = items;

    let responses = snapshot.responses_in_order();
    let ev = Evaluation::new(study, &snapshot.participants, &responses);
    let members: Vec<&ParticipantRecord> = snapshot.participants.iter().filter(|p| group.contains(p.group)).collect();
    let member_ids: BTreeSet<_> = members.iter().map(|p| &p.participant_id).collect();
    let group_responses = responses.iter().filter(|r| member_ids.contains(&r.participant_id)).count();
    let name = |a: &AreaId| study.area(a).map_or_else(|| a.to_string(), |x| x.display_name.clone());
    let cell = |r: vu_core::metrics::AccuracyResult| RateCell {
        correct: r.inputs.correct,
        considered: r.inputs.considered,
        display: r.rate.display(),
    };

    let body = match kind {
        ReportKind::Demographics if members.is_empty() => insufficient("no participants in this group"),
        ReportKind::Demographics => {
            let owned: Vec<ParticipantRecord> = members.iter().map(|p| (*p).clone()).collect();
            let s = summarize_cohort(&owned);
            let mut rows = vec![
                DemographicsRow { category: "group".into(), value: "local".into(), participants: s.local },
                DemographicsRow { category: "group".into(), value: "foreign".into(), participants: s.foreign },
            ];
            for (bucket, n) in &s.residence {
                rows.push(DemographicsRow { category: "residence".into(), value: bucket.as_str().into(), participants: *n });
            }
            rows.push(DemographicsRow {
                category: "residence".into(),
                value: "unspecified".into(),
                participants: s.residence_unspecified,
            });
            ReportBody::Demographics(DemographicsBody {
                total: s.total,
                age_min: s.age_min,
                age_max: s.age_max,
                age_unspecified: s.age_unspecified,
                rows,
            })
        }
        _ if group_responses == 0 => insufficient("no responses from this group"),
        ReportKind::Histogram => {
            let rows = ev
                .accuracy_histogram(group, options.policy)
                .into_iter()
                .map(|(display_percent, participants)| HistogramRow { display_percent, participants })
                .collect::<Vec<_>>();
            ReportBody::Histogram(HistogramBody {
                participants: rows.iter().map(|r| r.participants).sum(),
                cohort_mean: ev.cohort_mean_accuracy(group, options.policy).ok().map(cell),
                rows,
            })
        }
        ReportKind::Semantic => {
            let opts = SemanticOptions { items: options.items.iter().copied().collect(), group };
            let table = element_frequencies(&ev, lexicon, &opts);
            let top = top_k_elements(&table, options.k).map_err(|_| ReportError::InvalidK)?;
            let mut rows = Vec::new();
            for area in &study.areas {
                let st = top.stats.get(&area.area_id).copied().unwrap_or_default();
                let base = SemanticRow {
                    area_id: area.area_id.clone(),
                    area_name: area.display_name.clone(),
                    responses: st.responses,
                    tokens: st.tokens,
                    hits: st.hits,
                    matched_tokens: st.matched_tokens,
                    unmatched_tokens: st.unmatched_tokens,
                    rank: None,
                    group: None,
                    theme: None,
                    canonical_term: None,
                    count: None,
                };
                let elements = top.areas.get(&area.area_id).map(Vec::as_slice).unwrap_or_default();
                if elements.is_empty() {
                    rows.push(base.clone());
                }
                for (i, e) in elements.iter().enumerate() {
                    rows.push(SemanticRow {
                        rank: Some(i as u32 + 1),
                        group: Some(e.group),
                        theme: Some(e.group.theme()),
                        canonical_term: Some(e.canonical_term.clone()),
                        count: Some(e.count),
                        ..base.clone()
                    });
                }
            }
            ReportBody::Semantic(SemanticBody { lexicon_version: lexicon.version().to_string(), rows })
        }
        ReportKind::Metrics => {
            let pooling = options.familiarity_pooling.unwrap_or_default();
            let uil = ev.uil_by_area(group, options.policy);
            let fr = ev.familiarity_table(group, pooling);
            let uil_rates: BTreeMap<AreaId, RatePercent> = uil.iter().map(|(a, r)| (a.clone(), r.rate)).collect();
            let fr_rates: BTreeMap<AreaId, RatePercent> = fr.iter().map(|(a, (r, _))| (a.clone(), *r)).collect();
            let ut = rank_table(&uil_rates, MetricKind::Uil, group, &study.areas);
            let ft = rank_table(&fr_rates, MetricKind::FamiliarityRate, group, &study.areas);
            // markers compare areas present in both tables
            let shared = |m: &BTreeMap<AreaId, RatePercent>, other: &BTreeMap<AreaId, RatePercent>| {
                m.iter().filter(|(a, _)| other.contains_key(*a)).map(|(a, v)| (a.clone(), *v)).collect()
            };
            let highlighted: BTreeSet<AreaId> = study.highlighted_areas.iter().cloned().collect();
            let markers: BTreeMap<AreaId, (Marker, i64)> = divergence_markers(
                &rank_table(&shared(&uil_rates, &fr_rates), MetricKind::Uil, group, &study.areas),
                &rank_table(&shared(&fr_rates, &uil_rates), MetricKind::FamiliarityRate, group, &study.areas),
                options.threshold,
                &highlighted,
            )
            .map_err(|_| ReportError::InvalidThreshold)?
            .into_iter()
            .map(|m| (m.area_id, (m.marker, m.rank_delta)))
            .collect();
            let n = ut.rows.len().max(ft.rows.len());
            let rows = (0..n)
                .map(|i| {
                    let u = ut.rows.get(i);
                    let f = ft.rows.get(i);
                    let m = u.and_then(|u| markers.get(&u.area_id));
                    MetricsRow {
                        position: i as u32 + 1,
                        uil_area: u.map(|u| u.area_id.clone()),
                        uil_name: u.map(|u| name(&u.area_id)),
                        uil_correct: u.map(|u| uil[&u.area_id].inputs.correct),
                        uil_considered: u.map(|u| uil[&u.area_id].inputs.considered),
                        uil_display: u.map(|u| u.metric.display()),
                        marker: m.map_or(Marker::None, |m| m.0),
                        rank_delta: m.map(|m| m.1),
                        fr_area: f.map(|f| f.area_id.clone()),
                        fr_name: f.map(|f| name(&f.area_id)),
                        fr_numerator: f.map(|f| *f.metric.exact().numer()),
                        fr_denominator: f.map(|f| *f.metric.exact().denom()),
                        fr_display: f.map(|f| f.metric.display()),
                        fr_respondents: f.map(|f| fr[&f.area_id].1),
                    }
                })
                .collect();
            ReportBody::Metrics(MetricsBody {
                participants: members.len(),
                responses: group_responses,
                cohort_mean: ev.cohort_mean_accuracy(group, options.policy).ok().map(cell),
                rows,
            })
        }
    };
    Ok(ReportDocument {
        kind,
        study_id: study.study_id.clone(),
        group,
        generated_at: timestamp(snapshot.last_recorded_at),
        options,
        body,
    })
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed metadata line {0}")]
    Meta(usize),
}

pub fn render(doc: &ReportDocument, format: Render) -> String {
    match format {
        Render::Json => to_json(doc),
        Render::Csv => to_csv(doc),
        Render::Text => to_text(doc),
    }
}

pub fn to_json(doc: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("reports serialize");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<ReportDocument, ParseError> {
    Ok(serde_json::from_str(text)?)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.to_string())),
    }
}

fn insert_path(root: &mut Map<String, Value>, path: &str, v: Value) {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().unwrap_or_default();
    let mut cur = root;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("metadata paths address objects");
    }
    cur.insert(last.to_string(), v);
}

fn csv_rows<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

pub fn to_csv(doc: &ReportDocument) -> String {
    let mut v = serde_json::to_value(doc).expect("reports serialize");
    if let Some(body) = v.get_mut("body").and_then(Value::as_object_mut) {
        body.remove("rows");
    }
    let mut meta = Vec::new();
    flatten("", &v, &mut meta);
    let mut out = String::new();
    for (k, val) in meta {
        let _ = writeln!(out, "# {k}: {val}");
    }
    out.push_str(&match &doc.body {
        ReportBody::Metrics(b) => csv_rows(&b.rows),
        ReportBody::Semantic(b) => csv_rows(&b.rows),
        ReportBody::Demographics(b) => csv_rows(&b.rows),
        ReportBody::Histogram(b) => csv_rows(&b.rows),
        ReportBody::InsufficientData { .. } => String::new(),
    });
    out
}

fn parse_rows<T: Serialize + serde::de::DeserializeOwned>(table: &str) -> Result<Value, ParseError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(table.as_bytes());
    let rows = rdr.deserialize::<T>().collect::<Result<Vec<T>, _>>()?;
    Ok(serde_json::to_value(rows)?)
}

pub fn from_csv(text: &str) -> Result<ReportDocument, ParseError> {
    let mut root = Map::new();
    let mut table = String::new();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        match line.strip_prefix("# ") {
            Some(m) => {
                let (k, v) = m.trim_end_matches(['\n', '\r']).split_once(": ").ok_or(ParseError::Meta(i + 1))?;
                insert_path(&mut root, k, serde_json::from_str(v)?);
            }
            None => table.push_str(line),
        }
    }
    let kind = root.get("body").and_then(|b| b.get("type")).and_then(Value::as_str).unwrap_or_default().to_string();
    let rows = match kind.as_str() {
        "metrics" => Some(parse_rows::<MetricsRow>(&table)?),
        "semantic" => Some(parse_rows::<SemanticRow>(&table)?),
        "demographics" => Some(parse_rows::<DemographicsRow>(&table)?),
        "histogram" => Some(parse_rows::<HistogramRow>(&table)?),
        _ => None,
    };
    if let Some(rows) = rows {
        insert_path(&mut root, "body.rows", rows);
    }
    Ok(serde_json::from_value(Value::Object(root))?)
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(n)))
}

fn heading(doc: &ReportDocument) -> String {
    let title = match doc.kind {
        ReportKind::Metrics => "Accuracy rate (UIL) and familiarity rate",
        ReportKind::Semantic => "Core identity-forming elements",
        ReportKind::Demographics => "Cohort",
        ReportKind::Histogram => "Accuracy rate per participant",
    };
    format!("{title} - study {} - group {} - generated {}\n", doc.study_id, doc.group.as_str(), doc.generated_at)
}

pub fn to_text(doc: &ReportDocument) -> String {
    let mut out = heading(doc);
    let o = &doc.options;
    match &doc.body {
        ReportBody::InsufficientData { reason } => {
            let _ = writeln!(out, "insufficient data: {reason}");
        }
        ReportBody::Metrics(b) => {
            let pooling = o.familiarity_pooling.unwrap_or_default().as_str();
            let _ = writeln!(
                out,
                "policy {} - threshold {} - familiarity pooling {pooling}",
                o.policy.as_str(),
                o.threshold
            );
            let _ = write!(out, "participants {} - responses {}", b.participants, b.responses);
            if let Some(m) = b.cohort_mean {
                let _ = write!(out, " - mean accuracy {}% ({}/{})", m.display, m.correct, m.considered);
            }
            out.push_str("\n\n");
            let w = b
                .rows
                .iter()
                .flat_map(|r| [r.uil_name.as_deref(), r.fr_name.as_deref()])
                .flatten()
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(4)
                .max(4);
            let _ = writeln!(out, " #  {}  Familiarity rate %", pad("Accuracy rate (UIL) %", w + 10));
            for r in &b.rows {
                let left = match (&r.uil_name, r.uil_display) {
                    (Some(n), Some(d)) => format!("{} {:>3}  {}", pad(n, w), d, pad(r.marker.symbol(), 2)),
                    _ => String::new(),
                };
                let right = match (&r.fr_name, r.fr_display) {
                    (Some(n), Some(d)) => format!("{} {:>3}", pad(n, w), d),
                    _ => String::new(),
                };
                let _ = writeln!(out, "{:>2}  {}  {}", r.position, pad(&left, w + 10), right).map(|_| ());
            }
        }
        ReportBody::Semantic(b) => {
            let items: Vec<&str> = o.items.iter().map(|i| i.as_str()).collect();
            let _ = writeln!(out, "k {} - items {} - lexicon {}\n", o.k, items.join(","), b.lexicon_version);
            let mut areas: Vec<(&str, Vec<String>)> = Vec::new();
            for r in &b.rows {
                if areas.last().is_none_or(|(a, _)| *a != r.area_name.as_str()) {
                    areas.push((r.area_name.as_str(), Vec::new()));
                }
                if let (Some(g), Some(t), Some(c)) = (r.group, &r.canonical_term, r.count) {
                    areas.last_mut().expect("pushed above").1.push(format!("{} - {t} ({c})", g.as_str()));
                }
            }
            let w = areas.iter().map(|(a, _)| a.chars().count()).max().unwrap_or(4);
            let cw = areas.iter().flat_map(|(_, e)| e.iter().map(|s| s.chars().count())).max().unwrap_or(0);
            for (a, elems) in areas {
                let cells: Vec<String> = elems.iter().map(|e| pad(e, cw)).collect();
                let _ = writeln!(out, "{}  {}", pad(a, w), cells.join("  ").trim_end());
            }
        }
        ReportBody::Demographics(b) => {
            let _ = writeln!(out, "participants {}", b.total);
            if let (Some(lo), Some(hi)) = (b.age_min, b.age_max) {
                let _ = writeln!(out, "age {lo}-{hi} (unspecified {})", b.age_unspecified);
            }
            for r in &b.rows {
                let _ = writeln!(out, "{} {}: {}", r.category, r.value, r.participants);
            }
        }
        ReportBody::Histogram(b) => {
            let _ = write!(out, "policy {} - participants {}", o.policy.as_str(), b.participants);
            if let Some(m) = b.cohort_mean {
                let _ = write!(out, " - mean accuracy {}% ({}/{})", m.display, m.correct, m.considered);
            }
            out.push_str("\n\n");
            for r in &b.rows {
                let _ = writeln!(out, "{:>4}%  {:>3}  {}", r.display_percent, r.participants, "#".repeat(r.participants));
            }
        }
    }
    out
}
