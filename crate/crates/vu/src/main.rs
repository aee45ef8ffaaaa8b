use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use vu::fixture::{build_fixture, FixtureTargets, LEXICON_FILE, PARTICIPANTS_FILE, RESPONSES_FILE, STUDY_FILE};
use vu::formats::{load_lexicon, load_study, starter_lexicon};
use vu::ingest::{export_participants, export_responses, import_participants, import_responses, ImportFormat, ImportReport};
use vu::platform::{system_clock, Platform};
use vu::report::{build_report, render, ReportKind};
use vu::service::{report_options, serve};
use vu::store::{load_snapshot, study_log_path, EventLog};
use vu_core::design::{
    validate_dataset_composition, validate_lora_config, validate_sequence_manifest, validate_study, DatasetManifest,
    LoraTrainConfig, Severity, StimulusManifest, ValidationReport, DEFAULT_COMPOSITION_TOLERANCE_PP,
    DEFAULT_FPS_TOLERANCE,
};
use vu_core::events::EventPayload;
use vu_core::semantic::SemanticLexicon;

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Parser)]
#[command(name = "vu", version, about = "Urban identity evaluation studies: validate, ingest, report, serve")]
struct Cli {
    /// Directory holding one sub-directory per study.
    #[arg(long, env = "VU_DATA_DIR", default_value = "vu-data", global = true)]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Study,
    Participants,
    Responses,
}

#[derive(Clone, Copy, ValueEnum)]
enum Exported {
    Participants,
    Responses,
}

#[derive(Subcommand)]
enum Command {
    /// Check a study definition, stimulus manifest, dataset manifest or
    /// LoRA configuration.
    Validate {
        path: PathBuf,
        /// Report stimulus manifest failures as warnings.
        #[arg(long)]
        lenient: bool,
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Load a study definition, participants or responses into a study's
    /// log. A directory is read as a generated fixture.
    Ingest {
        path: PathBuf,
        #[arg(long)]
        study: Option<String>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// csv or jsonl; defaults from the file extension.
        #[arg(long)]
        format: Option<String>,
    },
    /// Compute a report: metrics, semantic, demographics or histogram.
    Report {
        kind: String,
        #[arg(long)]
        study: String,
        #[arg(long, default_value = "general")]
        group: String,
        #[arg(long)]
        k: Option<String>,
        /// exclude or incorrect
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        threshold: Option<String>,
        /// respondents or group_mean; defaults to the study setting.
        #[arg(long)]
        fr_pooling: Option<String>,
        /// Comma-separated free-text items, e.g. Q2,Q3.
        #[arg(long)]
        items: Option<String>,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Write responses or participants of a study.
    Export {
        what: Exported,
        #[arg(long)]
        study: String,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the nine-area Tokyo reference dataset.
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Run the HTTP service over the data directory.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    Data(String),
}

impl Failure {
    fn exit(&self) -> (u8, &str) {
        match self {
            Failure::Usage(m) => (EXIT_USAGE, m),
            Failure::Validation(m) => (EXIT_VALIDATION, m),
            Failure::Data(m) => (EXIT_DATA, m),
        }
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn now() -> u64 {
    (system_clock())()
}

fn write_out(out: Option<&Path>, text: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => match std::io::stdout().write_all(text) {
            // the reader went away, e.g. `vu export ... | head`
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(data),
        },
    }
}

fn print_findings(r: &ValidationReport, format: &str) -> Result<(), Failure> {
    if format.starts_with("json") {
        let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
        s.push('\n');
        return write_out(None, s.as_bytes());
    }
    if format != "text" {
        return Err(Failure::Usage(format!("unknown format `{format}`")));
    }
    let mut s = String::new();
    for f in &r.findings {
        let sev = match f.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        s.push_str(&format!("{sev} {} {}: {}", f.code, f.subject, f.message));
        if let Some(o) = &f.observed {
            s.push_str(&format!(" (observed {o}"));
            if let Some(a) = &f.allowed {
                s.push_str(&format!(", allowed {a}"));
            }
            s.push(')');
        }
        s.push('\n');
    }
    for (k, v) in &r.derived {
        s.push_str(&format!("derived {k} = {v:.2}\n"));
    }
    s.push_str(if r.passed() { "passed\n" } else { "failed\n" });
    write_out(None, s.as_bytes())
}

fn parse_as<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Option<T> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(text).ok()
    } else {
        toml::from_str(text).ok()
    }
}

fn validate(path: &Path, lenient: bool, format: &str) -> Result<(), Failure> {
    let report = match load_study(path) {
        Ok(def) => validate_study(&def, !lenient),
        Err(study_err) => {
            let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            if let Some(m) = parse_as::<StimulusManifest>(path, &text) {
                validate_sequence_manifest(&m, DEFAULT_FPS_TOLERANCE)
            } else if let Some(d) = parse_as::<DatasetManifest>(path, &text) {
                validate_dataset_composition(&d, DEFAULT_COMPOSITION_TOLERANCE_PP)
            } else if let Some(c) = parse_as::<LoraTrainConfig>(path, &text) {
                validate_lora_config(&c)
            } else {
                return Err(Failure::Validation(study_err.to_string()));
            }
        }
    };
    print_findings(&report, format)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{}: validation failed", path.display())))
    }
}

fn import_format(flag: Option<&str>, path: &Path) -> Result<ImportFormat, Failure> {
    match flag {
        Some(f) => ImportFormat::parse(f).ok_or_else(|| Failure::Usage(format!("unknown import format `{f}`"))),
        None => Ok(ImportFormat::from_path(path).unwrap_or(ImportFormat::Csv)),
    }
}

fn open_log(data_dir: &Path, study: &str) -> Result<EventLog, Failure> {
    let path = study_log_path(data_dir, study).map_err(|e| Failure::Usage(e.to_string()))?;
    let (log, warnings) = EventLog::open(&path).map_err(data)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(log)
}

fn summarize(what: &str, r: &ImportReport) -> String {
    let mut s = format!("{what}: {} accepted, {} rejected", r.accepted, r.rejected.len());
    if r.registered > 0 {
        s.push_str(&format!(", {} participants registered", r.registered));
    }
    s.push('\n');
    for x in &r.rejected {
        s.push_str(&format!("  row {}: {} {}\n", x.row, x.code, x.reason));
    }
    s
}

fn ingest_study(data_dir: &Path, path: &Path, study: Option<&str>) -> Result<String, Failure> {
    let def = load_study(path).map_err(|e| Failure::Validation(e.to_string()))?;
    if let Some(s) = study.filter(|s| *s != def.study_id) {
        return Err(Failure::Usage(format!("--study {s} does not match the definition's study_id `{}`", def.study_id)));
    }
    let report = validate_study(&def, false);
    if !report.passed() {
        print_findings(&report, "text")?;
        return Err(Failure::Validation(format!("{}: validation failed", path.display())));
    }
    let mut log = open_log(data_dir, &def.study_id)?;
    if log.snapshot().study.is_some() {
        return Err(data(format!("study `{}` already exists", def.study_id)));
    }
    let id = def.study_id.clone();
    log.append(EventPayload::StudyCreated(def), now()).map_err(data)?;
    Ok(id)
}

fn ingest_table(data_dir: &Path, path: &Path, study: &str, kind: Kind, format: Option<&str>) -> Result<bool, Failure> {
    let format = import_format(format, path)?;
    let mut log = open_log(data_dir, study)?;
    if log.snapshot().study.is_none() {
        return Err(data(format!("study `{study}` does not exist; ingest its definition first")));
    }
    let file = fs::File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let (what, report) = match kind {
        Kind::Participants => ("participants", import_participants(&mut log, file, format, now())),
        _ => ("responses", import_responses(&mut log, file, format, now())),
    };
    let report = report.map_err(data)?;
    write_out(None, summarize(what, &report).as_bytes())?;
    Ok(report.rejected.is_empty())
}

fn ingest(data_dir: &Path, path: &Path, study: Option<&str>, kind: Option<Kind>, format: Option<&str>) -> Result<(), Failure> {
    if path.is_dir() {
        let id = ingest_study(data_dir, &path.join(STUDY_FILE), study)?;
        let mut clean = ingest_table(data_dir, &path.join(PARTICIPANTS_FILE), &id, Kind::Participants, None)?;
        clean &= ingest_table(data_dir, &path.join(RESPONSES_FILE), &id, Kind::Responses, None)?;
        let lex = path.join(LEXICON_FILE);
        if lex.is_file() {
            let dest = study_log_path(data_dir, &id).map_err(data)?.with_file_name(LEXICON_FILE);
            fs::copy(&lex, &dest).map_err(|e| data(format!("{}: {e}", dest.display())))?;
        }
        return if clean { Ok(()) } else { Err(data("some rows were rejected")) };
    }
    let name = path.file_name().map(|n| n.to_string_lossy().to_lowercase()).unwrap_or_default();
    let kind = kind.unwrap_or(if name.ends_with(".toml") || name.ends_with(".json") {
        Kind::Study
    } else if name.contains("participant") {
        Kind::Participants
    } else {
        Kind::Responses
    });
    match kind {
        Kind::Study => {
            let id = ingest_study(data_dir, path, study)?;
            write_out(None, format!("study {id} created\n").as_bytes())
        }
        _ => {
            let study = study.ok_or_else(|| Failure::Usage("--study is required".into()))?;
            if ingest_table(data_dir, path, study, kind, format)? {
                Ok(())
            } else {
                Err(data("some rows were rejected"))
            }
        }
    }
}

fn resolve_lexicon(flag: Option<&Path>, study_dir: Option<&Path>) -> Result<SemanticLexicon, Failure> {
    if let Some(p) = flag {
        return load_lexicon(p).map_err(data);
    }
    match study_dir.map(|d| d.join(LEXICON_FILE)).filter(|p| p.is_file()) {
        Some(p) => load_lexicon(&p).map_err(data),
        None => Ok(starter_lexicon()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let data_dir = cli.data_dir;
    match cli.command {
        Command::Validate { path, lenient, format } => validate(&path, lenient, &format),
        Command::Ingest { path, study, kind, format } => {
            ingest(&data_dir, &path, study.as_deref(), kind, format.as_deref())
        }
        Command::Report { kind, study, group, k, policy, threshold, fr_pooling, items, format, out, lexicon } => {
            let kind = ReportKind::parse(&kind).ok_or_else(|| Failure::Usage(format!("unknown report kind `{kind}`")))?;
            let q: HashMap<String, String> = [
                ("group", Some(group)),
                ("k", k),
                ("policy", policy),
                ("threshold", threshold),
                ("fr", fr_pooling),
                ("items", items),
                ("format", Some(format)),
            ]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
            let (group, options, render_as) = report_options(&q).map_err(Failure::Usage)?;
            let path = study_log_path(&data_dir, &study).map_err(|e| Failure::Usage(e.to_string()))?;
            if !path.is_file() {
                return Err(data(format!("study `{study}` not found under {}", data_dir.display())));
            }
            let (snapshot, warnings) = load_snapshot(&path).map_err(data)?;
            for w in warnings {
                log::warn!("{w}");
            }
            let lex = resolve_lexicon(lexicon.as_deref(), path.parent())?;
            let doc = build_report(&snapshot, &lex, kind, group, &options).map_err(|e| Failure::Usage(e.to_string()))?;
            write_out(out.as_deref(), render(&doc, render_as).as_bytes())
        }
        Command::Export { what, study, format, out } => {
            let format = ImportFormat::parse(&format).ok_or_else(|| Failure::Usage(format!("unknown format `{format}`")))?;
            let path = study_log_path(&data_dir, &study).map_err(|e| Failure::Usage(e.to_string()))?;
            if !path.is_file() {
                return Err(data(format!("study `{study}` not found under {}", data_dir.display())));
            }
            let (snapshot, _) = load_snapshot(&path).map_err(data)?;
            let mut buf = Vec::new();
            match what {
                Exported::Responses => export_responses(&snapshot, format, &mut buf),
                Exported::Participants => export_participants(&snapshot, format, &mut buf),
            }
            .map_err(data)?;
            write_out(out.as_deref(), &buf)
        }
        Command::Fixture { out, seed, lexicon } => {
            let lex = resolve_lexicon(lexicon.as_deref(), None)?;
            let fixture = build_fixture(&FixtureTargets::tokyo(), &lex, seed).map_err(|e| Failure::Validation(e.to_string()))?;
            let files = fixture.write(&out).map_err(data)?;
            let mut s = String::new();
            for f in files {
                s.push_str(&format!("wrote {}\n", f.display()));
            }
            write_out(None, s.as_bytes())
        }
        Command::Serve { addr } => {
            let platform = Arc::new(Platform::open(&data_dir, system_clock()).map_err(data)?);
            let rt = tokio::runtime::Runtime::new().map_err(data)?;
            rt.block_on(serve(platform, &addr)).map_err(data)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = f.exit();
            eprintln!("vu: {msg}");
            ExitCode::from(code)
        }
    }
}
