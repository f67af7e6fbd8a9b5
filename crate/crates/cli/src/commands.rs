use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use stepcast_core::corpus::{load_corpus, load_devices, CorpusError, Instruction};
use stepcast_core::device::{render_svg, DeviceDef, SvgView};
use stepcast_core::executor::ExecConfig;
use stepcast_core::metrics::{ablation, render_table, AblationReport};
use stepcast_core::pipeline::{prepare, run, SkipRecord};
use stepcast_core::synth::{write_bundle, MergeMode};
use stepcast_core::{parse, ExecutionTrace};

/// Everything a pipeline or ablation run needs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub device_files: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub exec: ExecConfig,
    pub lenient: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] CorpusError),
    #[error("{0}")]
    Usage(String),
    #[error("{count} instruction(s) could not be parsed:\n{details}")]
    Unparsable { count: usize, details: String },
    #[error("no tutorial was written")]
    NothingWritten,
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(wrap)?;
    }
    fs::write(path, contents).map_err(wrap)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn unparsable_error(skipped: &[SkipRecord]) -> CliError {
    CliError::Unparsable {
        count: skipped.len(),
        details: skipped
            .iter()
            .map(|s| format!("  {}: {}", s.id, s.reason))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(Vec<Instruction>, Vec<Arc<DeviceDef>>), CliError> {
    if cfg.device_files.is_empty() {
        return Err(CliError::Usage("at least one --device is required".into()));
    }
    if cfg.exec.beams == 0 {
        return Err(CliError::Usage("--beams must be at least 1".into()));
    }
    let corpus = load_corpus(&cfg.corpus_dir)?;
    let devices = load_devices(&cfg.device_files)?;
    Ok((corpus, devices))
}

#[derive(Debug, Serialize)]
pub struct ParsedInstruction {
    pub id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beams: Option<Vec<stepcast_core::ParseBeam>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Parses every instruction in a corpus. Parse failures are an error
/// unless `lenient` is set, in which case they are reported inline.
pub fn cmd_parse(corpus_dir: &Path, k: usize, lenient: bool) -> Result<Vec<ParsedInstruction>, CliError> {
    if k == 0 {
        return Err(CliError::Usage("--beams must be at least 1".into()));
    }
    let corpus = load_corpus(corpus_dir)?;
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for ins in corpus {
        match parse(&ins.text, k) {
            Ok(beams) => out.push(ParsedInstruction {
                id: ins.id,
                text: ins.text,
                beams: Some(beams),
                error: None,
            }),
            Err(e) => {
                failures.push(SkipRecord {
                    id: ins.id.clone(),
                    reason: e.to_string(),
                });
                out.push(ParsedInstruction {
                    id: ins.id,
                    text: ins.text,
                    beams: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    if !lenient && !failures.is_empty() {
        return Err(unparsable_error(&failures));
    }
    Ok(out)
}

/// Writes one parse JSON per instruction into `out_dir`.
pub fn write_parses(parsed: &[ParsedInstruction], out_dir: &Path) -> Result<(), CliError> {
    for p in parsed {
        write_file(&out_dir.join(format!("{}.json", p.id)), pretty(p))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TutorialSummary {
    pub id: String,
    pub complete: bool,
    pub mode: MergeMode,
    pub steps: usize,
    pub visual_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub tutorials: Vec<TutorialSummary>,
    pub skipped: Vec<SkipRecord>,
}

impl PipelineReport {
    pub fn complete(&self) -> usize {
        self.tutorials.iter().filter(|t| t.complete).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.tutorials {
            let status = if t.complete { "complete" } else { "fallback" };
            out.push_str(&format!(
                "{:<9} {} ({}/{} steps with visuals)\n",
                status, t.id, t.visual_steps, t.steps
            ));
        }
        for s in &self.skipped {
            out.push_str(&format!("skipped   {}: {}\n", s.id, s.reason));
        }
        out.push_str(&format!(
            "{} tutorials: {} complete, {} fallback, {} skipped\n",
            self.tutorials.len(),
            self.complete(),
            self.tutorials.len() - self.complete(),
            self.skipped.len()
        ));
        out
    }
}

#[derive(Serialize)]
struct FrameEntry {
    path: String,
    beam: usize,
    step: usize,
    screen_id: String,
    scroll_offset: usize,
    tick: u64,
}

fn write_frames(
    out_dir: &Path,
    id: &str,
    traces: &[ExecutionTrace],
    screen_size: [i32; 2],
) -> Result<Vec<FrameEntry>, CliError> {
    let mut entries = Vec::new();
    for trace in traces {
        for outcome in &trace.outcomes {
            let Some(step) = outcome.executed() else { continue };
            for (n, frame) in step.frames.iter().enumerate() {
                let rel = format!("{id}/{}/{}_{n}.svg", trace.beam_index, outcome.step_index);
                let svg = render_svg(frame, screen_size, SvgView::default());
                write_file(&out_dir.join("frames").join(&rel), svg)?;
                entries.push(FrameEntry {
                    path: rel,
                    beam: trace.beam_index,
                    step: outcome.step_index,
                    screen_id: frame.screen_id.clone(),
                    scroll_offset: frame.scroll_offset,
                    tick: frame.tick,
                });
            }
        }
    }
    Ok(entries)
}

/// Parse, execute, merge and write a bundle for every instruction.
///
/// Layout under `out_dir`: `tutorials/<id>/` bundles, `traces/<id>.json`,
/// `frames/<id>/<beam>/<step>_<n>.svg` with `frames/manifest.json`, and
/// `report.json`.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, CliError> {
    let (corpus, devices) = load_inputs(cfg)?;
    let (prepared, mut skipped) = prepare(&corpus, &devices, cfg.exec.beams);
    if !cfg.lenient && !skipped.is_empty() {
        return Err(unparsable_error(&skipped));
    }
    let (results, synth_skips) = run(&prepared, &cfg.exec);
    skipped.extend(synth_skips);
    skipped.sort_by(|a, b| a.id.cmp(&b.id));

    let tutorials_dir = cfg.out_dir.join("tutorials");
    let mut summaries = Vec::new();
    let mut manifest = Vec::new();
    for result in &results {
        let t = &result.tutorial;
        let screen_size = prepared
            .iter()
            .find(|p| p.id == result.id)
            .map_or([0, 0], |p| p.device.screen_size);
        write_bundle(t, &tutorials_dir).map_err(|e| CliError::Other(e.into()))?;
        write_file(
            &cfg.out_dir.join("traces").join(format!("{}.json", result.id)),
            pretty(&json!({ "instruction_id": result.id, "traces": result.traces })),
        )?;
        manifest.extend(write_frames(&cfg.out_dir, &result.id, &result.traces, screen_size)?);
        summaries.push(TutorialSummary {
            id: t.id.clone(),
            complete: t.complete,
            mode: t.provenance.merge_report.mode.clone(),
            steps: t.steps.len(),
            visual_steps: t.steps.iter().filter(|s| s.has_visuals).count(),
        });
    }
    write_file(&cfg.out_dir.join("frames").join("manifest.json"), pretty(&manifest))?;
    let report = PipelineReport {
        tutorials: summaries,
        skipped,
    };
    write_file(&cfg.out_dir.join("report.json"), pretty(&report))?;
    if report.tutorials.is_empty() {
        return Err(CliError::NothingWritten);
    }
    Ok(report)
}

/// Runs the four-way ablation and writes `metrics.json` into `out_dir`.
pub fn cmd_ablation(cfg: &PipelineConfig) -> Result<AblationReport, CliError> {
    let (corpus, devices) = load_inputs(cfg)?;
    let report = ablation(&corpus, &devices, &cfg.exec);
    if !cfg.lenient && !report.skipped.is_empty() {
        return Err(unparsable_error(&report.skipped));
    }
    write_file(&cfg.out_dir.join("metrics.json"), pretty(&report))?;
    Ok(report)
}

pub fn ablation_table(report: &AblationReport) -> String {
    render_table(&report.rows)
}
