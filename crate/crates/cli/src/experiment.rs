//! Loading experiment inputs, running sweeps and writing results.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use gg_core::activity::{bind_items, parse_program, simulate_human, ActivityProgram, DurationTable, OccupancyTrace};
use gg_core::map::{load_map, SemanticMap};
use gg_core::narrator::TemplateRegistry;
use gg_core::reasoner::ScoreMode;
use gg_core::scorer::{make_backend, Backend, BackendContext, OracleStubContext};
use gg_core::sim::{run_batch, BatchResult, BatchSummary, RunOutcome, Scenario, SimConfig};
use gg_core::PolicyKind;
use serde::Serialize;

use crate::config::{load_durations, ExperimentConfig, PromptVariant};

/// Map, program and the human trace they produce.
pub struct Inputs {
    pub env: String,
    pub program_name: String,
    pub map: SemanticMap,
    pub program: ActivityProgram,
    pub trace: OccupancyTrace,
}

/// `env0.map.json` → `env0`.
pub fn file_label(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

pub fn load_inputs(
    map_path: &Path,
    program_path: &Path,
    durations: &DurationTable,
    binding_seed: u64,
    horizon: u32,
) -> anyhow::Result<Inputs> {
    let map = load_map(map_path)?;
    let text = fs::read_to_string(program_path).with_context(|| format!("reading {}", program_path.display()))?;
    let program_name = file_label(program_path);
    let program =
        parse_program(&program_name, &text, durations).with_context(|| format!("in {}", program_path.display()))?;
    let binding = bind_items(&program, &map, binding_seed)?;
    let trace = simulate_human(&program, &binding, &map, horizon)?;
    Ok(Inputs {
        env: file_label(map_path),
        program_name,
        map,
        program,
        trace,
    })
}

pub fn durations_for(path: Option<&Path>) -> anyhow::Result<DurationTable> {
    match path {
        Some(p) => load_durations(p),
        None => Ok(DurationTable::default()),
    }
}

pub fn load_experiment_inputs(cfg: &ExperimentConfig) -> anyhow::Result<Inputs> {
    let durations = durations_for(cfg.duration_table.as_deref())?;
    load_inputs(&cfg.map, &cfg.program, &durations, cfg.binding_seed, cfg.horizon)
}

/// Builds the scorer for a scenario. The next-room oracle table is keyed on
/// the prompts produced by `template` and `binding`.
pub fn build_backend(
    spec: &str,
    inputs: &Inputs,
    templates: &TemplateRegistry,
    template: &str,
    binding: &str,
    window: usize,
) -> anyhow::Result<Arc<dyn Backend>> {
    let ctx = BackendContext {
        oracle: Some(OracleStubContext {
            map: &inputs.map,
            trace: &inputs.trace,
            templates,
            template,
            binding,
            window,
        }),
    };
    Ok(make_backend(spec, &ctx)?)
}

/// One (prompt, room time, policy) batch.
pub struct Cell {
    pub env: String,
    pub program: String,
    pub prompt: Option<String>,
    pub policy: PolicyKind,
    pub room_time: u32,
    pub seed: u64,
    pub result: BatchResult,
}

impl Cell {
    pub fn aborted(&self) -> usize {
        self.result.summary.aborted
    }
}

pub struct ScenarioSpec<'a> {
    pub template: &'a str,
    pub binding: &'a str,
    pub prompt: Option<&'a str>,
}

/// Runs every room time × policy combination for one prompt.
pub fn run_cells(
    cfg: &ExperimentConfig,
    inputs: &Inputs,
    backend: &dyn Backend,
    spec: &ScenarioSpec<'_>,
    policies: &[PolicyKind],
) -> anyhow::Result<Vec<Cell>> {
    let scenario = Scenario::new(&inputs.map, &inputs.trace, backend)
        .with_templates(cfg.templates.clone())
        .with_template(spec.template)
        .with_binding(spec.binding)
        .with_window(cfg.window)
        .with_score_mode(if cfg.per_token {
            ScoreMode::PerToken
        } else {
            ScoreMode::Product
        });
    let mut cells = Vec::new();
    for &room_time in &cfg.room_times {
        let sim = SimConfig {
            room_time,
            horizon: cfg.horizon,
            master_seed: cfg.seed,
        };
        for &policy in policies {
            let result = run_batch(&scenario, policy, &sim, cfg.restarts, cfg.jobs)?;
            cells.push(Cell {
                env: inputs.env.clone(),
                program: inputs.program_name.clone(),
                prompt: spec.prompt.map(String::from),
                policy,
                room_time,
                seed: cfg.seed,
                result,
            });
        }
    }
    Ok(cells)
}

/// Per-restart rows; aborted restarts are left out. A `prompt` column is
/// appended when any cell belongs to a prompt study.
pub fn write_runs_csv<W: Write>(cells: &[Cell], out: W) -> anyhow::Result<()> {
    let with_prompt = cells.iter().any(|c| c.prompt.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "restart", "policy", "env", "program", "T_r", "seed", "D_T", "t_c", "failed",
    ];
    if with_prompt {
        header.push("prompt");
    }
    w.write_record(&header)?;
    for c in cells {
        for (i, o) in c.result.outcomes.iter().enumerate() {
            let RunOutcome::Completed(m) = o else { continue };
            let mut row = vec![
                i.to_string(),
                c.policy.to_string(),
                c.env.clone(),
                c.program.clone(),
                c.room_time.to_string(),
                c.seed.to_string(),
                m.d_t.to_string(),
                m.t_c.map(|t| t.to_string()).unwrap_or_default(),
                u8::from(m.failed).to_string(),
            ];
            if with_prompt {
                row.push(c.prompt.clone().unwrap_or_default());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CellSummary<'a> {
    pub env: &'a str,
    pub program: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<&'a str>,
    pub policy: &'static str,
    pub room_time: u32,
    #[serde(flatten)]
    pub stats: &'a BatchSummary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub aborted_reasons: Vec<String>,
}

pub fn summary_json(cells: &[Cell], extra: serde_json::Value) -> serde_json::Value {
    let summaries: Vec<CellSummary<'_>> = cells
        .iter()
        .map(|c| CellSummary {
            env: &c.env,
            program: &c.program,
            prompt: c.prompt.as_deref(),
            policy: c.policy.name(),
            room_time: c.room_time,
            stats: &c.result.summary,
            aborted_reasons: c
                .result
                .outcomes
                .iter()
                .filter_map(|o| match o {
                    RunOutcome::Aborted(e) => Some(e.clone()),
                    RunOutcome::Completed(_) => None,
                })
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect(),
        })
        .collect();
    serde_json::json!({ "experiment": extra, "cells": summaries })
}

/// Writes `runs.csv` and `summary.json` under `dir`.
pub fn write_outputs(dir: &Path, cells: &[Cell], extra: serde_json::Value) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join("runs.csv");
    let f = fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_runs_csv(cells, std::io::BufWriter::new(f))?;
    let json_path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary_json(cells, extra))?;
    text.push('\n');
    fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    Ok(())
}

pub fn experiment_metadata(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "map": cfg.map.display().to_string(),
        "program": cfg.program.display().to_string(),
        "scorer": cfg.scorer,
        "template": cfg.template,
        "binding_sequence": cfg.binding_sequence,
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "binding_seed": cfg.binding_seed,
        "horizon": cfg.horizon,
        "window": cfg.window,
        "per_token": cfg.per_token,
    })
}

/// Human-readable one-line cell summary.
pub fn describe_cell(c: &Cell) -> String {
    let s = &c.result.summary;
    let tc = match (s.mean_t_c, s.std_t_c) {
        (Some(m), Some(sd)) => format!("{m:.1}±{sd:.1}"),
        _ => "-".into(),
    };
    format!(
        "{:<6} {:<8} T_r={:<4} {:<9} D_T {:>6.1}±{:<5.1} t_c {:>13} F {:>5.1}%{}",
        c.env,
        c.program,
        c.room_time,
        c.policy.name(),
        s.mean_d_t,
        s.std_d_t,
        tc,
        s.failure_pct,
        if s.aborted > 0 {
            format!("  ({} aborted)", s.aborted)
        } else {
            String::new()
        }
    )
}

fn narration_name(template: &str) -> &str {
    match template {
        "default" => "activity history",
        other => other,
    }
}

/// Prompt-study table: one row per prompt variant per room time, after a
/// naive baseline row.
pub fn prompt_table(baseline: &[Cell], studied: &[(PromptVariant, Vec<Cell>)]) -> String {
    let mut out = String::new();
    let mut by_tr: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    let row = |policy: &str, name: &str, narration: &str, binding: &str, s: &BatchSummary| {
        format!(
            "{:<9} | {:<6} | {:<16} | {:<52} | {:>6.1}±{:<5.1} | {:>5.1}",
            policy,
            name,
            narration,
            format!("{binding:?}"),
            s.mean_d_t,
            s.std_d_t,
            s.failure_pct
        )
    };
    for c in baseline {
        by_tr
            .entry(c.room_time)
            .or_default()
            .push(row(c.policy.name(), "-", "-", "-", &c.result.summary));
    }
    for (variant, cells) in studied {
        for c in cells {
            by_tr.entry(c.room_time).or_default().push(row(
                c.policy.name(),
                &variant.name,
                narration_name(&variant.template),
                &variant.binding,
                &c.result.summary,
            ));
        }
    }
    for (tr, rows) in by_tr {
        out.push_str(&format!("T_r = {tr}\n"));
        out.push_str(&format!(
            "{:<9} | {:<6} | {:<16} | {:<52} | {:>12} | {:>5}\n",
            "policy", "prompt", "narration", "binding sequence", "D_T", "F %"
        ));
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
