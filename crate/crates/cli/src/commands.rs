//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gg_core::activity::parse_program;
use gg_core::narrator::{narrate, ObservationHistory, ObservedAction, TemplateRegistry, DEFAULT_WINDOW};
use gg_core::reasoner::{Grounding, ScoreMode, DEFAULT_BINDING};
use gg_core::scorer::{make_backend, BackendContext, LoopbackServer};
use gg_core::sim::{offline_oracle_with, OracleOptions, SimConfig, DEFAULT_HORIZON};
use gg_core::{Error, PolicyKind};

use crate::config::{split_list, ExperimentConfig, FileConfig, Overrides};
use crate::experiment::{
    build_backend, describe_cell, durations_for, experiment_metadata, load_experiment_inputs, load_inputs,
    prompt_table, run_cells, write_outputs, Cell, ScenarioSpec,
};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;
pub const EXIT_ORACLE_TOO_LARGE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "gg", version, about = "Intent-aware coverage planning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run policy batches over a room-time × policy sweep.
    Run(ExpArgs),
    /// Compare narration/binding-sequence variants against a naive baseline.
    PromptStudy(ExpArgs),
    /// Print completion, item and partition relevancy scores for one prompt.
    Score(ScoreArgs),
    /// Solve the offline minimum-disturbance schedule by enumeration.
    Oracle(OracleArgs),
    /// Emit gnuplot-ready D_T histogram columns from a summary file.
    Hist(HistArgs),
    /// Serve a scorer over the remote scoring protocol.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ExpArgs {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Comma-separated: naive, informed, greedy.
    #[arg(long)]
    pub policy: Option<String>,
    /// stub:<uniform|oracle-next-room|table.json>, ngram:<corpus>,<order> or remote:<url>.
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long = "binding")]
    pub binding_sequence: Option<String>,
    /// Comma-separated room times.
    #[arg(long)]
    pub room_time: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for choosing which map instance each program item refers to.
    #[arg(long)]
    pub binding_seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Number of completed actions narrated.
    #[arg(long)]
    pub window: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub duration_table: Option<PathBuf>,
    /// Output directory for runs.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score completions by per-token geometric mean instead of the product.
    #[arg(long)]
    pub per_token: bool,
}

impl ExpArgs {
    fn resolve(self) -> anyhow::Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let room_time = self
            .room_time
            .map(|s| {
                split_list(&s)
                    .iter()
                    .map(|x| x.parse::<u32>().with_context(|| format!("invalid room time `{x}`")))
                    .collect::<anyhow::Result<Vec<_>>>()
            })
            .transpose()?;
        ExperimentConfig::resolve(
            file,
            Overrides {
                map: self.map,
                program: self.program,
                policy: self.policy.map(|s| split_list(&s)),
                scorer: self.scorer,
                template: self.template,
                binding_sequence: self.binding_sequence,
                room_time,
                restarts: self.restarts,
                seed: self.seed,
                binding_seed: self.binding_seed,
                horizon: self.horizon,
                window: self.window,
                jobs: self.jobs,
                duration_table: self.duration_table,
                out: self.out,
                per_token: self.per_token,
            },
        )
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Narration text used verbatim.
    #[arg(long, conflicts_with = "history")]
    pub narration: Option<String>,
    /// File of completed atomic actions, one per line, narrated with --template.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value = "default")]
    pub template: String,
    #[arg(long = "binding", default_value = DEFAULT_BINDING)]
    pub binding_sequence: String,
    #[arg(long, default_value = "stub:uniform")]
    pub scorer: String,
    /// Activity program; needed by the next-room oracle stub.
    #[arg(long)]
    pub program: Option<PathBuf>,
    #[arg(long)]
    pub duration_table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub binding_seed: u64,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: u32,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub per_token: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub room_time: u32,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: u32,
    #[arg(long)]
    pub duration_table: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub binding_seed: u64,
    /// Fix the robot's first room.
    #[arg(long)]
    pub start: Option<usize>,
    /// Drop the coverage requirement.
    #[arg(long)]
    pub relaxed: bool,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// summary.json written by `run` or `prompt-study`.
    #[arg(long)]
    pub summary: PathBuf,
    /// Bin width; a multiple of the width stored in the summary.
    #[arg(long)]
    pub bin_width: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scorer: String,
    #[arg(long, default_value = "127.0.0.1:8731")]
    pub addr: String,
}

/// Exit status for an error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::OracleTooLarge { .. } => EXIT_ORACLE_TOO_LARGE,
                Error::BackendUnavailable(_) | Error::Tokenization(_) => EXIT_BACKEND,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => cmd_run(args.resolve()?),
        Command::PromptStudy(args) => cmd_prompt_study(args.resolve()?),
        Command::Score(args) => cmd_score(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Hist(args) => cmd_hist(args),
        Command::Serve(args) => cmd_serve(args),
    }
}

fn finish(cells: &[Cell]) -> ExitCode {
    let aborted: usize = cells.iter().map(Cell::aborted).sum();
    if aborted > 0 {
        eprintln!("{aborted} restarts aborted by scorer failures");
        ExitCode::from(EXIT_BACKEND)
    } else {
        ExitCode::SUCCESS
    }
}

pub fn cmd_run(cfg: ExperimentConfig) -> anyhow::Result<ExitCode> {
    let inputs = load_experiment_inputs(&cfg)?;
    let backend = build_backend(
        &cfg.scorer,
        &inputs,
        &cfg.templates,
        &cfg.template,
        &cfg.binding_sequence,
        cfg.window,
    )?;
    let spec = ScenarioSpec {
        template: &cfg.template,
        binding: &cfg.binding_sequence,
        prompt: None,
    };
    let cells = run_cells(&cfg, &inputs, backend.as_ref(), &spec, &cfg.policies)?;
    for c in &cells {
        println!("{}", describe_cell(c));
    }
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &cells, experiment_metadata(&cfg))?;
    }
    Ok(finish(&cells))
}

pub fn cmd_prompt_study(cfg: ExperimentConfig) -> anyhow::Result<ExitCode> {
    let inputs = load_experiment_inputs(&cfg)?;
    // one model for every variant; an oracle table is keyed on the configured prompt
    let backend = build_backend(
        &cfg.scorer,
        &inputs,
        &cfg.templates,
        &cfg.template,
        &cfg.binding_sequence,
        cfg.window,
    )?;
    let studied_policies: Vec<PolicyKind> = cfg
        .policies
        .iter()
        .copied()
        .filter(|&p| p != PolicyKind::Naive)
        .collect();
    if studied_policies.is_empty() {
        bail!("prompt study needs informed and/or greedy in --policy");
    }
    let baseline_spec = ScenarioSpec {
        template: &cfg.template,
        binding: &cfg.binding_sequence,
        prompt: Some("baseline"),
    };
    let baseline = run_cells(&cfg, &inputs, backend.as_ref(), &baseline_spec, &[PolicyKind::Naive])?;
    let mut studied = Vec::new();
    for variant in &cfg.prompts {
        let spec = ScenarioSpec {
            template: &variant.template,
            binding: &variant.binding,
            prompt: Some(&variant.name),
        };
        let cells = run_cells(&cfg, &inputs, backend.as_ref(), &spec, &studied_policies)?;
        studied.push((variant.clone(), cells));
    }
    print!("{}", prompt_table(&baseline, &studied));
    let all: Vec<Cell> = baseline
        .into_iter()
        .chain(studied.into_iter().flat_map(|(_, c)| c))
        .collect();
    if let Some(dir) = &cfg.out {
        let mut meta = experiment_metadata(&cfg);
        meta["prompts"] = serde_json::json!(cfg
            .prompts
            .iter()
            .map(|p| serde_json::json!({"name": p.name, "template": p.template, "binding": p.binding}))
            .collect::<Vec<_>>());
        write_outputs(dir, &all, meta)?;
    }
    Ok(finish(&all))
}

fn read_history(path: &Path, window: usize) -> anyhow::Result<ObservationHistory> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let program = parse_program(
        "history",
        &text,
        &gg_core::DurationTable {
            verbs: BTreeMap::new(),
            default: Some(1),
        },
    )
    .with_context(|| format!("in {}", path.display()))?;
    let mut h = ObservationHistory::new(window);
    for (t, action) in program.actions.into_iter().enumerate() {
        h.push(ObservedAction {
            time: t as u32,
            action,
            room: None,
        });
    }
    Ok(h)
}

fn sorted_rows<K: ToString>(rows: impl IntoIterator<Item = (K, f64)>) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = rows.into_iter().map(|(k, s)| (k.to_string(), s)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

pub fn cmd_score(args: ScoreArgs) -> anyhow::Result<ExitCode> {
    let registry = TemplateRegistry::default();
    let narration = match (&args.narration, &args.history) {
        (Some(text), _) => text.clone(),
        (None, Some(path)) => narrate(&read_history(path, args.window)?, &args.template, &registry)?.text,
        (None, None) => narrate(&ObservationHistory::new(args.window), &args.template, &registry)?.text,
    };
    let prompt = format!("{narration}{}", args.binding_sequence);
    let backend = match &args.program {
        Some(program) => {
            let durations = durations_for(args.duration_table.as_deref())?;
            let inputs = load_inputs(&args.map, program, &durations, args.binding_seed, args.horizon)?;
            let b = build_backend(
                &args.scorer,
                &inputs,
                &registry,
                &args.template,
                &args.binding_sequence,
                args.window,
            )?;
            (b, Some(inputs))
        }
        None => (make_backend(&args.scorer, &BackendContext::default())?, None),
    };
    let map = match &backend.1 {
        Some(inputs) => inputs.map.clone(),
        None => gg_core::load_map(&args.map)?,
    };
    let mode = if args.per_token {
        ScoreMode::PerToken
    } else {
        ScoreMode::Product
    };
    let grounding = Grounding::new(&map);
    if grounding.labels().is_empty() {
        bail!(Error::Config(format!(
            "{}: map has no items to score",
            args.map.display()
        )));
    }
    let scores = grounding.relevancy(&prompt, backend.0.as_ref(), mode)?;
    let stdout = std::io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    w.write_record(["kind", "id_or_label", "score"])?;
    for (kind, rows) in [
        ("completion", sorted_rows(scores.completion_scores)),
        ("item", sorted_rows(scores.item_scores)),
        ("partition", sorted_rows(scores.partition_scores)),
    ] {
        for (k, s) in rows {
            w.write_record([kind, &k, &s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_oracle(args: OracleArgs) -> anyhow::Result<ExitCode> {
    let durations = durations_for(args.duration_table.as_deref())?;
    let inputs = load_inputs(&args.map, &args.program, &durations, args.binding_seed, args.horizon)?;
    let config = SimConfig {
        room_time: args.room_time,
        horizon: args.horizon,
        master_seed: 0,
    };
    let sol = offline_oracle_with(
        inputs.map.n_rooms(),
        &inputs.trace,
        &config,
        OracleOptions {
            start: args.start,
            require_coverage: !args.relaxed,
        },
    )?;
    let out = match sol {
        Some(s) => serde_json::json!({
            "feasible": true,
            "D_T": s.d_t,
            "t_c": s.t_c,
            "sequence": s.sequence,
            "rooms": s.sequence.iter().map(|&r| inputs.map.rooms()[r].name.clone()).collect::<Vec<_>>(),
        }),
        None => serde_json::json!({ "feasible": false }),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_hist(args: HistArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&args.summary).with_context(|| format!("reading {}", args.summary.display()))?;
    let summary: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.summary.display()))?;
    let cells = summary["cells"]
        .as_array()
        .with_context(|| format!("{}: no `cells` array", args.summary.display()))?;
    let mut columns = Vec::new();
    let mut base_width = None;
    for c in cells {
        let w = c["histogram_bin_width"]
            .as_u64()
            .context("cell without histogram_bin_width")?;
        if *base_width.get_or_insert(w) != w {
            bail!("cells use different histogram bin widths");
        }
        let label = format!(
            "{}/{}/{}/T_r={}{}",
            c["env"].as_str().unwrap_or("?"),
            c["program"].as_str().unwrap_or("?"),
            c["policy"].as_str().unwrap_or("?"),
            c["room_time"],
            c["prompt"].as_str().map(|p| format!("/{p}")).unwrap_or_default()
        );
        let counts: Vec<u64> = c["histogram"]
            .as_array()
            .context("cell without histogram")?
            .iter()
            .map(|v| v.as_u64().unwrap_or(0))
            .collect();
        columns.push((label, counts));
    }
    let base = base_width.unwrap_or(10) as u32;
    let width = args.bin_width.unwrap_or(base);
    if width == 0 || width % base != 0 {
        bail!(Error::Config(format!(
            "bin width must be a positive multiple of {base}"
        )));
    }
    let factor = (width / base) as usize;
    let n_bins = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0).div_ceil(factor);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    write!(out, "# bin_lo bin_hi")?;
    for (label, _) in &columns {
        write!(out, " {label}")?;
    }
    writeln!(out)?;
    for b in 0..n_bins {
        write!(out, "{} {}", b as u32 * width, (b as u32 + 1) * width)?;
        for (_, counts) in &columns {
            let sum: u64 = counts.iter().skip(b * factor).take(factor).sum();
            write!(out, " {sum}")?;
        }
        writeln!(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_serve(args: ServeArgs) -> anyhow::Result<ExitCode> {
    let backend = make_backend(&args.scorer, &BackendContext::default())?;
    let server = LoopbackServer::start(Arc::clone(&backend), &args.addr)?;
    eprintln!("serving {} at {}", backend.describe(), server.url());
    server.join();
    Ok(ExitCode::SUCCESS)
}
