//! Experiment configuration: a TOML file mirroring the command-line flags,
//! with flags taking precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gg_core::narrator::{Template, TemplateRegistry, DEFAULT_WINDOW};
use gg_core::reasoner::DEFAULT_BINDING;
use gg_core::sim::DEFAULT_HORIZON;
use gg_core::{DurationTable, PolicyKind};
use serde::Deserialize;

/// One narration template / binding sequence pair of a prompt study.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptVariant {
    pub name: String,
    pub template: String,
    pub binding: String,
}

/// Prompt grid used when the configuration does not provide one.
pub fn default_prompt_grid() -> Vec<PromptVariant> {
    let v = |name: &str, template: &str, binding: &str| PromptVariant {
        name: name.into(),
        template: template.into(),
        binding: binding.into(),
    };
    vec![
        v("P0", "default", DEFAULT_BINDING),
        v("P1", "default", "The next object they are walking to is the "),
        v("P2", "default", "After this, they are going to interact with the "),
        v("P3", "default", "The most tasty object in the world is the "),
        v("P4", "none", "The most expensive object in the world is the "),
        v("P5", "none", DEFAULT_BINDING),
    ]
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub map: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub policy: Option<Vec<String>>,
    pub scorer: Option<String>,
    pub template: Option<String>,
    pub binding_sequence: Option<String>,
    pub room_time: Option<Vec<u32>>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub binding_seed: Option<u64>,
    pub horizon: Option<u32>,
    pub window: Option<usize>,
    pub jobs: Option<usize>,
    pub duration_table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub per_token: Option<bool>,
    #[serde(default)]
    pub templates: BTreeMap<String, Template>,
    #[serde(default)]
    pub prompts: Vec<PromptVariant>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.map, &mut cfg.program, &mut cfg.duration_table, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(spec) = &cfg.scorer {
            cfg.scorer = Some(resolve_scorer_path(spec, base));
        }
        Ok(cfg)
    }
}

fn resolve_scorer_path(spec: &str, base: &Path) -> String {
    let rebase = |p: &str| {
        let path = Path::new(p);
        if path.is_relative() {
            base.join(path).display().to_string()
        } else {
            p.to_string()
        }
    };
    match spec.split_once(':') {
        Some(("ngram", arg)) => match arg.rsplit_once(',') {
            Some((p, order)) => format!("ngram:{},{order}", rebase(p)),
            None => format!("ngram:{}", rebase(arg)),
        },
        Some(("stub", arg)) if arg.ends_with(".json") => format!("stub:{}", rebase(arg)),
        _ => spec.to_string(),
    }
}

/// Fully resolved settings for `run` and `prompt-study`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub map: PathBuf,
    pub program: PathBuf,
    pub policies: Vec<PolicyKind>,
    pub scorer: String,
    pub template: String,
    pub binding_sequence: String,
    pub room_times: Vec<u32>,
    pub restarts: usize,
    pub seed: u64,
    pub binding_seed: u64,
    pub horizon: u32,
    pub window: usize,
    pub jobs: usize,
    pub duration_table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub per_token: bool,
    pub templates: TemplateRegistry,
    pub prompts: Vec<PromptVariant>,
}

/// Command-line values; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub map: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub policy: Option<Vec<String>>,
    pub scorer: Option<String>,
    pub template: Option<String>,
    pub binding_sequence: Option<String>,
    pub room_time: Option<Vec<u32>>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub binding_seed: Option<u64>,
    pub horizon: Option<u32>,
    pub window: Option<usize>,
    pub jobs: Option<usize>,
    pub duration_table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub per_token: bool,
}

impl ExperimentConfig {
    pub fn resolve(file: FileConfig, cli: Overrides) -> anyhow::Result<Self> {
        let map = cli.map.or(file.map).context("no map given (--map)")?;
        let program = cli
            .program
            .or(file.program)
            .context("no activity program given (--program)")?;
        let policies = cli
            .policy
            .or(file.policy)
            .unwrap_or_else(|| vec!["naive".into(), "informed".into(), "greedy".into()])
            .iter()
            .map(|p| p.parse::<PolicyKind>())
            .collect::<Result<Vec<_>, _>>()?;
        let room_times = cli.room_time.or(file.room_time).unwrap_or_else(|| vec![25, 50, 100]);
        let restarts = cli.restarts.or(file.restarts).unwrap_or(1000);
        let horizon = cli.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
        if policies.is_empty() {
            bail!("policy list is empty");
        }
        if room_times.is_empty() {
            bail!("room-time list is empty");
        }
        if restarts == 0 {
            bail!("restarts must be at least 1");
        }
        if let Some(&bad) = room_times.iter().find(|&&t| t == 0 || t > horizon) {
            bail!("room time {bad} must lie in [1, {horizon}]");
        }
        for path in [&map, &program] {
            if !path.exists() {
                bail!("{}: file not found", path.display());
            }
        }
        let mut templates = TemplateRegistry::default();
        for (id, t) in file.templates {
            templates.insert(id, t);
        }
        let template = cli.template.or(file.template).unwrap_or_else(|| "default".into());
        templates.get(&template)?;
        let prompts = if file.prompts.is_empty() {
            default_prompt_grid()
        } else {
            file.prompts
        };
        for p in &prompts {
            templates.get(&p.template)?;
        }
        Ok(ExperimentConfig {
            map,
            program,
            policies,
            scorer: cli
                .scorer
                .or(file.scorer)
                .unwrap_or_else(|| "stub:oracle-next-room".into()),
            template,
            binding_sequence: cli
                .binding_sequence
                .or(file.binding_sequence)
                .unwrap_or_else(|| DEFAULT_BINDING.into()),
            room_times,
            restarts,
            seed: cli.seed.or(file.seed).unwrap_or(0),
            binding_seed: cli.binding_seed.or(file.binding_seed).unwrap_or(0),
            horizon,
            window: cli.window.or(file.window).unwrap_or(DEFAULT_WINDOW),
            jobs: cli.jobs.or(file.jobs).unwrap_or(0),
            duration_table: cli.duration_table.or(file.duration_table),
            out: cli.out.or(file.out),
            per_token: cli.per_token || file.per_token.unwrap_or(false),
            templates,
            prompts,
        })
    }
}

/// Reads a duration table: top-level `Verb = steps` pairs plus an optional
/// `default`.
pub fn load_durations(path: &Path) -> anyhow::Result<DurationTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading duration table {}", path.display()))?;
    let raw: BTreeMap<String, u32> =
        toml::from_str(&text).with_context(|| format!("parsing duration table {}", path.display()))?;
    let mut table = DurationTable {
        verbs: BTreeMap::new(),
        default: None,
    };
    for (k, v) in raw {
        if v == 0 {
            bail!("{}: `{k}` has zero duration", path.display());
        }
        if k == "default" {
            table.default = Some(v);
        } else {
            table.verbs.insert(k, v);
        }
    }
    Ok(table)
}

/// Splits a comma-separated flag value.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect()
}
