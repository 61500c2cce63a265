use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sociallab::config::ExperimentConfig;
use sociallab::landscape::Interaction;
use sociallab::policy::Checkpoint;
use sociallab::probe::{self, ProbePolicy, Scripted};
use sociallab::sim::{self, BatchStats};
use sociallab::{Error, Execution, Result, Trainer};

use crate::run_dir::{Manifest, RunDir};
use crate::Common;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_HEADER: &str = "rank,strategy,average_mean_payoff,average_sem,final_mean_payoff,n_episodes";

pub struct Context {
    pub workers: Option<usize>,
    pub argv: Vec<String>,
}

impl Context {
    fn execution(&self, cfg: &ExperimentConfig) -> Execution {
        match self.workers {
            Some(1) => Execution::Sequential,
            _ => cfg.execution,
        }
    }

    fn manifest(&self, command: &str, cfg: Option<&ExperimentConfig>) -> Result<Manifest> {
        Ok(Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: format!("{command} {}", self.argv.join(" ")).trim().to_string(),
            seed: cfg.map(|c| c.seed),
            workers: self.workers,
            config: match cfg {
                Some(c) => serde_json::to_value(c)?,
                None => serde_json::Value::Null,
            },
            files: BTreeMap::new(),
            finalized: false,
        })
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::assemble(&common.presets, common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads the config, claims the output directory and records the resolved config.
fn start(common: &Common) -> Result<(ExperimentConfig, RunDir)> {
    let cfg = load_config(common)?;
    let rd = RunDir::claim(&common.out)?;
    rd.write("config.toml", &cfg.to_toml()?)?;
    Ok((cfg, rd))
}

fn finish(ctx: &Context, rd: RunDir, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    let root = rd.root().to_path_buf();
    rd.finalize(ctx.manifest(command, Some(cfg))?)?;
    eprintln!("wrote {}", root.display());
    Ok(())
}

pub fn summary_row(rank: usize, name: &str, s: &BatchStats) -> String {
    format!(
        "{rank},{name},{},{},{},{}\n",
        s.average_mean_payoff, s.average_sem, s.final_mean_payoff, s.n_episodes
    )
}

pub fn landscape_gen(
    ctx: &Context,
    common: &Common,
    n: Option<usize>,
    k: Option<usize>,
    interaction: Option<&str>,
    index: usize,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(n) = n {
        cfg.env.n_loci = n;
    }
    if let Some(k) = k {
        cfg.env.k = k;
    }
    if let Some(i) = interaction {
        cfg.env.interaction = match i.to_ascii_lowercase().as_str() {
            "exclusive" => Interaction::Exclusive,
            "inclusive" => Interaction::Inclusive,
            _ => return Err(Error::Config(format!("unknown interaction {i:?} (expected exclusive or inclusive)"))),
        };
    }
    let land = sim::batch_landscape(&cfg.env, cfg.seed, index)?;
    let rd = RunDir::claim(&common.out)?;
    rd.write("config.toml", &cfg.to_toml()?)?;
    land.save(&rd.path("landscape.json"))?;
    let (best, payoff) = land.global_argmax();
    eprintln!("global optimum {:?} with payoff {payoff}", best.bits());
    finish(ctx, rd, "landscape gen", &cfg)
}

pub fn baselines(ctx: &Context, common: &Common) -> Result<()> {
    let (cfg, rd) = start(common)?;
    let exec = ctx.execution(&cfg);
    let (env, topo) = cfg.resolve()?;
    let mut rows = vec![];
    for s in &cfg.strategies {
        let stats = sim::run_batch(&env, &topo, s, cfg.batch.n_landscapes, cfg.batch.reps, cfg.seed, exec)?;
        eprintln!("{s:5} {:.2} +- {:.2}", stats.average_mean_payoff, stats.average_sem);
        rd.write(&format!("curves/{s}.csv"), &stats.curve_csv())?;
        rows.push((s.to_string(), stats));
    }
    // Stable sort keeps the configured order for exact ties.
    rows.sort_by(|a, b| b.1.average_mean_payoff.total_cmp(&a.1.average_mean_payoff));
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (i, (name, s)) in rows.iter().enumerate() {
        out += &summary_row(i + 1, name, s);
    }
    rd.write("summary.csv", &out)?;
    finish(ctx, rd, "baselines", &cfg)
}

pub fn train(ctx: &Context, common: &Common) -> Result<()> {
    let (cfg, rd) = start(common)?;
    let (env, topo) = cfg.resolve()?;
    let tc = sociallab::TrainConfig { env, ..cfg.train_config() };
    let mut trainer = Trainer::new(tc, topo, cfg.seed, ctx.execution(&cfg))?;
    let summary = trainer.run(Some(rd.root()))?;
    let last = trainer.history().last().map(|m| m.avg_mean_payoff);
    rd.write(
        "train_summary.json",
        &serde_json::to_string_pretty(&serde_json::json!({
            "epochs": summary.epochs,
            "stopped_early": summary.stopped_early,
            "final_avg_mean_payoff": last,
        }))?,
    )?;
    finish(ctx, rd, "train", &cfg)
}

pub fn eval(ctx: &Context, common: &Common, checkpoint: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let policy = Checkpoint::load(checkpoint)?.policy()?;
    if policy.n_loci() != cfg.env.n_loci {
        return Err(Error::Config(format!(
            "checkpoint was trained with N = {} but the environment has N = {}",
            policy.n_loci(),
            cfg.env.n_loci
        )));
    }
    let rd = RunDir::claim(&common.out)?;
    rd.write("config.toml", &cfg.to_toml()?)?;
    let (env, topo) = cfg.resolve()?;
    let stats = sim::run_batch(
        &env,
        &topo,
        &policy,
        cfg.batch.n_landscapes,
        cfg.batch.reps,
        cfg.seed,
        ctx.execution(&cfg),
    )?;
    eprintln!("policy {:.2} +- {:.2}", stats.average_mean_payoff, stats.average_sem);
    rd.write("curve.csv", &stats.curve_csv())?;
    rd.write("summary.csv", &format!("{SUMMARY_HEADER}\n{}", summary_row(1, "policy", &stats)))?;
    finish(ctx, rd, "eval", &cfg)
}

fn parse_oracle(name: &str, seed: u64) -> Result<Scripted> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "copy-best" => Scripted::CopyBest,
        "uniform" => Scripted::UniformRandom,
        "keep-self" => Scripted::KeepSelf,
        "bi-analytic" => Scripted::BestImitatorAnalytic,
        "bi-sampled" => Scripted::BestImitatorSampled { samples: 4000, seed },
        _ => {
            return Err(Error::Config(format!(
                "unknown oracle {name:?} (expected copy-best, uniform, keep-self, bi-analytic or bi-sampled)"
            )))
        }
    })
}

pub fn probe(
    ctx: &Context,
    common: &Common,
    checkpoint: Option<&Path>,
    oracle: Option<&str>,
    p0: Option<u32>,
    stride: Option<u32>,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(p0) = p0 {
        cfg.probe.own_payoff = p0;
    }
    if let Some(s) = stride {
        cfg.probe.stride = s;
    }
    cfg.validate()?;
    let exec = ctx.execution(&cfg);
    let run = |p: &dyn Fn() -> Result<probe::ProbeReport>, rd: &RunDir| -> Result<()> {
        p()?.export(rd.root())?;
        Ok(())
    };
    match (checkpoint, oracle) {
        (Some(path), _) => {
            let policy = Checkpoint::load(path)?.policy()?;
            let rd = RunDir::claim(&common.out)?;
            rd.write("config.toml", &cfg.to_toml()?)?;
            run(&|| probe_with(&policy, policy.n_loci(), &cfg, exec), &rd)?;
            finish(ctx, rd, "probe", &cfg)
        }
        (None, Some(name)) => {
            let oracle = parse_oracle(name, cfg.seed)?;
            let rd = RunDir::claim(&common.out)?;
            rd.write("config.toml", &cfg.to_toml()?)?;
            run(&|| probe_with(&oracle, cfg.env.n_loci, &cfg, exec), &rd)?;
            finish(ctx, rd, "probe", &cfg)
        }
        (None, None) => Err(Error::Config("probe needs --checkpoint or --oracle".into())),
    }
}

fn probe_with<P: ProbePolicy>(p: &P, n: usize, cfg: &ExperimentConfig, exec: Execution) -> Result<probe::ProbeReport> {
    probe::run_probe(p, n, cfg.probe.own_payoff, cfg.probe.stride, exec)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn csv_table(text: &str) -> String {
    let mut lines = text.lines();
    let Some(head) = lines.next() else {
        return String::new();
    };
    let cols: Vec<&str> = head.split(',').collect();
    let mut out = format!("| {} |\n|{}\n", cols.join(" | "), "---|".repeat(cols.len()));
    for l in lines {
        let _ = writeln!(out, "| {} |", l.split(',').collect::<Vec<_>>().join(" | "));
    }
    out
}

pub fn report(ctx: &Context, out: &Path, runs: &[PathBuf]) -> Result<()> {
    let mut md = String::from("# Run report\n");
    for dir in runs {
        let m = Manifest::load(dir)?;
        if !m.finalized {
            return Err(Error::Config(format!("{} is not a finalized run", dir.display())));
        }
        let _ = write!(
            md,
            "\n## {}\n\n- command: `{}`\n- seed: {}\n- tool version: {}\n- files: {}\n",
            dir.display(),
            m.command,
            m.seed.map_or("none".to_string(), |s| s.to_string()),
            m.tool_version,
            m.files.len()
        );
        if m.files.contains_key("summary.csv") {
            md += "\n";
            md += &csv_table(&read(&dir.join("summary.csv"))?);
        }
        if m.files.contains_key("metrics.csv") {
            let text = read(&dir.join("metrics.csv"))?;
            let epochs = text.lines().count().saturating_sub(1);
            let _ = writeln!(md, "\n{epochs} training epochs; last row:\n");
            let mut lines = text.lines();
            let head = lines.next().unwrap_or_default();
            md += &csv_table(&format!("{head}\n{}", lines.last().unwrap_or_default()));
        }
        if m.files.contains_key("regions.json") {
            let _ = write!(md, "\nRegion averages:\n\n```json\n{}\n```\n", read(&dir.join("regions.json"))?);
        }
    }
    let rd = RunDir::claim(out)?;
    rd.write("report.md", &md)?;
    let root = rd.root().to_path_buf();
    rd.finalize(ctx.manifest("report", None)?)?;
    eprintln!("wrote {}", root.display());
    Ok(())
}
