//! Experiment orchestration: `train`, `eval`, `regret-bench`, `visitation`,
//! and `plot` subcommands over the library's environments, agents, and
//! oracles. Exit codes: 0 success, 2 configuration error, 3 runtime failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    eval_episode, train, write_curves_csv, write_losses_csv, AgentConfig, LagrangianTd3, Td3Agent,
    TrainOptions,
};
use crate::analysis::{
    aggregate_curves, render_curves_svg, render_heatmap_svg, success_rate, SeedSeries,
    VisitationHistogram,
};
use crate::cmdp::{rollout, CmdpSpec, Env, ScaledObs, StepResult, Trajectory};
use crate::config::{default_seed, Config};
use crate::envs::maze::{counterexample_env, InitMode, MazeEnv, MazeSpec, MAZE_GOAL_REWARD};
use crate::envs::GatherEnv;
use crate::et::{EtEnv, EtMode, ViolationReward};
use crate::tabular::learner::{optimistic_learner, sample_savings, LearnerView};
use crate::tabular::{corollary_ratio, TabularMdp};
use crate::Real;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    Config(String),
    /// Failure while running (exit code 3).
    Runtime(String),
}

type CliResult = Result<(), CliError>;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn run_err(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

#[derive(Parser)]
#[command(
    name = "etmdp",
    version,
    about = "Constrained-MDP experiments through early termination"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent on a wrapped environment, one run directory per seed.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint greedily.
    Eval(EvalArgs),
    /// Paired tabular regret benchmark (early-terminated vs full view).
    RegretBench(RegretArgs),
    /// State-visitation heatmap of a random agent.
    Visitation(VisArgs),
    /// Aggregate per-seed curves into a median/IQR SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Plain-text config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment id: maze, gather, counterexample.
    #[arg(long)]
    env: Option<String>,
    /// Maze level 1..=4.
    #[arg(long)]
    level: Option<usize>,
    /// Agent kind: td3, context-td3, lagrangian-td3.
    #[arg(long)]
    agent: Option<String>,
    /// Early-termination mode: binary, budget, tightened.
    #[arg(long)]
    mode: Option<String>,
    /// Termination reward r_e.
    #[arg(long, allow_hyphen_values = true)]
    re: Option<Real>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long = "eval-interval")]
    eval_interval: Option<usize>,
    #[arg(long = "eval-episodes")]
    eval_episodes: Option<usize>,
    /// Comma-separated seed list, e.g. 0,1,2.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw overrides `key=value`, applied last.
    #[arg(long = "set")]
    set: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory produced by `train` (contains manifest.txt).
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
}

#[derive(Args)]
struct RegretArgs {
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 24)]
    states: usize,
    #[arg(long, default_value_t = 3)]
    actions: usize,
    #[arg(long, default_value_t = 32)]
    horizon: usize,
    /// Fraction of states in the invalid class.
    #[arg(long = "invalid-fraction", default_value_t = 0.5)]
    invalid_fraction: Real,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    re: Real,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV path (defaults to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VisArgs {
    #[arg(long, default_value_t = 4)]
    level: usize,
    #[arg(long, default_value_t = 50_000)]
    steps: usize,
    /// binary (early-terminated) or off (costs ignored).
    #[arg(long, default_value = "binary")]
    mode: String,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    re: Real,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "visitation-out")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Run directory containing seed-*/curves.csv.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse the process arguments and execute; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::RegretBench(args) => cmd_regret_bench(args),
        Command::Visitation(args) => cmd_visitation(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

// ---------------------------------------------------------------- run config

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EnvId {
    Maze,
    Gather,
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AgentKind {
    Td3,
    ContextTd3,
    LagrangianTd3,
}

impl AgentKind {
    fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "td3" => Ok(Self::Td3),
            "context-td3" => Ok(Self::ContextTd3),
            "lagrangian-td3" => Ok(Self::LagrangianTd3),
            other => Err(cfg_err(format!(
                "unknown agent kind {other:?}; valid kinds: td3, context-td3, lagrangian-td3"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Td3 => "td3",
            Self::ContextTd3 => "context-td3",
            Self::LagrangianTd3 => "lagrangian-td3",
        }
    }
}

/// A single concrete environment type so training code stays monomorphic.
/// Observations are rescaled to roughly unit magnitude for the networks.
pub enum BaseEnv {
    Maze(ScaledObs<MazeEnv>),
    Gather(ScaledObs<GatherEnv>),
}

impl Env for BaseEnv {
    fn spec(&self) -> &CmdpSpec {
        match self {
            Self::Maze(e) => e.spec(),
            Self::Gather(e) => e.spec(),
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<Real> {
        match self {
            Self::Maze(e) => e.reset(seed),
            Self::Gather(e) => e.reset(seed),
        }
    }

    fn step(&mut self, action: &[Real]) -> StepResult {
        match self {
            Self::Maze(e) => e.step(action),
            Self::Gather(e) => e.step(action),
        }
    }
}

#[derive(Debug, Clone)]
struct ResolvedRun {
    env_id: EnvId,
    level: usize,
    init: InitMode,
    kind: AgentKind,
    mode: EtMode,
    agent_cfg: AgentConfig,
    total_steps: usize,
    warmup_steps: usize,
    eval_interval: usize,
    eval_episodes: usize,
    seeds: Vec<u64>,
    out: PathBuf,
}

fn parse_mode(text: &str) -> Result<EtMode, CliError> {
    match text {
        "binary" => Ok(EtMode::Binary),
        "budget" => Ok(EtMode::BudgetExtended),
        "tightened" => Ok(EtMode::Tightened),
        other => Err(cfg_err(format!(
            "unknown et mode {other:?}; valid modes: binary, budget, tightened"
        ))),
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let seeds: Vec<u64> = text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| cfg_err(format!("cannot parse seed list {text:?}")))?;
    if seeds.is_empty() {
        return Err(cfg_err("seed list is empty"));
    }
    let mut dedup = seeds.clone();
    dedup.sort_unstable();
    dedup.dedup();
    if dedup.len() != seeds.len() {
        return Err(cfg_err(format!("seed list {text:?} contains duplicates")));
    }
    Ok(seeds)
}

fn get<T: std::str::FromStr>(cfg: &Config, key: &str, default: T) -> Result<T, CliError> {
    cfg.get_or(key, default).map_err(|e| cfg_err(e.to_string()))
}

fn resolve(cfg: &Config) -> Result<ResolvedRun, CliError> {
    let env_id = match cfg.get("env.id").unwrap_or("maze") {
        "maze" => EnvId::Maze,
        "gather" => EnvId::Gather,
        "counterexample" => EnvId::Counterexample,
        other => {
            return Err(cfg_err(format!(
                "unknown environment {other:?}; valid ids: maze, gather, counterexample"
            )))
        }
    };
    let level = get(cfg, "env.level", 1usize)?;
    if env_id == EnvId::Maze && !(1..=4).contains(&level) {
        return Err(cfg_err(format!("maze level must be 1..=4, got {level}")));
    }
    let init = match cfg.get("env.init").unwrap_or("fixed") {
        "fixed" => InitMode::Fixed,
        "random" => InitMode::RandomUniform,
        other => {
            return Err(cfg_err(format!(
                "unknown init mode {other:?}; valid: fixed, random"
            )))
        }
    };
    let kind = AgentKind::parse(cfg.get("agent.kind").unwrap_or("context-td3"))?;
    let mode = match env_id {
        EnvId::Counterexample => parse_mode(cfg.get("et.mode").unwrap_or("budget"))?,
        _ => parse_mode(cfg.get("et.mode").unwrap_or("binary"))?,
    };
    let default_re = match env_id {
        EnvId::Maze | EnvId::Counterexample => -10.0,
        EnvId::Gather => -1.0,
    };

    let mut a = AgentConfig {
        r_e: get(cfg, "et.re", default_re)?,
        ..AgentConfig::default()
    };
    a.gamma = get(cfg, "agent.gamma", a.gamma)?;
    a.tau = get(cfg, "agent.tau", a.tau)?;
    a.policy_delay = get(cfg, "agent.policy_delay", a.policy_delay)?;
    a.expl_noise = get(cfg, "agent.expl_noise", a.expl_noise)?;
    a.target_noise = get(cfg, "agent.target_noise", a.target_noise)?;
    a.noise_clip = get(cfg, "agent.noise_clip", a.noise_clip)?;
    a.batch_size = get(cfg, "agent.batch", a.batch_size)?;
    a.buffer_capacity = get(cfg, "agent.buffer", a.buffer_capacity)?;
    a.context_hidden = get(cfg, "agent.context_hidden", a.context_hidden)?;
    a.context_len = get(cfg, "agent.context_len", a.context_len)?;
    a.lr_actor = get(cfg, "agent.lr_actor", a.lr_actor)?;
    a.lr_critic = get(cfg, "agent.lr_critic", a.lr_critic)?;
    a.lr_context = get(cfg, "agent.lr_context", a.lr_context)?;
    a.grad_clip = get(cfg, "agent.grad_clip", a.grad_clip)?;
    a.lr_lambda = get(cfg, "agent.lr_lambda", a.lr_lambda)?;
    if let Some(text) = cfg.get("agent.hidden") {
        a.hidden = text
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| cfg_err(format!("cannot parse agent.hidden {text:?}")))?;
    }
    if !matches!(kind, AgentKind::ContextTd3) {
        a.context_hidden = 0;
    }

    let seeds = parse_seeds(cfg.get("train.seeds").unwrap_or("0,1,2,3,4"))?;
    let total_steps = get(cfg, "train.steps", 100_000usize)?;
    let warmup_steps = get(cfg, "train.warmup", 1_000usize)?;
    let eval_interval = get(cfg, "train.eval_interval", 5_000usize)?;
    let eval_episodes = get(cfg, "train.eval_episodes", 2usize)?;
    if eval_interval == 0 || total_steps == 0 {
        return Err(cfg_err("train.steps and train.eval_interval must be positive"));
    }
    let out = PathBuf::from(cfg.get("out.dir").unwrap_or("runs/latest"));

    Ok(ResolvedRun {
        env_id,
        level,
        init,
        kind,
        mode,
        agent_cfg: a,
        total_steps,
        warmup_steps,
        eval_interval,
        eval_episodes,
        seeds,
        out,
    })
}

impl ResolvedRun {
    fn make_base(&self) -> BaseEnv {
        // the maze arena is [0, 16]^2, the gather arena [-8, 8]^2
        match self.env_id {
            EnvId::Maze => {
                let mut spec = MazeSpec::level(self.level);
                spec.init_mode = self.init;
                BaseEnv::Maze(ScaledObs::new(MazeEnv::new(spec, 0.0), 1.0 / 8.0, -1.0))
            }
            EnvId::Counterexample => {
                BaseEnv::Maze(ScaledObs::new(counterexample_env(), 1.0 / 8.0, -1.0))
            }
            EnvId::Gather => BaseEnv::Gather(ScaledObs::new(GatherEnv::new(1.0), 1.0 / 8.0, 0.0)),
        }
    }

    /// The environment the agent trains in: wrapped for the early-terminated
    /// agents (the violation adjustment is owned by the agent, so the wrapper
    /// carries r_e = 0 additively), unwrapped for the Lagrangian baseline.
    fn make_train_env(&self) -> EtEnv<BaseEnv> {
        EtEnv::new(self.make_base(), self.mode, 0.0, ViolationReward::Additive)
    }

    fn canonical_config(&self) -> Config {
        let mut cfg = Config::new();
        cfg.set(
            "env.id",
            match self.env_id {
                EnvId::Maze => "maze",
                EnvId::Gather => "gather",
                EnvId::Counterexample => "counterexample",
            },
        );
        cfg.set("env.level", self.level);
        cfg.set(
            "env.init",
            if self.init == InitMode::Fixed { "fixed" } else { "random" },
        );
        cfg.set("agent.kind", self.kind.name());
        cfg.set(
            "et.mode",
            match self.mode {
                EtMode::Binary => "binary",
                EtMode::BudgetExtended => "budget",
                EtMode::Tightened => "tightened",
            },
        );
        cfg.set("et.re", self.agent_cfg.r_e);
        let a = &self.agent_cfg;
        cfg.set("agent.gamma", a.gamma);
        cfg.set("agent.tau", a.tau);
        cfg.set("agent.policy_delay", a.policy_delay);
        cfg.set("agent.expl_noise", a.expl_noise);
        cfg.set("agent.target_noise", a.target_noise);
        cfg.set("agent.noise_clip", a.noise_clip);
        cfg.set("agent.batch", a.batch_size);
        cfg.set("agent.buffer", a.buffer_capacity);
        cfg.set(
            "agent.hidden",
            a.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        cfg.set("agent.context_hidden", a.context_hidden);
        cfg.set("agent.context_len", a.context_len);
        cfg.set("agent.lr_actor", a.lr_actor);
        cfg.set("agent.lr_critic", a.lr_critic);
        cfg.set("agent.lr_context", a.lr_context);
        cfg.set("agent.grad_clip", a.grad_clip);
        cfg.set("agent.lr_lambda", a.lr_lambda);
        cfg.set("train.steps", self.total_steps);
        cfg.set("train.warmup", self.warmup_steps);
        cfg.set("train.eval_interval", self.eval_interval);
        cfg.set("train.eval_episodes", self.eval_episodes);
        cfg.set(
            "train.seeds",
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        cfg.set("out.dir", self.out.display());
        cfg.set("version", env!("CARGO_PKG_VERSION"));
        cfg
    }
}

// -------------------------------------------------------------------- train

fn train_config(args: &TrainArgs) -> Result<Config, CliError> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path).map_err(|e| cfg_err(e.to_string()))?,
        None => Config::new(),
    };
    if let Some(v) = &args.env {
        cfg.set("env.id", v);
    }
    if let Some(v) = args.level {
        cfg.set("env.level", v);
    }
    if let Some(v) = &args.agent {
        cfg.set("agent.kind", v);
    }
    if let Some(v) = &args.mode {
        cfg.set("et.mode", v);
    }
    if let Some(v) = args.re {
        cfg.set("et.re", v);
    }
    if let Some(v) = args.steps {
        cfg.set("train.steps", v);
    }
    if let Some(v) = args.warmup {
        cfg.set("train.warmup", v);
    }
    if let Some(v) = args.eval_interval {
        cfg.set("train.eval_interval", v);
    }
    if let Some(v) = args.eval_episodes {
        cfg.set("train.eval_episodes", v);
    }
    if let Some(v) = &args.seeds {
        cfg.set("train.seeds", v);
    }
    if let Some(v) = &args.out {
        cfg.set("out.dir", v.display());
    }
    cfg.apply_overrides(&args.set)
        .map_err(|e| cfg_err(e.to_string()))?;
    Ok(cfg)
}

/// Train one seed and write curves, losses, and a checkpoint into `dir`.
/// Returns the final evaluation return.
fn train_one_seed(run: &ResolvedRun, seed: u64, dir: &Path) -> Result<Real, CliError> {
    fs::create_dir_all(dir).map_err(|e| run_err(format!("cannot create {}: {e}", dir.display())))?;
    let opts = TrainOptions {
        total_steps: run.total_steps,
        warmup_steps: run.warmup_steps,
        eval_interval: run.eval_interval,
        eval_episodes: run.eval_episodes,
        seed,
    };
    let mut env = run.make_train_env();
    let mut eval_env = run.make_train_env();
    let obs_dim = env.obs_dim();
    let action_dim = env.action_dim();
    let (outcome, agent) = match run.kind {
        AgentKind::Td3 | AgentKind::ContextTd3 => {
            let mut agent = Td3Agent::new(obs_dim, action_dim, run.agent_cfg.clone(), seed);
            let outcome = train(&mut agent, &mut env, &mut eval_env, &opts);
            (outcome, agent)
        }
        AgentKind::LagrangianTd3 => {
            // the Lagrangian baseline trains on the raw environment
            let mut base = run.make_base();
            let mut eval_base = run.make_base();
            let budget = base.spec().budget;
            let agent = Td3Agent::new(base.obs_dim(), base.action_dim(), run.agent_cfg.clone(), seed);
            let mut learner = LagrangianTd3::new(agent, budget);
            let outcome = train(&mut learner, &mut base, &mut eval_base, &opts);
            (outcome, learner.agent)
        }
    };
    let write = |name: &str, body: &[u8]| {
        fs::write(dir.join(name), body)
            .map_err(|e| run_err(format!("cannot write {name} in {}: {e}", dir.display())))
    };
    let mut curves = Vec::new();
    write_curves_csv(&outcome.eval, seed, &mut curves).map_err(|e| run_err(e.to_string()))?;
    write("curves.csv", &curves)?;
    let mut losses = Vec::new();
    write_losses_csv(&outcome.losses, &mut losses).map_err(|e| run_err(e.to_string()))?;
    write("losses.csv", &losses)?;
    agent
        .save_checkpoint(&dir.join("checkpoint"))
        .map_err(|e| run_err(e.to_string()))?;
    Ok(outcome.eval.last().map_or(0.0, |r| r.mean_return))
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let cfg = train_config(&args)?;
    let run = resolve(&cfg)?;
    fs::create_dir_all(&run.out)
        .map_err(|e| run_err(format!("cannot create {}: {e}", run.out.display())))?;
    fs::write(run.out.join("manifest.txt"), run.canonical_config().to_text())
        .map_err(|e| run_err(format!("cannot write manifest: {e}")))?;
    let results: Vec<(u64, Result<Real, CliError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = run
            .seeds
            .iter()
            .map(|&seed| {
                let run = &run;
                let dir = run.out.join(format!("seed-{seed}"));
                scope.spawn(move || (seed, train_one_seed(run, seed, &dir)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker")).collect()
    });
    let mut failed = None;
    for (seed, res) in results {
        match res {
            Ok(final_return) => println!("seed {seed}: final eval return {final_return:.3}"),
            Err(e) => {
                eprintln!("seed {seed} failed");
                failed = Some(e);
            }
        }
    }
    match failed {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

// --------------------------------------------------------------------- eval

fn cmd_eval(args: EvalArgs) -> CliResult {
    let manifest = args.run.join("manifest.txt");
    let cfg = Config::from_file(&manifest).map_err(|e| cfg_err(e.to_string()))?;
    let run = resolve(&cfg)?;
    let seed_dir = args.run.join(format!("seed-{}", args.seed));
    fn greedy_episodes<E: Env>(
        run: &ResolvedRun,
        env: &mut E,
        seed_dir: &Path,
        seed: u64,
        episodes: usize,
    ) -> Result<Vec<Trajectory>, CliError> {
        let mut agent = Td3Agent::new(env.obs_dim(), env.action_dim(), run.agent_cfg.clone(), seed);
        agent
            .load_checkpoint(&seed_dir.join("checkpoint"))
            .map_err(|e| run_err(format!("cannot load checkpoint: {e}")))?;
        Ok((0..episodes)
            .map(|i| eval_episode(&mut agent, env, seed * 10_000 + i as u64))
            .collect())
    }
    // the Lagrangian baseline trains and evaluates on the raw environment
    let trajs = if run.kind == AgentKind::LagrangianTd3 {
        greedy_episodes(&run, &mut run.make_base(), &seed_dir, args.seed, args.episodes)?
    } else {
        greedy_episodes(&run, &mut run.make_train_env(), &seed_dir, args.seed, args.episodes)?
    };
    let n = args.episodes.max(1) as Real;
    let mean_return: Real = trajs.iter().map(|t| t.episodic_return()).sum::<Real>() / n;
    let mean_cost: Real = trajs.iter().map(|t| t.episodic_cost()).sum::<Real>() / n;
    let success = success_rate(&trajs, |s| s.reward >= MAZE_GOAL_REWARD);
    println!("seed,episodes,mean_return,mean_cost,success_rate");
    println!(
        "{},{},{mean_return},{mean_cost},{success}",
        args.seed, args.episodes
    );
    Ok(())
}

// ------------------------------------------------------------- regret bench

fn cmd_regret_bench(args: RegretArgs) -> CliResult {
    if args.states < 2 || args.actions == 0 || args.horizon == 0 || args.instances == 0 {
        return Err(cfg_err("instances, states, actions, and horizon must be positive"));
    }
    if !(0.0..1.0).contains(&args.invalid_fraction) {
        return Err(cfg_err(format!(
            "invalid-fraction must be in [0, 1), got {}",
            args.invalid_fraction
        )));
    }
    let n_invalid = ((args.states as Real * args.invalid_fraction).round() as usize)
        .min(args.states - 1);
    let seed = args.seed.unwrap_or_else(default_seed);
    let floor = corollary_ratio(args.states, n_invalid);

    let mut csv = String::from(
        "instance,n_states,n_actions,horizon,n_invalid,et_cum_regret,full_cum_regret,\
         measured_ratio,analytic_floor,et_bound_ok,full_bound_ok,et_steps,full_steps,et_savings\n",
    );
    let mut ratios = Vec::new();
    let mut savings_sum = 0.0;
    let mut bound_failures = 0usize;
    for i in 0..args.instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mdp = TabularMdp::random(
            &mut rng,
            args.states,
            args.actions,
            args.horizon,
            n_invalid,
            true,
        );
        let et = optimistic_learner(
            &mdp,
            0,
            LearnerView::EarlyTerminated { r_e: args.re },
            args.episodes,
            false,
        );
        let full = optimistic_learner(&mdp, 0, LearnerView::Full, args.episodes, false);
        let et_ok = et.cumulative_regret() <= et.regret_bound() + 1e-9;
        let full_ok = full.cumulative_regret() <= full.regret_bound() + 1e-9;
        if !et_ok || !full_ok {
            bound_failures += 1;
        }
        let ratio = full.cumulative_regret() / et.cumulative_regret();
        if ratio.is_finite() {
            ratios.push(ratio);
        }
        let savings = sample_savings(&et);
        savings_sum += savings;
        let _ = writeln!(
            csv,
            "{i},{},{},{},{n_invalid},{},{},{ratio},{floor},{et_ok},{full_ok},{},{},{savings}",
            args.states,
            args.actions,
            args.horizon,
            et.cumulative_regret(),
            full.cumulative_regret(),
            et.total_steps(),
            full.total_steps(),
        );
    }
    if let Some(path) = &args.out {
        fs::write(path, &csv)
            .map_err(|e| run_err(format!("cannot write {}: {e}", path.display())))?;
    }
    let mean_ratio = if ratios.is_empty() {
        Real::NAN
    } else {
        ratios.iter().sum::<Real>() / ratios.len() as Real
    };
    let above_one = ratios.iter().filter(|r| **r > 1.0).count();
    println!(
        "instances={} mean_measured_ratio={mean_ratio:.3} analytic_floor={floor:.3} \
         ratio_above_one={above_one}/{} bound_failures={bound_failures} mean_et_savings={:.3}",
        args.instances,
        ratios.len(),
        savings_sum / args.instances as Real
    );
    if bound_failures > 0 {
        return Err(run_err(format!(
            "{bound_failures} instances exceeded the regret bound"
        )));
    }
    Ok(())
}

// --------------------------------------------------------------- visitation

/// Roll a uniform-random agent for about `steps` environment steps and
/// histogram every visited state.
pub fn random_visitation<E: Env>(
    env: &mut E,
    steps: usize,
    arena: Real,
    seed: u64,
) -> VisitationHistogram {
    let mut hist = VisitationHistogram::for_arena(arena);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let action_dim = env.action_dim();
    let horizon = env.horizon();
    let mut episode = 0u64;
    while hist.total() < steps as u64 {
        let mut policy = |_obs: &[Real]| -> Vec<Real> {
            (0..action_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let traj = rollout(&mut policy, env, horizon, seed ^ (episode << 17)).expect("finite policy");
        hist.record_trajectory(&traj);
        episode += 1;
    }
    hist
}

fn cmd_visitation(args: VisArgs) -> CliResult {
    if !(1..=4).contains(&args.level) {
        return Err(cfg_err(format!("maze level must be 1..=4, got {}", args.level)));
    }
    let seed = args.seed.unwrap_or_else(default_seed);
    let spec = MazeSpec::level(args.level);
    let hist = match args.mode.as_str() {
        "binary" => {
            let mut env = crate::et::wrap(MazeEnv::level(args.level), EtMode::Binary, args.re);
            random_visitation(&mut env, args.steps, spec.size, seed)
        }
        "off" => {
            let mut env = MazeEnv::level(args.level);
            random_visitation(&mut env, args.steps, spec.size, seed)
        }
        other => {
            return Err(cfg_err(format!(
                "unknown visitation mode {other:?}; valid: binary, off"
            )))
        }
    };
    fs::create_dir_all(&args.out)
        .map_err(|e| run_err(format!("cannot create {}: {e}", args.out.display())))?;
    let mut csv = Vec::new();
    hist.write_csv(&mut csv).map_err(|e| run_err(e.to_string()))?;
    fs::write(args.out.join("visitation.csv"), csv).map_err(|e| run_err(e.to_string()))?;
    let svg = render_heatmap_svg(&hist, &spec.lava);
    fs::write(args.out.join("visitation.svg"), svg).map_err(|e| run_err(e.to_string()))?;
    print!(
        "level={} mode={} steps={} clamped={}",
        args.level,
        args.mode,
        hist.total(),
        hist.clamped()
    );
    if let Some(rect) = spec.enclosure_rect() {
        println!(" mass_outside_ring={}", hist.mass_outside(rect));
    } else {
        println!();
    }
    Ok(())
}

// --------------------------------------------------------------------- plot

fn parse_curves_csv(path: &Path) -> Result<SeedSeries, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| run_err(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("step,seed,return,cost") => {}
        other => {
            return Err(run_err(format!(
                "{}: unexpected header {other:?}",
                path.display()
            )))
        }
    }
    let mut series = SeedSeries {
        seed: 0,
        steps: Vec::new(),
        returns: Vec::new(),
        costs: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (|| -> Option<(usize, u64, Real, Real)> {
            let [step, seed, ret, cost] = fields.as_slice() else {
                return None;
            };
            Some((step.parse().ok()?, seed.parse().ok()?, ret.parse().ok()?, cost.parse().ok()?))
        })();
        let Some((step, seed, ret, cost)) = parsed else {
            return Err(run_err(format!("{}: bad row {}: {line:?}", path.display(), i + 2)));
        };
        series.seed = seed;
        series.steps.push(step);
        series.returns.push(ret);
        series.costs.push(cost);
    }
    Ok(series)
}

fn cmd_plot(args: PlotArgs) -> CliResult {
    let mut runs = Vec::new();
    let entries = fs::read_dir(&args.run)
        .map_err(|e| run_err(format!("cannot read {}: {e}", args.run.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed-"))
        })
        .collect();
    dirs.sort();
    for dir in dirs {
        let curves = dir.join("curves.csv");
        if curves.exists() {
            runs.push(parse_curves_csv(&curves)?);
        }
    }
    if runs.is_empty() {
        return Err(run_err(format!(
            "no seed-*/curves.csv found under {}",
            args.run.display()
        )));
    }
    let bundle = aggregate_curves(&runs).map_err(|e| run_err(e.to_string()))?;
    let svg = render_curves_svg(&bundle);
    let out = args.out.unwrap_or_else(|| args.run.join("curves.svg"));
    fs::write(&out, svg).map_err(|e| run_err(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {} ({} seeds)", out.display(), runs.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> Config {
        Config::parse(
            "env.id = maze\nenv.level = 1\nagent.kind = context-td3\n\
             train.steps = 300\ntrain.warmup = 100\ntrain.eval_interval = 100\n\
             train.eval_episodes = 1\ntrain.seeds = 0,1\nagent.batch = 16\n\
             agent.hidden = 16\nagent.context_hidden = 4\nagent.buffer = 10000\n",
        )
        .unwrap()
    }

    #[test]
    fn unknown_agent_kind_names_valid_kinds() {
        let mut cfg = base_cfg();
        cfg.set("agent.kind", "cpo");
        let err = resolve(&cfg).unwrap_err();
        let CliError::Config(msg) = err else {
            panic!("expected config error")
        };
        assert!(msg.contains("cpo") && msg.contains("context-td3"));
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let mut cfg = base_cfg();
        cfg.set("train.seeds", "1,2,1");
        assert!(matches!(resolve(&cfg).unwrap_err(), CliError::Config(_)));
    }

    #[test]
    fn plain_td3_resolution_disables_context() {
        let mut cfg = base_cfg();
        cfg.set("agent.kind", "td3");
        let run = resolve(&cfg).unwrap();
        assert_eq!(run.agent_cfg.context_hidden, 0);
    }

    #[test]
    fn manifest_round_trips_through_resolve() {
        let run = resolve(&base_cfg()).unwrap();
        let text = run.canonical_config().to_text();
        let reparsed = resolve(&Config::parse(&text).unwrap()).unwrap();
        assert_eq!(reparsed.seeds, run.seeds);
        assert_eq!(reparsed.total_steps, run.total_steps);
        assert_eq!(reparsed.agent_cfg.hidden, run.agent_cfg.hidden);
        assert_eq!(reparsed.agent_cfg.r_e, run.agent_cfg.r_e);
    }

    #[test]
    fn train_one_seed_writes_the_run_directory_deterministically() {
        let tmp = tempfile::tempdir().unwrap();
        let run = resolve(&base_cfg()).unwrap();
        let dir_a = tmp.path().join("a");
        let dir_b = tmp.path().join("b");
        train_one_seed(&run, 0, &dir_a).unwrap();
        train_one_seed(&run, 0, &dir_b).unwrap();
        for name in ["curves.csv", "losses.csv"] {
            let a = fs::read(dir_a.join(name)).unwrap();
            let b = fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
            assert!(!a.is_empty());
        }
        assert!(dir_a.join("checkpoint.manifest").exists());
        assert!(dir_a.join("checkpoint.bin").exists());
    }

    #[test]
    fn plot_aggregates_written_curves() {
        let tmp = tempfile::tempdir().unwrap();
        let run = resolve(&base_cfg()).unwrap();
        for seed in [0u64, 1] {
            train_one_seed(&run, seed, &tmp.path().join(format!("seed-{seed}"))).unwrap();
        }
        cmd_plot(PlotArgs {
            run: tmp.path().to_path_buf(),
            out: None,
        })
        .unwrap();
        let svg = fs::read_to_string(tmp.path().join("curves.svg")).unwrap();
        assert!(crate::analysis::svg_well_formed(&svg));
    }

    #[test]
    fn visitation_of_a_wrapped_level4_maze_stays_in_the_ring() {
        let spec = MazeSpec::level(4);
        let mut env = crate::et::wrap(MazeEnv::level(4), EtMode::Binary, -10.0);
        let hist = random_visitation(&mut env, 5_000, spec.size, 3);
        assert!(hist.total() >= 5_000);
        assert_eq!(hist.mass_outside(spec.enclosure_rect().unwrap()), 0.0);
    }
}
