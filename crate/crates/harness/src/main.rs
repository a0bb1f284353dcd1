use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use treesearch::metrics::Metric;
use treesearch::search::{PolicyKind, SearchConfig, SuccessorRule};
use treesearch::RngStream;
use treesearch_hardattn::{build_model, HardAttnModel, ModelKind};
use treesearch_harness::eval::{write_comparison_csv, write_metrics_csv, write_runs_csv};
use treesearch_harness::kl::{kl_eval, write_kl_csv, DistSource};
use treesearch_harness::protocol::{tcp_transport, LineTransport};
use treesearch_harness::session::{run_agent, PolicyChooser};
use treesearch_harness::sweep::write_sweep_csv;
use treesearch_harness::{gen_corpus, gen_instances, run_eval, sweep, Agent, Axis, Error, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "tsearch", version, about = "Tree search experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML experiment file. Flags below override its fields.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated policy names, e.g. `uniform-leaf,path-uct:0.5`.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    traces: Option<usize>,
    #[arg(long)]
    test_instances: Option<usize>,
    #[arg(long)]
    test_traces: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.budget {
            cfg.budget = v;
        }
        if let Some(ps) = &self.policies {
            cfg.policies = ps.iter().map(|p| p.parse()).collect::<treesearch::Result<_>>()?;
        }
        if let Some(r) = &self.rule {
            cfg.rule = parse_rule(r)?;
        }
        if let Some(v) = self.instances {
            cfg.n_train_instances = v;
        }
        if let Some(v) = self.traces {
            cfg.traces_per_instance = v;
        }
        if let Some(v) = self.test_instances {
            cfg.n_test_instances = v;
        }
        if let Some(v) = self.test_traces {
            cfg.test_traces = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write every instance spec of the experiment as JSON lines.
    GenInstances {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate the training corpus and its manifest.
    GenCorpus {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate agents on the test instances.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `NAME` or `policy:NAME`, `model:PATH`, or `cmd:PROGRAM ARGS...`.
        /// Defaults to every configured policy.
        #[arg(long)]
        agent: Vec<String>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate one agent across values of a configuration axis.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// budget, depth, goals or wall-density.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        agent: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Per-step KL divergence between a reference policy and a candidate.
    KlEval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: String,
        /// Draws used to estimate the reference; exact when omitted.
        #[arg(long)]
        samples: Option<usize>,
        /// `policy:NAME` or `model:PATH`.
        #[arg(long)]
        candidate: String,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Build and save a hard-attention construction.
    BuildModel {
        #[arg(long)]
        policy: String,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        #[arg(long, default_value = "pruned")]
        rule: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Play protocol sessions on stdio with a reference policy, until EOF.
    Agent {
        #[arg(long)]
        policy: String,
        #[arg(long, default_value = "pruned")]
        rule: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Act as the environment for an external agent on the test instances.
    Serve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Listen for one TCP connection here; stdio when omitted.
        #[arg(long)]
        listen: Option<String>,
        /// Seconds to wait for each selection.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_rule(s: &str) -> Result<SuccessorRule> {
    match s {
        "pruned" => Ok(SuccessorRule::Pruned),
        "full" => Ok(SuccessorRule::Full),
        other => Err(Error::Config(format!("unknown successor rule `{other}`"))),
    }
}

fn load_model(path: &Path) -> Result<HardAttnModel> {
    Ok(HardAttnModel::from_json(&fs::read_to_string(path)?)?)
}

fn parse_agent(spec: &str) -> Result<Agent> {
    let (kind, rest) = spec.split_once(':').unwrap_or(("policy", spec));
    match kind {
        "model" => Ok(Agent::Model(Box::new(load_model(Path::new(rest))?))),
        "cmd" => {
            let mut words = rest.split_whitespace();
            let program = words
                .next()
                .ok_or_else(|| Error::Config("empty agent command".into()))?;
            let mut child = Command::new(program)
                .args(words)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Ok(Agent::External {
                name: program.to_string(),
                transport: Box::new(LineTransport::new(BufReader::new(stdout), stdin)),
            })
        }
        "policy" => Ok(Agent::Policy(rest.parse()?)),
        // A bare name such as `path-uct:0.5`.
        _ => Ok(Agent::Policy(spec.parse()?)),
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn print_metrics(name: &str, m: &treesearch::metrics::MetricVector) {
    println!("{name} ({} runs)", m.n);
    for metric in Metric::ALL {
        let s = m.get(metric);
        println!("  {:<18} {:.4} ± {:.4}", metric.name(), s.mean, s.se95);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenInstances { cfg, out } => {
            let cfg = cfg.load()?;
            let mut text = String::new();
            for inst in gen_instances(&cfg)? {
                text.push_str(&serde_json::to_string(&inst)?);
                text.push('\n');
            }
            fs::write(&out, text)?;
        }
        Cmd::GenCorpus { cfg, out } => {
            let cfg = cfg.load()?;
            let m = gen_corpus(&cfg, &out)?;
            for f in &m.files {
                println!("{} {} records {}", f.path, f.records, f.sha256);
            }
        }
        Cmd::Eval { cfg, agent, out } => {
            let cfg = cfg.load()?;
            fs::create_dir_all(&out)?;
            let specs: Vec<String> = if agent.is_empty() {
                cfg.policies.iter().map(|p| p.to_string()).collect()
            } else {
                agent
            };
            let mut reports = Vec::new();
            for spec in &specs {
                let mut a = parse_agent(spec)?;
                let r = run_eval(&cfg, &mut a)?;
                let stem = file_stem(spec);
                write_metrics_csv(&out.join(format!("metrics-{stem}.csv")), &r.metrics)?;
                write_runs_csv(&out.join(format!("runs-{stem}.csv")), &r.runs)?;
                print_metrics(spec, &r.metrics);
                reports.push((spec.clone(), r.metrics));
            }
            write_comparison_csv(&out.join("comparison.csv"), &reports)?;
        }
        Cmd::Sweep {
            cfg,
            axis,
            values,
            agent,
            out,
        } => {
            let cfg = cfg.load()?;
            let axis: Axis = axis.parse()?;
            let mut a = parse_agent(&agent)?;
            let rows = sweep(&cfg, axis, &values, &mut a)?;
            write_sweep_csv(&out, &rows)?;
            for r in &rows {
                let hit = r.metrics.get(Metric::HitRate);
                let mark = if r.outside_training { " (unseen)" } else { "" };
                println!("{axis}={}{mark}: hit_rate {:.4} ± {:.4}", r.value, hit.mean, hit.se95);
            }
        }
        Cmd::KlEval {
            cfg,
            reference,
            samples,
            candidate,
            runs,
            out,
        } => {
            let cfg = cfg.load()?;
            let reference: PolicyKind = reference.parse()?;
            let p = DistSource::Policy {
                policy: reference,
                samples,
            };
            let q = match candidate.split_once(':') {
                Some(("model", path)) => DistSource::Model(Box::new(load_model(Path::new(path))?)),
                Some(("policy", name)) => DistSource::Policy {
                    policy: name.parse()?,
                    samples: None,
                },
                _ => DistSource::Policy {
                    policy: candidate.parse()?,
                    samples: None,
                },
            };
            let rows = kl_eval(&cfg, reference, &p, &q, runs)?;
            write_kl_csv(&out, &rows)?;
            let mean = rows.iter().map(|r| r.kl).sum::<f64>() / rows.len().max(1) as f64;
            println!("{} steps, mean KL {mean:.6}", rows.len());
        }
        Cmd::BuildModel {
            policy,
            budget,
            branching,
            rule,
            out,
        } => {
            let policy: PolicyKind = policy.parse()?;
            let m = build_model(policy, budget, branching, parse_rule(&rule)?)?;
            fs::write(&out, m.to_json())?;
            println!("{policy}: d = {}, {} layers", m.dim(), m.layers.len());
            for l in &m.layers {
                println!("  {}", l.name);
            }
            if let ModelKind::Tree { .. } = m.kind {
                let tb = budget * branching;
                println!(
                    "note: d comes from the register layout; the closed form 26 + 7TB would give {}",
                    26 + 7 * tb
                );
            }
        }
        Cmd::Agent { policy, rule, seed } => {
            let policy: PolicyKind = policy.parse()?;
            let mut t = LineTransport::new(BufReader::new(io::stdin()), io::stdout());
            for session in 0.. {
                let mut chooser = PolicyChooser {
                    cfg: SearchConfig::new(1, policy).with_rule(parse_rule(&rule)?),
                    rng: RngStream::new(seed, format!("agent/{session}")),
                };
                match run_agent(&mut t, &mut chooser) {
                    Ok(_) => {}
                    Err(Error::Closed) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        Cmd::Serve {
            cfg,
            listen,
            timeout,
            out,
        } => {
            let cfg = cfg.load()?;
            fs::create_dir_all(&out)?;
            let transport: Box<dyn treesearch_harness::Transport> = match listen {
                Some(addr) => {
                    let listener = TcpListener::bind(&addr)?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    let (stream, peer) = listener.accept()?;
                    eprintln!("agent connected from {peer}");
                    Box::new(tcp_transport(stream, Some(Duration::from_secs(timeout)))?)
                }
                None => Box::new(LineTransport::new(BufReader::new(io::stdin()), io::stdout())),
            };
            let mut agent = Agent::External {
                name: "external".into(),
                transport,
            };
            let r = run_eval(&cfg, &mut agent)?;
            write_metrics_csv(&out.join("metrics-external.csv"), &r.metrics)?;
            write_runs_csv(&out.join("runs-external.csv"), &r.runs)?;
            let failed = r.runs.iter().filter(|x| x.failed).count();
            let mut err = io::stderr();
            let _ = writeln!(err, "{} runs, {failed} failed", r.runs.len());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
