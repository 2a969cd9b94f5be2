use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};
use serde::Serialize;

use vpki::analyzer::{collusion_view, timing_link, LedgerSet, Transcript};
use vpki::clock::{Clock, ManualClock, ReplayClock, SystemClock};
use vpki::harness::ddos::{ddos_run, DdosConfig};
use vpki::harness::deploy::{ltca_id, pca_id, Deployment, DomainSpec, RA_ID};
use vpki::harness::replay::{replay, scaled_skew, trace_origin, Endpoints, ReplayConfig};
use vpki::harness::roam::roam;
use vpki::harness::site::{Site, SiteConfig};
use vpki::harness::trace::{ingest_trace, summarize, synthesize_trace, write_trace, ArrivalDist, DurationDist};
use vpki::http::{bind, ltca_router, pca_router, serve, HttpLtca, HttpPca, ServerLimits};
use vpki::model::{AuthorityId, PolicyConfig, PolicyKind, Pseudonym, Serial};
use vpki::pca::puzzle::{PuzzleConfig, PuzzleMode};
use vpki::ra::Ra;
use vpki::vehicle::{plan_requests, Vehicle};
use vpki::wire::Wire;
use vpki::{Error, Result};

#[derive(Parser)]
#[command(name = "vpki", version, about = "Vehicular PKI services, clients and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone, Copy)]
struct PolicyArgs {
    #[arg(long, default_value = "P2")]
    policy: PolicyKind,
    /// Interval length (seconds).
    #[arg(long, default_value_t = 600)]
    gamma: u64,
    /// Slot length (seconds).
    #[arg(long, default_value_t = 60)]
    tau: u64,
    #[arg(long, default_value_t = 0)]
    grid_epoch: u64,
}

impl PolicyArgs {
    fn config(&self) -> Result<PolicyConfig> {
        Ok(PolicyConfig::new(self.policy, self.gamma, self.tau)?.with_grid_epoch(self.grid_epoch))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Lust,
    Tapas,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a site directory with keys, registry and settings.
    Init {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "home")]
        domains: Vec<String>,
        #[command(flatten)]
        policy: PolicyArgs,
        /// off, always, or onload:N
        #[arg(long, default_value = "off")]
        puzzle: String,
        #[arg(long, default_value_t = 5)]
        difficulty: u8,
        #[arg(long, default_value_t = 7000)]
        base_port: u16,
    },
    /// Serve every LTCA and PCA of a site on its registered endpoint.
    Serve {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        max_concurrent: Option<usize>,
    },
    /// Resolve a pseudonym (hex wire encoding) to its long-term certificate.
    Resolve {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        pseudonym: String,
        #[arg(long)]
        revoke: bool,
    },
    /// Plan and run one trip's acquisitions.
    Vehicle {
        #[command(flatten)]
        policy: PolicyArgs,
        /// Departure (epoch seconds); defaults to now.
        #[arg(long)]
        depart: Option<u64>,
        #[arg(long)]
        duration: u64,
        /// Talk to a served site instead of an in-process deployment.
        #[arg(long)]
        site: Option<PathBuf>,
        #[arg(long, default_value = "home")]
        domain: String,
        #[arg(long, default_value = "car-1")]
        subject: String,
    },
    /// Replay a trace against an in-process deployment.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Trace seconds per wall second.
        #[arg(long, default_value_t = 100.0)]
        compress: f64,
        #[arg(long, default_value_t = 512)]
        concurrency: usize,
        #[arg(long, default_value_t = 0)]
        lead: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Raw latency samples as CSV.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Pseudonym observations for `linkcheck`.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Flood the PCA while honest vehicles acquire.
    Ddos {
        #[arg(long, default_value_t = 1000)]
        rate: u32,
        #[arg(long, value_enum, default_value = "on")]
        puzzle: OnOff,
        #[arg(long, default_value_t = 5)]
        difficulty: u8,
        #[arg(long, default_value_t = 100)]
        clients: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Timing-only linkage over a transcript.
    Linkcheck {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        tolerance: u64,
        /// Include every link and chain in the output.
        #[arg(long)]
        full: bool,
    },
    /// Run a two-domain scenario and write its four ledgers and ground truth.
    Roam {
        #[arg(long, default_value_t = 50)]
        vehicles: usize,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value_t = 600)]
        trip: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// What a coalition of authorities derives from their ledgers.
    Collude {
        #[arg(long, value_delimiter = ',')]
        ledgers: Vec<String>,
        /// Directory holding hltca.json, fltca.json, pcah.json, pcaf.json, truth.json.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Synthesize a trace CSV.
    GenTrace {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_enum, default_value = "lust")]
        preset: Preset,
        /// Mean trip duration; overrides the preset.
        #[arg(long)]
        mean: Option<f64>,
        #[arg(long, default_value_t = 0)]
        start: u64,
        /// Departures spread uniformly over this many seconds.
        #[arg(long, default_value_t = 3600)]
        span: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Fatal(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::decode(path.display().to_string(), e.to_string()))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(|e| Error::Fatal(e.to_string()))?);
    Ok(())
}

fn parse_puzzle(spec: &str, difficulty: u8) -> Result<PuzzleConfig> {
    let mode = match spec {
        "off" => PuzzleMode::Off,
        "always" => PuzzleMode::Always,
        s => match s.strip_prefix("onload:").and_then(|n| n.parse().ok()) {
            Some(n) => PuzzleMode::OnLoad(n),
            None => return Err(Error::InvalidArgument(format!("puzzle mode {s:?}; expected off, always or onload:N"))),
        },
    };
    Ok(PuzzleConfig { mode, difficulty, ..PuzzleConfig::default() })
}

#[derive(Serialize)]
struct PseudonymOut {
    serial: Serial,
    start: u64,
    end: u64,
    issuer: AuthorityId,
    wire: String,
}

impl From<&Pseudonym> for PseudonymOut {
    fn from(p: &Pseudonym) -> Self {
        PseudonymOut {
            serial: p.serial,
            start: p.validity.start,
            end: p.validity.end,
            issuer: p.issuer_id.clone(),
            wire: hex::encode(p.to_bytes()),
        }
    }
}

#[derive(Serialize)]
struct RequestOut {
    request_time: u64,
    interval: String,
    expected: usize,
    latency_ms: f64,
    puzzle_round_trips: usize,
    pseudonyms: Vec<PseudonymOut>,
}

async fn serve_site(dir: &Path, max_concurrent: Option<usize>) -> Result<()> {
    let site = Site::open(dir)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let mut limits = ServerLimits::default();
    if let Some(n) = max_concurrent {
        limits.max_concurrent = n;
    }
    let mut tasks = Vec::new();
    for d in &site.config.domains {
        for (id, router) in [
            (ltca_id(d), ltca_router(Arc::new(site.open_ltca(d, clock.clone())?), &limits)),
            (pca_id(d), pca_router(Arc::new(site.open_pca(d, clock.clone())?), &limits)),
        ] {
            let url = site.endpoint(&id)?;
            let addr = url.trim_start_matches("http://");
            let listener = bind(addr).await?;
            info!("{id} listening on {url}");
            tasks.push(tokio::spawn(serve(listener, router)));
        }
    }
    for t in tasks {
        t.await.map_err(|e| Error::Fatal(e.to_string()))??;
    }
    Ok(())
}

async fn resolve_cmd(dir: &Path, pseudonym: &str, revoke: bool) -> Result<()> {
    let site = Site::open(dir)?;
    let raw = hex::decode(pseudonym.trim()).map_err(|e| Error::decode("pseudonym", e.to_string()))?;
    let p = Pseudonym::from_bytes(&raw)?;
    let ra_id = AuthorityId::new(RA_ID);
    let mut ra = Ra::new(ra_id.clone(), site.key(&ra_id)?, site.registry.clone(), Arc::new(SystemClock))
        .with_audit_log(site.journal(&ra_id))?;
    for d in &site.config.domains {
        let (l, p) = (ltca_id(d), pca_id(d));
        ra = ra
            .with_pca(p.clone(), Arc::new(HttpPca::new(p.clone(), &site.endpoint(&p)?)))
            .with_ltca(l.clone(), Arc::new(HttpLtca::new(l.clone(), &site.endpoint(&l)?)));
    }
    let res = ra.resolve(&p, revoke).await?;
    print_json(&serde_json::json!({ "subject": res.ltc.subject_id, "audit": res.trail }))
}

async fn vehicle_cmd(policy: PolicyArgs, depart: Option<u64>, duration: u64, site: Option<PathBuf>, domain: &str, subject: &str) -> Result<()> {
    let policy = policy.config()?;
    let mut out = Vec::new();
    match site {
        None => {
            let depart = depart.unwrap_or(1_000);
            let clock = Arc::new(ManualClock::new(depart));
            let dep = Deployment::single(policy, clock.clone())?;
            let mut v = dep.vehicle(subject, "home").await?;
            let home = dep.home();
            for e in plan_requests(&policy, depart, duration)?.entries {
                clock.set(e.request_time);
                let acq = v.acquire(&e, home.ltca.as_ref(), home.pca.as_ref()).await?;
                out.push(RequestOut {
                    request_time: e.request_time,
                    interval: e.interval.to_string(),
                    expected: e.expected_slot_count,
                    latency_ms: acq.latency.as_secs_f64() * 1000.0,
                    puzzle_round_trips: acq.puzzle_round_trips,
                    pseudonyms: acq.pseudonyms.iter().map(PseudonymOut::from).collect(),
                });
            }
        }
        Some(dir) => {
            let site = Site::open(dir)?;
            let clock: Arc<dyn Clock> = Arc::new(SystemClock);
            let depart = depart.unwrap_or_else(|| clock.now());
            let (l, p) = (ltca_id(domain), pca_id(domain));
            let ltca = HttpLtca::new(l.clone(), &site.endpoint(&l)?);
            let pca = HttpPca::new(p.clone(), &site.endpoint(&p)?);
            let mut v = Vehicle::register(subject, policy, site.registry.clone(), clock.clone(), &ltca).await?;
            for e in plan_requests(&policy, depart, duration)?.entries {
                let wait = e.request_time.saturating_sub(clock.now());
                tokio::time::sleep(std::time::Duration::from_secs(wait)).await;
                let acq = v.acquire(&e, &ltca, &pca).await?;
                out.push(RequestOut {
                    request_time: e.request_time,
                    interval: e.interval.to_string(),
                    expected: e.expected_slot_count,
                    latency_ms: acq.latency.as_secs_f64() * 1000.0,
                    puzzle_round_trips: acq.puzzle_round_trips,
                    pseudonyms: acq.pseudonyms.iter().map(PseudonymOut::from).collect(),
                });
            }
        }
    }
    print_json(&out)
}

#[allow(clippy::too_many_arguments)]
async fn replay_cmd(
    trace_path: &Path,
    policy: PolicyArgs,
    compress: f64,
    concurrency: usize,
    lead: u64,
    out: Option<PathBuf>,
    samples: Option<PathBuf>,
    transcript: Option<PathBuf>,
    truth: Option<PathBuf>,
) -> Result<bool> {
    let trace = ingest_trace(trace_path)?;
    let s = summarize(&trace);
    eprintln!("trace: {} trips, mean duration {:.2} s", s.count, s.mean_duration);
    let policy = policy.config()?;
    let clock = Arc::new(ReplayClock::new(trace_origin(&trace), compress));
    let mut spec = DomainSpec::new("home", policy);
    spec.skew_tolerance = scaled_skew(compress);
    let dep = Deployment::build(&[spec], clock.clone())?;
    let ep = Endpoints { ltca: dep.home().ltca.clone(), pca: dep.home().pca.clone(), registry: dep.registry.clone() };
    let cfg = ReplayConfig { compression: compress, concurrency, lead, ..Default::default() };
    let report = replay(&trace, policy, &ep, clock, &cfg).await?;

    if let Some(path) = samples {
        std::fs::write(path, report.latency.samples_csv())?;
    }
    if let Some(path) = transcript {
        let observations = Transcript { observations: report.transcript.observations.clone(), ground_truth: Default::default() };
        write_json(&path, &observations)?;
    }
    if let Some(path) = truth {
        write_json(&path, &report.transcript.ground_truth)?;
    }
    let summary = serde_json::json!({
        "policy": report.policy,
        "latency": report.latency.aggregates,
        "utilization": report.utilization,
        "failures": report.failures,
        "invalid": report.invalid,
        "ledger_total": dep.home().pca.issued_count(),
    });
    match out {
        Some(path) => write_json(&path, &report)?,
        None => print_json(&summary)?,
    }
    eprintln!("{}", serde_json::to_string(&summary).unwrap_or_default());
    Ok(!report.invalid)
}

async fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Init { dir, domains, policy, puzzle, difficulty, base_port } => {
            let config = SiteConfig { policy: policy.config()?, puzzle: parse_puzzle(&puzzle, difficulty)?, domains };
            Site::init(&dir, config, base_port)?;
            println!("initialized {}", dir.display());
        }
        Cmd::Serve { dir, max_concurrent } => serve_site(&dir, max_concurrent).await?,
        Cmd::Resolve { dir, pseudonym, revoke } => resolve_cmd(&dir, &pseudonym, revoke).await?,
        Cmd::Vehicle { policy, depart, duration, site, domain, subject } => {
            vehicle_cmd(policy, depart, duration, site, &domain, &subject).await?
        }
        Cmd::Replay { trace, policy, compress, concurrency, lead, out, samples, transcript, truth } => {
            return replay_cmd(&trace, policy, compress, concurrency, lead, out, samples, transcript, truth).await;
        }
        Cmd::Ddos { rate, puzzle, difficulty, clients, out } => {
            let cfg = DdosConfig {
                bogus_rate: rate,
                puzzle: matches!(puzzle, OnOff::On),
                difficulty,
                legit_clients: clients,
                ..Default::default()
            };
            let report = ddos_run(&cfg).await?;
            let summary = serde_json::json!({
                "legit": report.legit.aggregates,
                "legit_failures": report.legit_failures,
                "legit_mean_puzzle_trips": report.legit_mean_puzzle_trips,
                "attacker_sent": report.attacker_sent,
                "attacker_issued": report.attacker_issued,
                "attacker_puzzle_refusals": report.attacker_puzzle_refusals,
                "attacker_other_refusals": report.attacker_other_refusals,
                "attacker_dropped": report.attacker_dropped,
                "attacker_service_rate": report.attacker_service_rate,
                "honest_per_client_rate": report.honest_per_client_rate,
            });
            match out {
                Some(path) => write_json(&path, &report)?,
                None => print_json(&summary)?,
            }
        }
        Cmd::Linkcheck { transcript, truth, tolerance, full } => {
            let mut t: Transcript = read_json(&transcript)?;
            if let Some(path) = truth {
                t.ground_truth = read_json(&path)?;
            }
            t.sort();
            let r = timing_link(&t, tolerance);
            if full {
                print_json(&r)?;
            } else {
                print_json(&serde_json::json!({
                    "links": r.links.len(),
                    "chains": r.chains.len(),
                    "true_pairs": r.true_pairs,
                    "correct_links": r.correct_links,
                    "recall": r.recall,
                    "precision": r.precision,
                    "expiry_events": r.expiry_events,
                    "mean_anonymity_set": r.mean_anonymity_set,
                }))?;
            }
        }
        Cmd::Roam { vehicles, policy, trip, out } => {
            let run = roam(vehicles, policy.config()?, 1_000, trip).await?;
            std::fs::create_dir_all(&out)?;
            let l = &run.ledgers;
            write_json(&out.join("hltca.json"), &l.hltca)?;
            write_json(&out.join("fltca.json"), &l.fltca)?;
            write_json(&out.join("pcah.json"), &l.pcah)?;
            write_json(&out.join("pcaf.json"), &l.pcaf)?;
            write_json(&out.join("truth.json"), &run.truth)?;
            println!("{} home and {} foreign pseudonyms written to {}", run.home_pseudonyms, run.foreign_pseudonyms, out.display());
        }
        Cmd::Collude { ledgers, dir } => {
            fn load<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<Option<T>> {
                let path = dir.join(format!("{name}.json"));
                if path.exists() { read_json(&path) } else { Ok(None) }
            }
            let set = LedgerSet {
                hltca: load(&dir, "hltca")?,
                fltca: load(&dir, "fltca")?,
                pcah: load(&dir, "pcah")?,
                pcaf: load(&dir, "pcaf")?,
            };
            let truth = read_json(&dir.join("truth.json"))?;
            let names: Vec<&str> = ledgers.iter().map(String::as_str).collect();
            print_json(&collusion_view(&set, &names, &truth)?)?;
        }
        Cmd::GenTrace { n, preset, mean, start, span, seed, out } => {
            let durations = match (mean, preset) {
                (Some(mean), _) => DurationDist::Exponential { mean },
                (None, Preset::Lust) => DurationDist::lust(),
                (None, Preset::Tapas) => DurationDist::tapas(),
            };
            let trace = synthesize_trace(n, durations, ArrivalDist::Uniform { start, span }, seed)?;
            write_trace(&out, &trace)?;
            let s = summarize(&trace);
            println!("{} trips, mean duration {:.2} s", s.count, s.mean_duration);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            error!("cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match rt.block_on(run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
