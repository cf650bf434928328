use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use prefusion::evidence::{read_reports, write_reports, FrameInterner, Report};
use prefusion::harness::{cmd_bench, cmd_gen_corpus, cmd_oracle_compare, BenchConfig, CorpusConfig, LARGE_K};
use prefusion::pipeline::{
    restore, snapshot, AnnealDefaults, EpochOutcome, FlatConfig, IngestOutcome, PipelineState, Routing,
};
use prefusion::potts::{anneal, interactions, Partition, SupportMode, MAX_BENCHMARK_K};
use prefusion::prototype::{classify_with_threshold, extract_prototypes, PrototypeTable, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{metric_value, Sink};
use crate::{
    AnnealArgs, BenchArgs, ClassifyArgs, Cli, ClusterArgs, Command, CorpusArgs, Failure, OracleArgs, PipelineArgs,
    PipelineCommand, PrototypeArgs,
};

type CmdResult = Result<(), Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

pub fn run(cli: Cli) -> CmdResult {
    let ci = std::env::var_os("CI").is_some_and(|v| !v.is_empty());
    if ci && cli.seed.is_none() {
        return Err(invalid("--seed is required when CI is set"));
    }
    let seed = cli.seed.unwrap_or(0);
    let mut sink = Sink::open(cli.output.as_deref(), cli.format)?;
    let result = match cli.command {
        Command::Bench(a) => bench(a, seed, &mut sink),
        Command::OracleCompare(a) => oracle(a, seed, &mut sink),
        Command::GenCorpus(a) => gen_corpus(a, seed, &mut sink),
        Command::Cluster(a) => cluster(a, seed, &mut sink),
        Command::Prototypes(a) => prototypes(a, &mut sink),
        Command::Classify(a) => classify(a, &mut sink),
        Command::Pipeline(PipelineCommand::Run(a)) => pipeline(a, cli.seed, &mut sink),
    };
    // Flush whatever was produced, even when the command failed afterwards.
    let flushed = sink.finish();
    result?;
    flushed?;
    Ok(())
}

fn anneal_defaults(a: &AnnealArgs, seed: u64) -> AnnealDefaults {
    let mut d = AnnealDefaults {
        seed,
        ..AnnealDefaults::default()
    };
    if let Some(v) = a.gamma {
        d.gamma = v;
    }
    d.alpha = a.alpha.or(d.alpha);
    if let Some(v) = a.epsilon {
        d.epsilon = v;
    }
    if let Some(v) = a.tau {
        d.tau = v;
    }
    if let Some(v) = a.inner_tol {
        d.inner_tol = v;
    }
    if let Some(v) = a.saturation {
        d.saturation = v;
    }
    if let Some(v) = a.max_outer {
        d.max_outer = v;
    }
    if let Some(v) = a.max_inner {
        d.max_inner = v;
    }
    d
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Failure> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin().lock())));
    }
    let f = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

fn load_reports(path: &Path) -> Result<Vec<Report>, Failure> {
    Ok(read_reports(open_input(path)?)?)
}

fn parse_range(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || invalid(format!("K range `{s}` is not of the form lo..hi"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_support(s: &str, seed: u64) -> Result<SupportMode, Failure> {
    let bad = || invalid(format!("support `{s}` is not fixed:<s> or range:<lo>,<hi>"));
    if let Some(v) = s.strip_prefix("fixed:") {
        return Ok(SupportMode::Fixed(v.trim().parse().map_err(|_| bad())?));
    }
    let (lo, hi) = s.strip_prefix("range:").and_then(parse_pair).ok_or_else(bad)?;
    Ok(SupportMode::Range { lo, hi, seed })
}

fn bench(a: BenchArgs, seed: u64, sink: &mut Sink) -> CmdResult {
    let (k_min, k_max) = match a.k {
        Some(k) => (k, k),
        None => parse_range(&a.k_range)?,
    };
    if k_max > MAX_BENCHMARK_K {
        return Err(invalid(format!(
            "K = {k_max} exceeds the benchmark cap {MAX_BENCHMARK_K}"
        )));
    }
    if k_max >= LARGE_K {
        if !a.allow_large {
            return Err(invalid(format!("K = {k_max} ≥ {LARGE_K} needs --allow-large")));
        }
        eprintln!("warning: K ≥ {LARGE_K} runs take long and fluctuate strongly between seeds");
    }
    let mut cfg = BenchConfig::new(k_min, k_max, a.runs, seed);
    cfg.anneal = anneal_defaults(&a.anneal, seed);
    cfg.support = parse_support(&a.support, seed)?;
    let report = cmd_bench(&cfg)?;
    let mut v = metric_value(&report)?;
    v["reference"] = json!({
        "K": 11,
        "N": 2047,
        "mean_per_evidence": 0.008,
        "median_per_evidence": 0.024,
        "executed": false,
    });
    sink.document(&v)?;
    Ok(())
}

fn oracle(a: OracleArgs, seed: u64, sink: &mut Sink) -> CmdResult {
    let report = cmd_oracle_compare(a.n, a.q, a.instances, seed, &anneal_defaults(&a.anneal, seed))?;
    sink.document(&metric_value(&report)?)?;
    Ok(())
}

fn gen_corpus(a: CorpusArgs, seed: u64, sink: &mut Sink) -> CmdResult {
    let (lo, hi) = parse_pair(&a.support).ok_or_else(|| invalid("support must be `lo,hi`"))?;
    let cfg = CorpusConfig {
        noise: a.noise,
        support_lo: lo,
        support_hi: hi,
        ..CorpusConfig::new(a.frame_size, a.count, a.events, seed)
    };
    let reports = cmd_gen_corpus(&cfg)?;
    write_reports(sink.raw(), &reports)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignedReport {
    id: String,
    cluster: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Steps {
    outer: usize,
    inner: usize,
}

/// Partition JSON exchanged between `cluster` and `prototypes`.
#[derive(Debug, Serialize, Deserialize)]
struct PartitionFile {
    k: usize,
    assignment: Vec<AssignedReport>,
    cluster_conflicts: Vec<f64>,
    metaconflict: f64,
    saturated: bool,
    converged: bool,
    initial_temperature: f64,
    steps: Steps,
    runtime_ms: f64,
}

fn cluster(a: ClusterArgs, seed: u64, sink: &mut Sink) -> CmdResult {
    let reports = load_reports(&a.input)?;
    let params = anneal_defaults(&a.anneal, seed).params(a.k, seed);
    let start = Instant::now();
    let j = interactions(&reports)?;
    let out = anneal(&j, &params)?;
    let partition = Partition::evaluate(&reports, out.assignment.clone(), a.k)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let file = PartitionFile {
        k: a.k,
        assignment: reports
            .iter()
            .zip(&partition.assignment)
            .map(|(r, &c)| AssignedReport {
                id: r.id.clone(),
                cluster: c,
            })
            .collect(),
        cluster_conflicts: partition.cluster_conflicts.clone(),
        metaconflict: partition.metaconflict,
        saturated: partition.saturated,
        converged: out.converged,
        initial_temperature: out.initial_temperature,
        steps: Steps {
            outer: out.spins.outer_steps,
            inner: out.spins.inner_steps,
        },
        runtime_ms,
    };
    sink.document(&metric_value(&file)?)?;
    out.require_converged()?;
    Ok(())
}

fn prototypes(a: PrototypeArgs, sink: &mut Sink) -> CmdResult {
    let reports = load_reports(&a.input)?;
    let file: PartitionFile = serde_json::from_reader(open_input(&a.partition)?)?;
    if file.assignment.len() != reports.len() {
        return Err(invalid(format!(
            "partition covers {} reports, input has {}",
            file.assignment.len(),
            reports.len()
        )));
    }
    let by_id: std::collections::HashMap<&str, usize> =
        file.assignment.iter().map(|x| (x.id.as_str(), x.cluster)).collect();
    let assignment = reports
        .iter()
        .map(|r| {
            by_id
                .get(r.id.as_str())
                .copied()
                .ok_or_else(|| invalid(format!("report {} missing from the partition", r.id)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let partition = Partition::evaluate(&reports, assignment, file.k)?;
    let table = extract_prototypes(&partition, &reports, a.n, a.threshold)?;
    sink.document(&serde_json::to_value(&table)?)?;
    Ok(())
}

fn classification_record(
    id: &str,
    verdict: Verdict,
    table: &PrototypeTable,
    against: &[f64],
    combinations_used: usize,
) -> serde_json::Result<Value> {
    let (label, cluster) = match verdict {
        Verdict::Assigned(j) => ("assigned", Some(j)),
        Verdict::Rejected => ("rejected", None),
    };
    metric_value(&json!({
        "id": id,
        "verdict": label,
        "cluster": cluster,
        "source_cluster": cluster.map(|j| table.clusters[j].source_cluster),
        "against": against,
        "combinations_used": combinations_used,
    }))
}

fn classify(a: ClassifyArgs, sink: &mut Sink) -> CmdResult {
    let table: PrototypeTable = serde_json::from_reader(open_input(&a.table)?)?;
    let threshold = a.threshold.unwrap_or(table.threshold);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid(format!("threshold {threshold} outside (0, 1]")));
    }
    // Reports are read against the table's frame so classification can
    // compare frames by pointer.
    let mut interner = FrameInterner::default();
    interner.intern(table.frame.labels().to_vec())?;
    for (n, line) in open_input(&a.input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = interner
            .parse_line(&line)
            .map_err(|err| invalid(format!("line {}: {err}", n + 1)))?;
        let r = classify_with_threshold(&e, &table, threshold)?;
        sink.record(&classification_record(
            &e.id,
            r.verdict,
            &table,
            &r.evidence.against,
            r.combinations_used,
        )?)?;
    }
    Ok(())
}

fn pipeline_config(a: &PipelineArgs, seed: Option<u64>) -> Result<FlatConfig, Failure> {
    let from_file = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            toml::from_str::<FlatConfig>(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => FlatConfig::default(),
    };
    let x = &a.anneal;
    let flags = FlatConfig {
        p0: a.p0,
        db2_capacity: a.db2_capacity,
        aging_rate: a.aging_rate,
        gamma: x.gamma,
        alpha: x.alpha,
        epsilon: x.epsilon,
        tau: x.tau,
        inner_tol: x.inner_tol,
        saturation: x.saturation,
        seed,
        max_outer: x.max_outer,
        max_inner: x.max_inner,
        conflict_threshold: a.threshold,
        proto_count: a.proto_count,
        initial_q: a.initial_q,
        epoch_every: a.epoch_every,
    };
    Ok(from_file.merge(flags))
}

fn routing_record(out: &IngestOutcome, state: &PipelineState) -> serde_json::Result<Value> {
    let (label, subset) = match out.routing {
        Routing::Deferred => ("deferred", None),
        Routing::Subset(j) => ("subset", Some(j)),
        Routing::Rejected => ("rejected", None),
    };
    let source = subset.and_then(|j| state.table.as_ref().map(|t| t.clusters[j].source_cluster));
    metric_value(&json!({
        "id": out.id,
        "routing": label,
        "subset": subset,
        "source_cluster": source,
        "against": out.classification.as_ref().map(|c| &c.evidence.against),
        "combinations_used": out.classification.as_ref().map(|c| c.combinations_used),
    }))
}

fn epoch_record(o: &EpochOutcome) -> serde_json::Result<Value> {
    metric_value(&json!({
        "epoch": o.epoch,
        "adopted": match o.adopted {
            prefusion::pipeline::Adopted::Current => "PDSC1",
            prefusion::pipeline::Adopted::Reduced => "PDSC2",
        },
        "q": o.q,
        "q_next": o.q_next,
        "max_conflicts": [o.max_conflicts.0, o.max_conflicts.1],
        "metaconflict": o.metaconflict,
        "reclassified": o.reclassified,
        "converged": o.converged,
        "db2_size": o.db2_size,
        "table_clusters": o.table_clusters,
    }))
}

struct EpochLog {
    out: Box<dyn Write>,
    snapshot: Option<PathBuf>,
}

impl EpochLog {
    fn epoch(&mut self, state: &mut PipelineState) -> CmdResult {
        let o = state.run_epoch()?;
        serde_json::to_writer(&mut self.out, &epoch_record(&o)?)?;
        writeln!(self.out)?;
        if !o.converged {
            eprintln!("warning: epoch {} did not converge; previous table kept", o.epoch);
        }
        if o.q_next == 1 {
            eprintln!("warning: cluster count reached 1 at epoch {}", o.epoch);
        }
        self.save(state)
    }

    fn save(&mut self, state: &PipelineState) -> CmdResult {
        if let Some(dir) = &self.snapshot {
            std::fs::create_dir_all(dir)?;
            snapshot(state, &dir.join("state.json"))?;
        }
        Ok(())
    }
}

fn pipeline(a: PipelineArgs, seed: Option<u64>, sink: &mut Sink) -> CmdResult {
    let cfg = pipeline_config(&a, seed)?.resolve()?;
    let resume_path = a.snapshot.as_ref().map(|d| d.join("state.json"));
    let mut state = match &resume_path {
        Some(p) if a.resume && p.exists() => restore(p)?,
        _ => PipelineState::new(cfg)?,
    };
    let mut log = EpochLog {
        out: match &a.log {
            Some(p) => Box::new(File::create(p)?),
            None => Box::new(io::stderr()),
        },
        snapshot: a.snapshot.clone(),
    };
    let mut interner = FrameInterner::default();
    if let Some(r) = state.db1.first() {
        interner.intern(r.frame().labels().to_vec())?;
    }
    let mut rejected_lines = 0;
    for (n, line) in open_input(&a.input)?.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Ok(cmd) = serde_json::from_str::<Control>(trimmed) {
            match cmd.command.as_str() {
                "epoch" => log.epoch(&mut state)?,
                other => {
                    rejected_lines += 1;
                    sink.record(&json!({"line": n + 1, "error": format!("unknown command `{other}`")}))?;
                }
            }
            continue;
        }
        let ingested = interner.parse_line(trimmed).and_then(|r| state.ingest(r));
        match ingested {
            Ok(out) => {
                sink.record(&routing_record(&out, &state)?)?;
                if out.epoch_due {
                    log.epoch(&mut state)?;
                }
            }
            Err(e) => {
                rejected_lines += 1;
                sink.record(&json!({"line": n + 1, "error": e.to_string()}))?;
            }
        }
    }
    if a.final_epoch && state.len() >= 2 {
        log.epoch(&mut state)?;
    }
    log.save(&state)?;
    log.out.flush()?;
    if rejected_lines > 0 {
        return Err(invalid(format!("{rejected_lines} input lines were rejected")));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Control {
    command: String,
}
