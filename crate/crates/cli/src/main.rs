//! `care` — command-line front end: simulation, sweeps, and the
//! redundancy/similarity utilities, all seed-reproducible with CSV output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use care_core::config::{validate_config, ScenarioConfig};
use care_core::detectors::CostModel;
use care_core::error::CoreError;
use care_core::eval::{
    calibrate_threshold, pipeline_report, roc_sweep, CalibrationTarget, MethodScores, ScoredPair,
};
use care_core::metrics::{
    paired_run_on, write_latency_cdf_csv, write_summary_csv, write_unique_over_time_csv,
    PairedOutcome,
};
use care_core::phash::{hamming_distance, phash_compute, read_pgm};
use care_core::redundancy::{
    aggregate_labels, chunk_dedup_ratio, maximal_similar_sets, min_set_cover, read_items_manifest,
    read_label_csv,
};
use care_core::sim::{build_map, write_event_csv, DetectorKind};
use care_core::workload::write_schedule_csv;

const EXIT_CONFIG: i32 = 2;
const EXIT_RUNTIME: i32 = 3;

#[derive(Parser)]
#[command(name = "care", version, about = "Content-aware redundancy elimination toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Scenario config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set target_redundancy_rsim=0.4 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master RNG seed; overrides the config's rng_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one paired CARE vs non-RE simulation and write all metric CSVs.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for CSVs and the run manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Cartesian parameter sweep of paired runs across seeds.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Swept parameter, e.g. --param target_redundancy_rsim=0.2,0.4,0.6 (repeatable).
        #[arg(long = "param", value_name = "KEY=V1,V2,..")]
        params: Vec<String>,
        /// Number of seeds per grid cell (seed, seed+1, ...).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Set-cover redundancy of a labeled item corpus.
    Redundancy {
        /// Pairwise label CSV: item_a,item_b,score1[,score2..].
        labels: PathBuf,
        /// Item manifest, one id per line.
        items: PathBuf,
    },
    /// ROC sweep (and optional threshold calibration) over scored pairs.
    Roc {
        /// Scored pair CSV: item_a,item_b,score,similar.
        scores: PathBuf,
        /// Calibrate the loosest threshold with FP rate <= this value.
        #[arg(long)]
        max_fp: Option<f64>,
        /// Calibrate the min-FP threshold with FN rate <= this value.
        #[arg(long)]
        max_fn: Option<f64>,
    },
    /// FP/FN/cost report for the three methods and the staged pipeline.
    Pipeline {
        /// Scores CSV: item_a,item_b,similar,gist,phash_sim,m,m_prime
        /// (empty fields = score unavailable).
        scores: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        t_gist: f64,
        #[arg(long, default_value_t = 58)]
        t_ph: u32,
        #[arg(long, default_value_t = 0.6)]
        t_sift: f64,
    },
    /// pHash of PGM images; pairwise Hamming distances for 2+ images.
    Phash {
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Fixed-chunk dedup ratio over input files.
    Chunk {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 512)]
        chunk_size: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.exit_code
        }
    };
    std::process::exit(code);
}

struct CliError {
    exit_code: i32,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_CONFIG, message: message.into() }
    }
    fn runtime(message: impl Into<String>) -> Self {
        CliError { exit_code: EXIT_RUNTIME, message: message.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) => CliError::config(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

fn load_config(args: &ConfigArgs) -> Result<ScenarioConfig, CliError> {
    let base = match &args.config {
        Some(path) => ScenarioConfig::from_file(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?,
        None => ScenarioConfig::default(),
    };
    let pairs: Vec<(String, String)> = args
        .set
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::config(format!("--set expects KEY=VALUE, got `{kv}`")))
        })
        .collect::<Result<_, _>>()?;
    let mut cfg =
        base.with_overrides(&pairs).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    let errs = validate_config(&cfg);
    if !errs.is_empty() {
        return Err(CliError::config(errs.join("; ")));
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Simulate { config, out } => cmd_simulate(&config, &out),
        Cmd::Sweep { config, params, seeds, workers, out } => {
            cmd_sweep(&config, &params, seeds, workers, &out)
        }
        Cmd::Redundancy { labels, items } => cmd_redundancy(&labels, &items),
        Cmd::Roc { scores, max_fp, max_fn } => cmd_roc(&scores, max_fp, max_fn),
        Cmd::Pipeline { scores, t_gist, t_ph, t_sift } => {
            cmd_pipeline(&scores, t_gist, t_ph, t_sift)
        }
        Cmd::Phash { images } => cmd_phash(&images),
        Cmd::Chunk { files, chunk_size } => cmd_chunk(&files, chunk_size),
    }
}

/// Writes `bytes` atomically: temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn manifest_json(
    command: &str,
    cfg: &ScenarioConfig,
    outputs: &[String],
    wall_seconds: f64,
) -> String {
    let m = serde_json::json!({
        "artifact_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.rng_seed,
        "config_toml": cfg.to_canonical_toml(),
        "outputs": outputs,
        "wall_seconds": wall_seconds,
    });
    serde_json::to_string_pretty(&m).expect("manifest serializes")
}

fn write_outcome_csvs(
    out: &Path,
    cfg: &ScenarioConfig,
    outcome: &PairedOutcome,
) -> Result<Vec<String>, CliError> {
    let mut outputs = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<(), CliError> {
        write_atomic(&out.join(name), &bytes)?;
        outputs.push(name.to_string());
        Ok(())
    };

    let mut buf = Vec::new();
    write_schedule_csv(&mut buf, &outcome.schedule)?;
    emit("schedule.csv", buf)?;

    let mut buf = Vec::new();
    write_event_csv(&mut buf, &outcome.care.events)?;
    emit("events_care.csv", buf)?;

    let mut buf = Vec::new();
    write_event_csv(&mut buf, &outcome.nonre.events)?;
    emit("events_nonre.csv", buf)?;

    let mut buf = Vec::new();
    write_unique_over_time_csv(&mut buf, outcome)?;
    emit("unique_over_time.csv", buf)?;

    let mut buf = Vec::new();
    write_latency_cdf_csv(&mut buf, outcome)?;
    emit("latency_cdf.csv", buf)?;

    let mut buf = Vec::new();
    write_summary_csv(&mut buf, cfg, outcome, false)?;
    emit("summary.csv", buf)?;

    Ok(outputs)
}

fn cmd_simulate(config: &ConfigArgs, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = load_config(config)?;
    fs::create_dir_all(out)?;
    let map = build_map(&cfg)?;
    let detector = DetectorKind::Oracle { fp: cfg.detector_fp, fnr: cfg.detector_fn };
    let outcome = paired_run_on(&cfg, &map, detector)?;
    let mut outputs = write_outcome_csvs(out, &cfg, &outcome)?;
    outputs.push("manifest.json".to_string());
    let manifest = manifest_json("simulate", &cfg, &outputs, started.elapsed().as_secs_f64());
    write_atomic(&out.join("manifest.json"), manifest.as_bytes())?;
    println!(
        "u_care={} u_nonre={} improvement={} drops_care={} drops_nonre={} disaster_fraction={:.3}",
        outcome.u_care,
        outcome.u_nonre,
        outcome.improvement.map_or_else(|| "undefined".into(), |v| format!("{v:.2}%")),
        outcome.care.drops.capacity,
        outcome.nonre.drops.capacity,
        outcome.care.disaster_time_fraction,
    );
    Ok(())
}

fn parse_sweep_params(params: &[String]) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let mut grid = Vec::new();
    for p in params {
        let (key, vals) = p
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--param expects KEY=V1,V2,.. got `{p}`")))?;
        let values: Vec<String> =
            vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(CliError::config(format!("--param `{key}` has no values")));
        }
        grid.push((key.trim().to_string(), values));
    }
    if grid.is_empty() {
        return Err(CliError::config("sweep needs at least one --param".to_string()));
    }
    Ok(grid)
}

/// Cartesian product of the sweep grid as override lists.
fn grid_cells(grid: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in grid {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for v in values {
                let mut c = cell.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        cells = next;
    }
    cells
}

struct SweepRow {
    cell: usize,
    seed: u64,
    cfg: ScenarioConfig,
    outcome: PairedOutcome,
}

fn cmd_sweep(
    config: &ConfigArgs,
    params: &[String],
    seeds: u64,
    workers: usize,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    if seeds == 0 {
        return Err(CliError::config("--seeds must be at least 1".to_string()));
    }
    let base = load_config(config)?;
    let grid = parse_sweep_params(params)?;
    let cells = grid_cells(&grid);
    fs::create_dir_all(out)?;

    // materialize every job's config up front so config errors exit early
    let mut jobs: Vec<(usize, u64, Vec<(String, String)>, ScenarioConfig)> = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        for s in 0..seeds {
            let mut cfg =
                base.with_overrides(cell).map_err(|e| CliError::config(e.to_string()))?;
            cfg.rng_seed = base.rng_seed + s;
            let errs = validate_config(&cfg);
            if !errs.is_empty() {
                return Err(CliError::config(format!("cell {cell:?}: {}", errs.join("; "))));
            }
            jobs.push((ci, cfg.rng_seed, cell.clone(), cfg));
        }
    }

    let workers = workers.max(1).min(jobs.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: std::sync::Mutex<Vec<Result<SweepRow, CliError>>> =
        std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let (ci, seed, _cell, cfg) = &jobs[i];
                let result = (|| -> Result<SweepRow, CliError> {
                    let map = build_map(cfg)?;
                    let detector =
                        DetectorKind::Oracle { fp: cfg.detector_fp, fnr: cfg.detector_fn };
                    let outcome = paired_run_on(cfg, &map, detector)?;
                    Ok(SweepRow {
                        cell: *ci,
                        seed: *seed,

                        cfg: cfg.clone(),
                        outcome,
                    })
                })();
                results.lock().unwrap().push(result);
            });
        }
    });

    let mut rows: Vec<SweepRow> = Vec::new();
    for r in results.into_inner().unwrap() {
        rows.push(r?);
    }
    rows.sort_by_key(|r| (r.cell, r.seed));

    // per-run summary rows, spec columns
    let mut buf = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut one = Vec::new();
        write_summary_csv(&mut one, &r.cfg, &r.outcome, i > 0)?;
        buf.extend_from_slice(&one);
    }
    write_atomic(&out.join("summary.csv"), &buf)?;

    // per-cell aggregate: mean and stddev of improvement
    let mut agg = String::new();
    let keys: Vec<&str> = grid.iter().map(|(k, _)| k.as_str()).collect();
    agg.push_str(&keys.join(","));
    agg.push_str(",n,mean_improvement,std_improvement\n");
    for ci in 0..cells.len() {
        let cell_rows: Vec<&SweepRow> = rows.iter().filter(|r| r.cell == ci).collect();
        let imps: Vec<f64> =
            cell_rows.iter().filter_map(|r| r.outcome.improvement).collect();
        let n = imps.len() as f64;
        let (mean, std) = if imps.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mean = imps.iter().sum::<f64>() / n;
            let var = imps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let vals: Vec<String> =
            cells[ci].iter().map(|(_, v)| v.clone()).collect();
        agg.push_str(&format!("{},{},{mean},{std}\n", vals.join(","), imps.len()));
    }
    write_atomic(&out.join("aggregate.csv"), agg.as_bytes())?;

    let outputs = vec!["summary.csv".to_string(), "aggregate.csv".to_string(), "manifest.json".to_string()];
    let manifest = manifest_json("sweep", &base, &outputs, started.elapsed().as_secs_f64());
    write_atomic(&out.join("manifest.json"), manifest.as_bytes())?;
    println!("{} runs across {} cells -> {}", rows.len(), cells.len(), out.display());
    Ok(())
}

fn cmd_redundancy(labels: &Path, items: &Path) -> Result<(), CliError> {
    let label_records = read_label_csv(fs::File::open(labels)?)?;
    let item_ids = read_items_manifest(fs::File::open(items)?)?;
    let graph = aggregate_labels(&label_records, &item_ids)?;
    let sets = maximal_similar_sets(&graph);
    let cover = min_set_cover(&sets, graph.items());
    println!("metric,value");
    println!("items,{}", graph.len());
    println!("maximal_sets,{}", cover.maximal_sets.len());
    println!("cover_size,{}", cover.cover.len());
    println!("redundancy,{}", cover.redundancy);
    println!("exact,{}", cover.exact);
    Ok(())
}

fn read_scored_pairs(path: &Path) -> Result<Vec<ScoredPair>, CliError> {
    let mut rdr = csv::Reader::from_reader(fs::File::open(path)?);
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::runtime(e.to_string()))?;
        if rec.len() < 4 {
            return Err(CliError::runtime(format!("short scored-pair row: {rec:?}")));
        }
        let parse_bool = |s: &str| matches!(s.trim(), "1" | "true" | "True");
        pairs.push(ScoredPair {
            item_a: rec[0].trim().to_string(),
            item_b: rec[1].trim().to_string(),
            score: rec[2]
                .trim()
                .parse()
                .map_err(|_| CliError::runtime(format!("bad score `{}`", &rec[2])))?,
            similar: parse_bool(&rec[3]),
        });
    }
    Ok(pairs)
}

fn cmd_roc(scores: &Path, max_fp: Option<f64>, max_fn: Option<f64>) -> Result<(), CliError> {
    let pairs = read_scored_pairs(scores)?;
    let curve = roc_sweep(&pairs)?;
    println!("threshold,fp_rate,tp_rate");
    for p in &curve.points {
        println!("{},{},{}", p.threshold, p.fp_rate, p.tp_rate);
    }
    eprintln!("auc={}", curve.auc());
    if let Some(fp) = max_fp {
        let t = calibrate_threshold(&pairs, CalibrationTarget::MaxFp(fp))?;
        eprintln!("threshold_max_fp={t}");
    }
    if let Some(fnr) = max_fn {
        let t = calibrate_threshold(&pairs, CalibrationTarget::MaxFn(fnr))?;
        eprintln!("threshold_max_fn={t}");
    }
    Ok(())
}

fn read_method_scores(path: &Path) -> Result<Vec<MethodScores>, CliError> {
    let mut rdr = csv::Reader::from_reader(fs::File::open(path)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::runtime(e.to_string()))?;
        if rec.len() < 7 {
            return Err(CliError::runtime(format!("short method-score row: {rec:?}")));
        }
        let opt = |i: usize| {
            let s = rec[i].trim();
            if s.is_empty() {
                None
            } else {
                Some(s.to_string())
            }
        };
        let parse = |s: Option<String>, what: &str| -> Result<Option<f64>, CliError> {
            s.map(|v| {
                v.parse().map_err(|_| CliError::runtime(format!("bad {what} `{v}`")))
            })
            .transpose()
        };
        let m = parse(opt(5), "m")?;
        let mp = parse(opt(6), "m_prime")?;
        let sift = match (m, mp) {
            (Some(m), Some(mp)) => Some((m as u32, mp as u32)),
            (None, None) => None,
            _ => return Err(CliError::runtime("m and m_prime must come together")),
        };
        out.push(MethodScores {
            item_a: rec[0].trim().to_string(),
            item_b: rec[1].trim().to_string(),
            similar: matches!(rec[2].trim(), "1" | "true" | "True"),
            gist: parse(opt(3), "gist")?,
            phash_similarity: parse(opt(4), "phash_sim")?.map(|v| v as u32),
            sift,
        });
    }
    Ok(out)
}

fn cmd_pipeline(scores: &Path, t_gist: f64, t_ph: u32, t_sift: f64) -> Result<(), CliError> {
    let pairs = read_method_scores(scores)?;
    let report = pipeline_report(&pairs, t_gist, t_ph, t_sift, &CostModel::default())?;
    println!("method,fp_rate,fn_rate,normalized_cost");
    for row in &report.rows {
        let show = |r: Option<f64>| r.map_or("undefined".to_string(), |v| v.to_string());
        println!(
            "{},{},{},{}",
            row.method,
            show(row.fp_rate),
            show(row.fn_rate),
            row.normalized_cost
        );
    }
    let (n1, n2, n3) = report.stage_counts;
    eprintln!("stage_counts gist={n1} phash={n2} sift={n3} pairs={}", report.pair_universe);
    Ok(())
}

fn cmd_phash(images: &[PathBuf]) -> Result<(), CliError> {
    let mut hashes = Vec::new();
    println!("image,hash");
    for path in images {
        let data = fs::read(path)?;
        let img = read_pgm(&data)?;
        let h = phash_compute(&img)?;
        println!("{},{}", path.display(), h.to_hex());
        hashes.push((path, h));
    }
    if hashes.len() > 1 {
        eprintln!("image_a,image_b,hamming_distance,similarity");
        for i in 0..hashes.len() {
            for j in i + 1..hashes.len() {
                let d = hamming_distance(hashes[i].1, hashes[j].1);
                eprintln!(
                    "{},{},{},{}",
                    hashes[i].0.display(),
                    hashes[j].0.display(),
                    d,
                    64 - d
                );
            }
        }
    }
    Ok(())
}

fn cmd_chunk(files: &[PathBuf], chunk_size: usize) -> Result<(), CliError> {
    let blobs: Vec<Vec<u8>> =
        files.iter().map(fs::read).collect::<Result<_, _>>()?;
    let ratio = chunk_dedup_ratio(&blobs, chunk_size)?;
    println!("chunk_size,files,dedup_ratio");
    println!("{},{},{}", chunk_size, files.len(), ratio);
    Ok(())
}
