use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use burstsim::kernel::Netlist;
use burstsim::protocol::Command;
use burstsim_harness::{golden_memory_check, run, sweep, BuildOptions, HarnessError, RunOutcome, TopologyConfig};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(name = "sim", about = "Cycle-accurate interconnect simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a topology and write metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        cycles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-link CSV; the latency histogram goes next to it as
        /// `<stem>.latency.csv`.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        /// Cycle-by-cycle CSV of traced links (all links if none is flagged).
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Check read data and final memory against the golden model.
        #[arg(long)]
        check: bool,
        /// Drain budget; defaults to the config's.
        #[arg(long)]
        watchdog: Option<u64>,
    },
    /// Parse and build a topology without simulating it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one variant per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `KEY=V1,V2,...`, e.g. `component.hbm.extra_latency=0,20,40`.
        #[arg(long)]
        param: String,
        #[arg(long, default_value_t = 10_000)]
        cycles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn options(config: &Path, seed: u64) -> BuildOptions {
    BuildOptions {
        seed,
        record: false,
        base_dir: config.parent().map(Path::to_path_buf),
        trace_all: false,
    }
}

fn describe(c: &Command) -> String {
    format!("id={} addr={:#x} len={} size={}", c.id.value(), c.addr, c.len, c.size)
}

fn write_traces(net: &Netlist, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["cycle", "link", "channel", "valid", "ready", "payload"])?;
    for (l, t) in net.traces() {
        let name = net.link_name(l);
        let mut rows: Vec<(u64, &str, bool, bool, String)> = Vec::new();
        for s in &t.aw {
            rows.push((s.cycle, "aw", s.valid, s.ready, s.payload.as_ref().map(describe).unwrap_or_default()));
        }
        for s in &t.w {
            let p = s.payload.as_ref().map(|b| format!("strb={:#x} last={}", b.strb, b.last));
            rows.push((s.cycle, "w", s.valid, s.ready, p.unwrap_or_default()));
        }
        for s in &t.b {
            let p = s.payload.as_ref().map(|b| format!("id={} resp={:?}", b.id.value(), b.resp));
            rows.push((s.cycle, "b", s.valid, s.ready, p.unwrap_or_default()));
        }
        for s in &t.ar {
            rows.push((s.cycle, "ar", s.valid, s.ready, s.payload.as_ref().map(describe).unwrap_or_default()));
        }
        for s in &t.r {
            let p = s.payload.as_ref().map(|b| format!("id={} resp={:?} last={}", b.id.value(), b.resp, b.last));
            rows.push((s.cycle, "r", s.valid, s.ready, p.unwrap_or_default()));
        }
        rows.sort_by_key(|r| r.0);
        for (cycle, chan, valid, ready, p) in rows {
            w.write_record([cycle.to_string(), name.to_string(), chan.into(), (valid as u8).to_string(), (ready as u8).to_string(), p])?;
        }
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

fn exit_code(out: &RunOutcome, oracle_failed: bool) -> u8 {
    if out.timeout.is_some() {
        EXIT_TIMEOUT
    } else if !out.violations.is_empty() || oracle_failed {
        EXIT_VIOLATIONS
    } else {
        0
    }
}

fn cmd_run(
    config: &Path,
    cycles: u64,
    seed: u64,
    metrics_out: Option<&Path>,
    trace_out: Option<&Path>,
    check: bool,
    watchdog: Option<u64>,
) -> Result<u8, HarnessError> {
    let cfg = TopologyConfig::parse(&read(config)?)?;
    let mut opts = options(config, seed);
    opts.record = check;
    opts.trace_all = trace_out.is_some();
    let mut sim = cfg.build(&opts)?;
    let wd = watchdog.unwrap_or(cfg.meta.watchdog);
    let out = run(&mut sim, cycles, wd);

    let m = &out.metrics;
    println!("topology {} seed {seed}", cfg.meta.name);
    println!("cycles {} (drain {})", m.cycles, out.drain_cycles);
    println!("aggregate bandwidth {:.3} GB/s at {} GHz", m.aggregate_bandwidth() / 1e9, m.clock_ghz);
    println!("violations {}", out.violations.len());
    for v in out.violations.iter().take(10) {
        eprintln!("{v:?}");
    }
    let mut oracle_failed = false;
    if let Some(t) = &out.timeout {
        eprintln!("watchdog: {t}");
    } else if check {
        match golden_memory_check(&sim) {
            Ok(r) => println!(
                "golden memory: pass ({} read bytes, {} final bytes, {} skipped)",
                r.read_bytes, r.final_bytes, r.skipped
            ),
            Err(e) => {
                println!("golden memory: FAIL {e}");
                oracle_failed = true;
            }
        }
    }
    if let Some(p) = metrics_out {
        m.write_csv(create(p)?)?;
        m.write_latency_csv(create(&p.with_extension("latency.csv"))?)?;
    }
    if let Some(p) = trace_out {
        write_traces(&sim.net, p)?;
    }
    Ok(exit_code(&out, oracle_failed))
}

fn cmd_sweep(config: &Path, param: &str, cycles: u64, seed: u64) -> Result<u8, HarnessError> {
    let variants = sweep::variants(&read(config)?, param)?;
    let opts = options(config, seed);
    let results: Vec<Result<(String, u8, String), HarnessError>> = variants
        .into_par_iter()
        .map(|(v, cfg)| {
            let mut sim = cfg.build(&opts)?;
            let out = run(&mut sim, cycles, cfg.meta.watchdog);
            let line = format!(
                "{},{},{},{},{:.3}",
                v.replace(',', ";"),
                out.metrics.cycles,
                out.violations.len(),
                out.timeout.is_some(),
                out.metrics.aggregate_bandwidth() / 1e9
            );
            Ok((v, exit_code(&out, false), line))
        })
        .collect();
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "value,cycles,violations,timeout,aggregate_gbps");
    let mut code = 0;
    for r in results {
        let (_, c, line) = r?;
        let _ = writeln!(stdout, "{line}");
        code = code.max(c);
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run {
            config,
            cycles,
            seed,
            metrics_out,
            trace_out,
            check,
            watchdog,
        } => cmd_run(config, *cycles, *seed, metrics_out.as_deref(), trace_out.as_deref(), *check, *watchdog),
        Cmd::Validate { config } => read(config).and_then(|t| TopologyConfig::parse(&t)).and_then(|c| {
            let sim = c.build(&options(config, 0))?;
            println!(
                "ok: {} components, {} links",
                sim.net.component_count(),
                sim.net.link_count()
            );
            Ok(0)
        }),
        Cmd::Sweep {
            config,
            param,
            cycles,
            seed,
        } => cmd_sweep(config, param, *cycles, *seed),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
