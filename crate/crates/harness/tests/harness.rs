use std::path::Path;
use std::process::Command;

use burstsim::kernel::Chan;
use burstsim_harness::{golden_memory_check, load_topology, run, BuildOptions, HarnessError, TopologyConfig};

const MINIMAL: &str = r#"
[meta]
name = "minimal"

[[component]]
type = "generator"
name = "g"
data_bytes = 8
id_bits = 2

[[component]]
type = "cut"
name = "wire"
data_bytes = 8
id_bits = 2

[[component]]
type = "memory"
name = "mem"
kind = "duplex"
data_bytes = 8
id_bits = 2
base = 0
size = 0x4000

[[link]]
from = "g"
to = "wire"

[[link]]
from = "wire"
to = "mem"
"#;

const TRAFFIC: &str = r#"
[[traffic]]
kind = "random"
generators = ["g"]
ranges = [[0, 0x4000]]
"#;

fn recording(seed: u64) -> BuildOptions {
    BuildOptions {
        seed,
        record: true,
        ..Default::default()
    }
}

#[test]
fn minimal_config_builds_three_components() {
    let sim = load_topology(MINIMAL, &BuildOptions::default()).unwrap();
    assert_eq!(sim.net.component_count(), 3);
    assert_eq!(sim.net.link_count(), 2);
}

#[test]
fn width_mismatch_names_the_link() {
    let text = MINIMAL.replacen("data_bytes = 8\nid_bits = 2\nbase", "data_bytes = 16\nid_bits = 2\nbase", 1);
    let err = match load_topology(&text, &BuildOptions::default()) {
        Err(e) => e,
        Ok(_) => panic!("mismatched widths accepted"),
    };
    assert!(matches!(err, HarnessError::Netlist { .. }), "{err}");
    assert_eq!(err.path(), Some("link[1]"));
}

#[test]
fn unknown_component_names_the_link_end() {
    let text = MINIMAL.replace("to = \"mem\"", "to = \"memory\"");
    let err = load_topology(&text, &BuildOptions::default()).err().unwrap();
    assert_eq!(err.path(), Some("link[1].to"));
}

#[test]
fn idle_network_reports_zero_bandwidth() {
    let mut sim = load_topology(MINIMAL, &BuildOptions::default()).unwrap();
    let out = run(&mut sim, 500, 100);
    assert!(out.clean());
    assert_eq!(out.metrics.cycles, 500);
    assert_eq!(out.metrics.aggregate_bandwidth(), 0.0);
    for l in &out.metrics.links {
        assert_eq!(l.stats.beats, [0; 5], "{}", l.name);
    }
}

#[test]
fn random_traffic_is_clean_and_conserved() {
    let mut sim = load_topology(&format!("{MINIMAL}{TRAFFIC}"), &recording(3)).unwrap();
    let out = run(&mut sim, 5000, 2000);
    assert!(out.clean(), "{:?}", out.violations.first());
    let g = out.metrics.link("g.m0->wire.s0").unwrap();
    assert!(g.stats.beats[Chan::W.index()] > 0 && g.stats.beats[Chan::R.index()] > 0);
    for l in &out.metrics.links {
        assert!(l.conserved(), "{}", l.name);
    }
    let report = golden_memory_check(&sim).unwrap();
    assert!(report.read_bytes > 0 && report.final_bytes > 0);
}

fn csv(seed: u64) -> String {
    let mut sim = load_topology(&format!("{MINIMAL}{TRAFFIC}"), &BuildOptions { seed, ..Default::default() }).unwrap();
    let out = run(&mut sim, 3000, 2000);
    let mut buf = Vec::new();
    out.metrics.write_csv(&mut buf).unwrap();
    out.metrics.write_latency_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn same_seed_gives_identical_metrics() {
    assert_eq!(csv(7), csv(7));
    assert_ne!(csv(7), csv(8));
}

#[test]
fn flipped_bit_is_reported_at_its_address() {
    let mut sim = load_topology(&format!("{MINIMAL}{TRAFFIC}"), &recording(1)).unwrap();
    let out = run(&mut sim, 3000, 2000);
    assert!(out.clean());
    golden_memory_check(&sim).unwrap();
    let rec = sim.initiator("g").unwrap().records();
    let addr = rec
        .iter()
        .rev()
        .find(|r| r.cmd.dir == burstsim::protocol::Dir::Write)
        .map(|r| r.bytes[0].0)
        .unwrap();
    assert!(sim.flip_bit(addr, 5));
    let m = golden_memory_check(&sim).unwrap_err();
    assert_eq!(m.addr, addr);
    assert_eq!(m.expected ^ m.actual, 1 << 5);
}

const DMA: &str = r#"
[[component]]
type = "dma"
name = "dma"
data_bytes = 8
id_bits = 2

[[component]]
type = "memory"
name = "mem"
kind = "duplex"
data_bytes = 8
id_bits = 2
base = 0
size = 0x2000
init_pattern = 0x1234

[[link]]
from = "dma"
to = "mem"

[[traffic]]
kind = "trace_replay"
dma = "dma"
file = "jobs.csv"
"#;

#[test]
fn trace_replay_respects_dependencies() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("jobs.csv"),
        "cycle_offset,op,src,dst,len,dep_id\n0,copy,0x0,0x1000,256,\n5,copy,0x1000,0x1800,256,0\n0,compute,0,0,40,1\n",
    )
    .unwrap();
    let opts = BuildOptions {
        base_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let mut sim = load_topology(DMA, &opts).unwrap();
    let out = run(&mut sim, 3000, 1000);
    assert!(out.clean());
    let dma = sim.dma("dma").unwrap();
    let c = dma.completions();
    assert_eq!(c.len(), 3);
    assert!(c[1].start >= c[0].end + 5);
    assert!(c[2].start >= c[1].end && c[2].end - c[2].start == 40);
    for i in 0..256 {
        assert_eq!(sim.peek(0x1800 + i), Some(sim.init_byte(i)));
    }
    golden_memory_check(&sim).unwrap();
}

#[test]
fn trace_with_forward_dependency_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("jobs.csv"), "cycle_offset,op,src,dst,len,dep_id\n0,copy,0,0x1000,8,1\n0,copy,0,0x1000,8,\n").unwrap();
    let opts = BuildOptions {
        base_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let err = load_topology(DMA, &opts).err().unwrap();
    assert_eq!(err.path(), Some("traffic[0].file:2"), "{err}");
}

fn sim_cli(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("ok.toml"), format!("{MINIMAL}{TRAFFIC}")).unwrap();
    std::fs::write(p.join("bad.toml"), MINIMAL.replace("id_bits = 2\n\n[[component]]\ntype = \"cut\"", "id_bit = 2\n\n[[component]]\ntype = \"cut\"")).unwrap();
    let over = format!("{MINIMAL}{TRAFFIC}").replacen("to = \"wire\"", "to = \"wire\"\nbudget = [1, 1, 1]", 1);
    std::fs::write(p.join("over.toml"), over).unwrap();

    let out = sim_cli(&["run", "--config", "ok.toml", "--cycles", "2000", "--check", "--metrics-out", "m.csv", "--trace-out", "t.csv"], p);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("golden memory: pass"), "{stdout}");
    let metrics = std::fs::read_to_string(p.join("m.csv")).unwrap();
    assert!(metrics.starts_with("link,channel,beats,stall_cycles,util"));
    assert!(std::fs::read_to_string(p.join("m.latency.csv")).unwrap().starts_with("lat_bucket,count"));
    assert!(std::fs::read_to_string(p.join("t.csv")).unwrap().lines().count() > 2000);

    assert_eq!(sim_cli(&["validate", "--config", "ok.toml"], p).status.code(), Some(0));
    assert_eq!(sim_cli(&["validate", "--config", "bad.toml"], p).status.code(), Some(2));
    assert_eq!(sim_cli(&["run", "--config", "missing.toml"], p).status.code(), Some(2));
    assert_eq!(sim_cli(&["run", "--config", "over.toml", "--cycles", "500"], p).status.code(), Some(1));
    assert_eq!(sim_cli(&["run", "--config", "ok.toml", "--cycles", "500", "--watchdog", "1"], p).status.code(), Some(3));

    let out = sim_cli(&["sweep", "--config", "ok.toml", "--param", "component.mem.extra_latency=0,8", "--cycles", "1000"], p);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<String> = String::from_utf8_lossy(&out.stdout).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("8,"));
}

#[test]
fn shipped_example_round_trips() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/crossbar4x4.toml")).unwrap();
    let cfg = TopologyConfig::parse(&text).unwrap();
    assert_eq!(TopologyConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}
