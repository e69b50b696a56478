use std::path::PathBuf;

use burstsim_harness::presets::{self, ManticoreParams, BENCHES};
use burstsim_harness::config::MemKind;
use burstsim_harness::{BuildOptions, TopologyConfig};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// Regenerate with `BLESS=1 cargo test -p burstsim-harness --test presets`.
fn check_shipped(name: &str, cfg: &TopologyConfig) {
    let path = shipped(name);
    let text = cfg.to_toml();
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let on_disk = std::fs::read_to_string(&path).unwrap();
    assert_eq!(TopologyConfig::parse(&on_disk).unwrap(), *cfg, "{name} is stale");
}

#[test]
fn shipped_configs_match_generators() {
    check_shipped("manticore_mini.toml", &presets::manticore_mini(&ManticoreParams::default()));
    check_shipped("crossbar4x4.toml", &presets::crossbar(4, 8, [true; 5], MemKind::Duplex));
    check_shipped("llc.toml", &presets::bench("llc").unwrap());
}

#[test]
fn manticore_loads_with_two_link_widths() {
    let text = std::fs::read_to_string(shipped("manticore_mini.toml")).unwrap();
    let sim = burstsim_harness::load_topology(&text, &BuildOptions::default()).unwrap();
    let net = &sim.net;
    assert_eq!(sim.dmas.len(), 32);
    assert_eq!(sim.generators.len(), 32);
    for l in 0..net.link_count() {
        let l = burstsim::kernel::LinkId(l);
        let name = net.link_name(l);
        let d = net.link_spec(l).data_bytes;
        if name.starts_with("dma.") || name.contains(".dma") {
            assert_eq!(d, 64, "{name}");
        } else if name.starts_with("core.") || name.contains(".core") {
            assert_eq!(d, 8, "{name}");
        }
    }
}

#[test]
fn benches_build() {
    for k in BENCHES {
        let cfg = presets::bench(k).unwrap();
        cfg.build(&BuildOptions::default()).unwrap_or_else(|e| panic!("{k}: {e}"));
    }
}
