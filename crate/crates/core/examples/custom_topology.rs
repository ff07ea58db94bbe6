//! Loads a topology document, runs an ensemble on it and logs one trial.
//! The bundled document has two query routes that merge twice, so the
//! aggregate lotteries drift away from the Born rule; the brute-force
//! selection law is printed for comparison.
//!
//! cargo run --release --example custom_topology -- [path.toml] [trials]

use talksim::experiments::{compare_modes, run_ensemble};
use talksim::lattice::load_topology;
use talksim::{Protocol, ProtocolConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/examples/data/shared_merge.toml"
        )
        .into()
    });
    let trials: u64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(100_000);

    let lattice = load_topology(&std::fs::read_to_string(&path)?)?;
    println!(
        "{path}: {} nodes, {} ribs, {} detectors, wavelength {}",
        lattice.nodes().len(),
        lattice.ribs().len(),
        lattice.detectors().len(),
        lattice.wavelength()
    );

    let config = ProtocolConfig::default();
    let protocol = Protocol::prepare_logged(&lattice, config)?;
    let (outcome, events) = protocol.run_trial_logged(1, 0)?;
    println!("\ntrial 0 ({} signals):", events.len());
    for e in &events {
        println!("  {e}");
    }
    println!(
        "winner {} via {:?}\n",
        outcome.winner, outcome.surviving_path
    );

    let r = run_ensemble(&lattice, config, trials, 1)?;
    let exact = compare_modes(&lattice, &config, 1_000_000)?;
    println!(
        "{:>8} {:>9} {:>9} {:>9}",
        "detector", "freq", "exact", "born"
    );
    for (d, f) in &r.empirical {
        println!(
            "{d:>8} {f:>9.4} {:>9.4} {:>9.4}",
            exact.aggregate[d], exact.born[d]
        );
    }
    println!("tv to born {:.4}", r.tv_distance);
    Ok(())
}
