//! Slit screen: oracle intensity profile for one and two open slits, and the
//! engine's selection frequencies in both lottery modes.
//!
//! cargo run --release --example double_slit -- [trials] [seed]

use talksim::experiments::{interference_profile, InterferenceProfile};
use talksim::lattice::SlitGrid;
use talksim::{LotteryMode, ProtocolConfig};

fn print_profile(title: &str, profile: &InterferenceProfile) {
    let peak = profile.peak();
    println!("{title}");
    println!(
        "{:>5} {:>8} {:>10} {:>9}  bar",
        "index", "y", "intensity", "freq"
    );
    for i in 0..profile.detectors.len() {
        let bar = "#".repeat((40.0 * profile.oracle_intensity[i] / peak).round() as usize);
        println!(
            "{i:>5} {:>8.2} {:>10.2} {:>9.4}  {bar}",
            profile.positions[i], profile.oracle_intensity[i], profile.empirical_frequency[i]
        );
    }
    let minima = profile.interior_minima();
    let deepest = minima
        .iter()
        .map(|&i| profile.oracle_intensity[i] / peak)
        .fold(f64::INFINITY, f64::min);
    println!("interior minima at {minima:?}, deepest at {deepest:.3} of peak\n");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: u64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(100_000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);

    for mode in [LotteryMode::Aggregate, LotteryMode::Naive] {
        let config = ProtocolConfig::with_mode(mode);
        let (profile, ensemble) =
            interference_profile(&SlitGrid::double_slit(), config, trials, seed)?;
        print_profile(&format!("two slits, {mode} lotteries"), &profile);
        println!(
            "tv distance to Born: {:.4}, chi-square {:.1} on {} dof\n",
            ensemble.tv_distance, ensemble.chi_square.statistic, ensemble.chi_square.dof
        );
    }

    let config = ProtocolConfig::default();
    let (profile, _) = interference_profile(&SlitGrid::single_slit(), config, trials / 10, seed)?;
    print_profile("one slit", &profile);
    Ok(())
}
