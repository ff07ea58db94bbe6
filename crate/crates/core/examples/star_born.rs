//! Star whose arms are tuned to intensities 1, 1 and 2: selection frequencies
//! over many trials against the Born rule, in both lottery modes.
//!
//! cargo run --release --example star_born -- [trials] [seed]

use talksim::experiments::{chi_square_critical, run_ensemble};
use talksim::lattice::{arm_lengths_for_intensity, build_interferometric_star};
use talksim::{LotteryMode, ProtocolConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: u64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(200_000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);

    let arms = [1.0, 1.0, 2.0]
        .iter()
        .map(|&i| arm_lengths_for_intensity(i, 1.0))
        .collect::<Result<Vec<_>, _>>()?;
    let lattice = build_interferometric_star(&arms, 2, 1.0)?;

    for mode in [LotteryMode::Aggregate, LotteryMode::Naive] {
        let r = run_ensemble(&lattice, ProtocolConfig::with_mode(mode), trials, seed)?;
        println!("{mode} lotteries, {trials} trials, seed {seed}");
        for (d, count) in &r.counts {
            println!(
                "  {d}: {count:>7}  freq {:.4}  born {:.4}",
                r.empirical[d],
                r.reference.probability(*d)
            );
        }
        let critical = chi_square_critical(r.chi_square.dof, 0.99)?;
        println!(
            "  tv {:.5}, chi-square {:.3} (99% critical {critical:.3})\n",
            r.tv_distance, r.chi_square.statistic
        );
    }
    Ok(())
}
