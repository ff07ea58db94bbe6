//! Nested lotteries on a merge tree: the exact selection law of each lottery
//! mode, from enumerating every outcome sequence, next to the Born rule.
//!
//! cargo run --example tree_lottery

use talksim::experiments::compare_modes;
use talksim::lattice::{build_merge_tree, MergeTree};
use talksim::ProtocolConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use MergeTree::{Detector as D, Merge as M};
    let trees = [
        ("(D1 D2) D3", M(vec![M(vec![D(1.0), D(1.0)]), D(2.0)])),
        (
            "((D1 D2) D3) D4",
            M(vec![M(vec![M(vec![D(1.0), D(1.0)]), D(1.0)]), D(1.0)]),
        ),
        (
            "(D1 D2) (D3 D4)",
            M(vec![M(vec![D(3.0), D(0.5)]), M(vec![D(1.0), D(2.0)])]),
        ),
    ];
    for (name, tree) in trees {
        let lattice = build_merge_tree(&tree, 1.0)?;
        let cmp = compare_modes(&lattice, &ProtocolConfig::default(), 1_000_000)?;
        println!("{name}  intensities {:?}", tree.intensities());
        println!(
            "  {:>8} {:>9} {:>9} {:>9}",
            "detector", "born", "aggregate", "naive"
        );
        for (d, born) in &cmp.born {
            println!(
                "  {d:>8} {born:>9.4} {:>9.4} {:>9.4}",
                cmp.aggregate[d], cmp.naive[d]
            );
        }
        println!(
            "  tv to born: aggregate {:.2e}, naive {:.4}\n",
            cmp.aggregate_tv, cmp.naive_tv
        );
    }
    Ok(())
}
