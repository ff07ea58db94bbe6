//! Randomized invariants over generated lattices.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use talksim::engine::{RibMark, DEFAULT_PATH_BUDGET};
use talksim::experiments::{run_ensemble, run_ensemble_with_jobs, tv_distance};
use talksim::lattice::random::{random_lattice, RandomLatticeSpec};
use talksim::lattice::{load_topology, to_topology_document};
use talksim::oracle;
use talksim::{Admissibility, Lattice, LotteryMode, Protocol, ProtocolConfig};

fn lattice(seed: u64, max_nodes: usize) -> Lattice {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomLatticeSpec::sized(&mut rng, max_nodes);
    random_lattice(&mut rng, &spec)
}

fn bright(p: &Protocol) -> bool {
    p.records().iter().any(|r| r.intensity > 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn amplitudes_match_path_sum(seed in any::<u64>()) {
        let l = lattice(seed, 120);
        let p = Protocol::prepare(&l, ProtocolConfig::default()).unwrap();
        let want = oracle::amplitudes(&l, Admissibility::ForwardDag, DEFAULT_PATH_BUDGET).unwrap();
        for r in p.records() {
            prop_assert!((r.amplitude - want[&r.detector]).norm() < 1e-9);
            prop_assert!((r.intensity - r.amplitude.norm_sqr()).abs() < 1e-9);
        }
    }

    #[test]
    fn bounded_hops_match_path_sum(seed in any::<u64>(), hops in 1usize..7) {
        let l = lattice(seed, 30);
        let config = ProtocolConfig { admissibility: Admissibility::MaxHops(hops), ..ProtocolConfig::default() };
        let p = Protocol::prepare(&l, config).unwrap();
        let want = oracle::amplitudes(&l, config.admissibility, DEFAULT_PATH_BUDGET).unwrap();
        for r in p.records() {
            prop_assert!((r.amplitude - want[&r.detector]).norm() < 1e-9);
        }
    }

    #[test]
    fn every_trial_leaves_one_confirmed_path(seed in any::<u64>(), trial in 0u64..1000, naive in any::<bool>()) {
        let l = lattice(seed, 100);
        let mode = if naive { LotteryMode::Naive } else { LotteryMode::Aggregate };
        let p = Protocol::prepare(&l, ProtocolConfig::with_mode(mode)).unwrap();
        prop_assume!(bright(&p));
        let o = p.run_trial(seed, trial).unwrap();
        let confirmed = o.ribs.iter().filter(|m| **m == RibMark::Confirmed).count();
        prop_assert_eq!(confirmed + 1, o.surviving_path.len());
        prop_assert!(o.ribs.iter().all(|m| matches!(m, RibMark::Void | RibMark::Confirmed)));
        prop_assert_eq!(o.surviving_path[0], l.source());
        prop_assert_eq!(*o.surviving_path.last().unwrap(), o.winner);
        prop_assert!(o.intensities[&o.winner] > 1e-12);
        for pair in o.surviving_path.windows(2) {
            let rib = l.find_rib(pair[0], pair[1]).unwrap();
            prop_assert_eq!(&o.ribs[rib.0], &RibMark::Confirmed);
        }
    }

    #[test]
    fn topology_documents_round_trip(seed in any::<u64>()) {
        let l = lattice(seed, 60);
        let text = to_topology_document(&l);
        prop_assert_eq!(load_topology(&text).unwrap(), l);
    }

    #[test]
    fn tv_is_a_metric(a in proptest::collection::vec(0.01f64..1.0, 4), b in proptest::collection::vec(0.01f64..1.0, 4)) {
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().enumerate().map(|(i, x)| (talksim::NodeId(i), x / s)).collect::<std::collections::BTreeMap<_, _>>()
        };
        let (p, q) = (norm(&a), norm(&b));
        let d = tv_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ensembles_ignore_thread_count(seed in any::<u64>(), master in any::<u64>()) {
        let l = lattice(seed, 60);
        let p = Protocol::prepare(&l, ProtocolConfig::default()).unwrap();
        prop_assume!(bright(&p));
        let one = run_ensemble_with_jobs(&l, ProtocolConfig::default(), 400, master, 1).unwrap();
        let four = run_ensemble_with_jobs(&l, ProtocolConfig::default(), 400, master, 4).unwrap();
        prop_assert_eq!(&one, &four);
        prop_assert_eq!(one.counts.values().sum::<u64>(), 400);
        prop_assert!((one.empirical.values().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(&run_ensemble(&l, ProtocolConfig::default(), 400, master).unwrap(), &one);
    }
}
