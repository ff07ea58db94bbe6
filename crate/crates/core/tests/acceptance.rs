//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use talksim::chronometry::{dilation_time, queue_clock_count, simulate_queue_clock, ClockScenario};
use talksim::engine::{RibMark, DEFAULT_PATH_BUDGET};
use talksim::experiments::{chi_square_critical, interference_profile, run_ensemble, tv_distance};
use talksim::lattice::random::{random_lattice, RandomLatticeSpec};
use talksim::lattice::{
    arm_lengths_for_intensity, build_interferometric_star, build_merge_tree, build_two_path,
    MergeTree, SlitGrid,
};
use talksim::oracle::{self, born_from_intensities};
use talksim::{Admissibility, Lattice, LotteryMode, Protocol, ProtocolConfig, TrialOutcome};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(verdict: Verdict, elapsed: Duration, limit: Duration) -> Verdict {
    let detail = |d: String| {
        format!(
            "{d}; {:.2}s (limit {}s)",
            elapsed.as_secs_f64(),
            limit.as_secs()
        )
    };
    match verdict {
        Ok(d) if elapsed <= limit => Ok(detail(d)),
        Ok(d) | Err(d) => Err(detail(d)),
    }
}

fn timed(limit_secs: u64, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let verdict = f();
    within_time(verdict, start.elapsed(), Duration::from_secs(limit_secs))
}

fn two_path_interference() -> Verdict {
    timed(1, || {
        let intensity = |len_b: f64| -> f64 {
            let l = build_two_path(2.0, len_b, 2, 1.0).unwrap();
            Protocol::prepare(&l, ProtocolConfig::default())
                .unwrap()
                .records()[0]
                .intensity
        };
        let (bright, dark) = (intensity(2.0), intensity(2.5));
        ensure(
            (bright - 4.0).abs() <= 1e-9 && dark <= 1e-18,
            format!("I(2.0, 2.0) = {bright}, I(2.0, 2.5) = {dark:e}"),
        )
    })
}

fn amplitude_equivalence() -> Verdict {
    timed(10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst = 0.0f64;
        let mut detectors = 0;
        let mut largest = 0;
        for _ in 0..20 {
            let spec = RandomLatticeSpec::sized(&mut rng, 200);
            let l = random_lattice(&mut rng, &spec);
            largest = largest.max(l.nodes().len());
            let p = Protocol::prepare(&l, ProtocolConfig::default()).map_err(|e| e.to_string())?;
            let want = oracle::amplitudes(&l, Admissibility::ForwardDag, DEFAULT_PATH_BUDGET)
                .map_err(|e| e.to_string())?;
            for r in p.records() {
                let w = want[&r.detector];
                worst = worst
                    .max((r.amplitude.re - w.re).abs())
                    .max((r.amplitude.im - w.im).abs());
                detectors += 1;
            }
        }
        ensure(
            worst <= 1e-9 && largest <= 200,
            format!("{detectors} detectors on 20 lattices (largest {largest} nodes), worst component error {worst:e}"),
        )
    })
}

fn star_born() -> Verdict {
    timed(30, || {
        let arms: Vec<_> = [1.0, 1.0, 2.0]
            .iter()
            .map(|&i| arm_lengths_for_intensity(i, 1.0).unwrap())
            .collect();
        let l = build_interferometric_star(&arms, 2, 1.0).unwrap();
        let r =
            run_ensemble(&l, ProtocolConfig::default(), 200_000, 42).map_err(|e| e.to_string())?;
        let want = [0.25, 0.25, 0.5];
        let freqs: Vec<f64> = r.empirical.values().copied().collect();
        let worst = freqs
            .iter()
            .zip(want)
            .map(|(f, w)| (f - w).abs())
            .fold(0.0, f64::max);
        let critical = chi_square_critical(2, 0.99).unwrap();
        ensure(
            worst <= 0.005 && r.chi_square.dof == 2 && r.chi_square.statistic < critical,
            format!(
                "frequencies {freqs:.4?}, max deviation {worst:.4}, chi-square {:.3} < {critical:.3}",
                r.chi_square.statistic
            ),
        )
    })
}

/// Rooted trees whose inner nodes have at least two children, up to four
/// leaves. The root is the source.
fn tree_shapes() -> Vec<MergeTree> {
    use MergeTree::{Detector as D, Merge as M};
    let d = || D(0.0);
    vec![
        M(vec![d()]),
        M(vec![d(), d()]),
        M(vec![d(), d(), d()]),
        M(vec![M(vec![d(), d()]), d()]),
        M(vec![d(), d(), d(), d()]),
        M(vec![M(vec![d(), d()]), d(), d()]),
        M(vec![M(vec![d(), d()]), M(vec![d(), d()])]),
        M(vec![M(vec![d(), d(), d()]), d()]),
        M(vec![M(vec![M(vec![d(), d()]), d()]), d()]),
    ]
}

fn with_intensities(tree: &MergeTree, values: &mut impl Iterator<Item = f64>) -> MergeTree {
    match tree {
        MergeTree::Detector(_) => MergeTree::Detector(values.next().unwrap()),
        MergeTree::Merge(children) => MergeTree::Merge(
            children
                .iter()
                .map(|c| with_intensities(c, values))
                .collect(),
        ),
    }
}

fn tree_born_exactness() -> Verdict {
    let assignments: [[f64; 4]; 3] = [
        [1.0, 2.0, 3.0, 0.5],
        [3.5, 0.25, 1.0, 2.0],
        [1.0, 1.0, 1.0, 1.0],
    ];
    let mut worst_exact = 0.0f64;
    let mut worst_tv = 0.0f64;
    let mut naive = Vec::new();
    let mut instances = 0;
    for (s, shape) in tree_shapes().iter().enumerate() {
        assert!(shape.leaves() <= 4 && shape.merge_nodes() <= 3);
        for (a, values) in assignments.iter().enumerate() {
            let tree = with_intensities(shape, &mut values.iter().copied());
            let l = build_merge_tree(&tree, 1.0).map_err(|e| e.to_string())?;
            let amplitudes = oracle::amplitudes(&l, Admissibility::ForwardDag, DEFAULT_PATH_BUDGET)
                .map_err(|e| e.to_string())?;
            let intensities: BTreeMap<_, _> =
                amplitudes.iter().map(|(&d, a)| (d, a.norm_sqr())).collect();
            let born = born_from_intensities(&intensities)
                .map_err(|e| e.to_string())?
                .entries;
            let exact = |mode| {
                oracle::exact_selection(
                    &l,
                    mode,
                    Admissibility::ForwardDag,
                    DEFAULT_PATH_BUDGET,
                    1e-12,
                    1_000_000,
                )
                .map_err(|e| e.to_string())
            };
            let aggregate = exact(LotteryMode::Aggregate)?;
            for (d, p) in &born {
                worst_exact = worst_exact.max((aggregate[d] - p).abs());
            }
            let naive_exact = exact(LotteryMode::Naive)?;
            naive.push((s, a, tv_distance(&naive_exact, &born).unwrap()));

            let seed = 100 + instances as u64;
            let r = run_ensemble(&l, ProtocolConfig::default(), 100_000, seed)
                .map_err(|e| e.to_string())?;
            worst_tv = worst_tv.max(r.tv_distance);
            instances += 1;
        }
    }
    let (s, a, naive_worst) =
        naive
            .iter()
            .copied()
            .fold((0, 0, 0.0), |best, x| if x.2 > best.2 { x } else { best });
    let naive_nonzero = naive.iter().filter(|x| x.2 > 1e-12).count();
    ensure(
        worst_exact <= 1e-12 && worst_tv <= 0.01,
        format!(
            "{instances} instances: exact aggregate vs Born max error {worst_exact:e}, \
             Monte-Carlo max tv {worst_tv:.4}; naive deviates on {naive_nonzero} instances, \
             worst tv {naive_worst:.4} (shape {s}, assignment {a})"
        ),
    )
}

fn double_slit() -> Verdict {
    timed(60, || {
        let config = ProtocolConfig::default();
        let (two, ensemble) = interference_profile(&SlitGrid::double_slit(), config, 100_000, 42)
            .map_err(|e| e.to_string())?;
        let (one, _) = interference_profile(&SlitGrid::single_slit(), config, 1, 42)
            .map_err(|e| e.to_string())?;
        let minima = two.interior_minima();
        let deep_one_slit: Vec<_> = one
            .interior_minima()
            .into_iter()
            .filter(|&i| one.oracle_intensity[i] < 0.1 * one.peak())
            .collect();
        ensure(
            !minima.is_empty() && deep_one_slit.is_empty() && ensemble.tv_distance <= 0.02,
            format!(
                "two-slit interior minima {minima:?}; one-slit minima below 10% of peak {deep_one_slit:?}; \
                 aggregate tv {:.4} (limit 0.02)",
                ensemble.tv_distance
            ),
        )
    })
}

/// Independent check: the confirmed ribs, walked from the source, trace one
/// simple path to the winner and use up every confirmed rib.
fn confirmed_path_ok(l: &Lattice, o: &TrialOutcome) -> bool {
    if o.ribs.len() != l.ribs().len()
        || o.ribs
            .iter()
            .any(|m| !matches!(m, RibMark::Void | RibMark::Confirmed))
    {
        return false;
    }
    let confirmed: BTreeSet<usize> = (0..o.ribs.len())
        .filter(|&i| o.ribs[i] == RibMark::Confirmed)
        .collect();
    let mut used = BTreeSet::new();
    let mut seen = BTreeSet::from([l.source()]);
    let mut walk = vec![l.source()];
    let mut at = l.source();
    loop {
        let next: Vec<usize> = confirmed
            .iter()
            .copied()
            .filter(|&i| !used.contains(&i) && l.ribs()[i].touches(at))
            .collect();
        match next.as_slice() {
            [] => break,
            [i] => {
                used.insert(*i);
                at = l.ribs()[*i].other(at);
                if !seen.insert(at) {
                    return false;
                }
                walk.push(at);
            }
            _ => return false,
        }
    }
    at == o.winner && used == confirmed && walk == o.surviving_path
}

fn winner_path_invariant() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut trials, mut bad, mut lattices) = (0, 0, 0);
    while trials < 1000 {
        let spec = RandomLatticeSpec::sized(&mut rng, 120);
        let l = random_lattice(&mut rng, &spec);
        let mode = if lattices % 2 == 0 {
            LotteryMode::Aggregate
        } else {
            LotteryMode::Naive
        };
        lattices += 1;
        let p =
            Protocol::prepare(&l, ProtocolConfig::with_mode(mode)).map_err(|e| e.to_string())?;
        if p.records().iter().all(|r| r.intensity <= 1e-12) {
            continue;
        }
        for i in 0..10 {
            let o = p.run_trial(lattices, i).map_err(|e| e.to_string())?;
            bad += usize::from(!confirmed_path_ok(&l, &o));
            trials += 1;
        }
    }
    ensure(
        bad == 0,
        format!("{trials} trials on {lattices} lattices, {bad} violations"),
    )
}

fn queue_clock() -> Verdict {
    let mut rows = Vec::new();
    let mut ok = true;
    for (m, want) in [(1, [5, 10, 20]), (2, [3, 5, 10])] {
        for (d, w) in [5, 10, 20].into_iter().zip(want) {
            let s = ClockScenario::new(d, 1, m).unwrap();
            let closed = queue_clock_count(&s).laser_count;
            let simulated = simulate_queue_clock(&s)
                .map_err(|e| e.to_string())?
                .reading
                .laser_count;
            ok &= closed == w && simulated == w;
            rows.push(format!("m={m} d_S={d}: {simulated}"));
        }
    }
    ensure(ok, rows.join(", "))
}

fn dilation() -> Verdict {
    let cases = [(1.0, 0.0, 1.0), (1.0, 0.6, 1.25), (2.0, 0.8, 10.0 / 3.0)];
    let mut worst_case = 0.0f64;
    for (tau, v, want) in cases {
        worst_case = worst_case.max((dilation_time(tau, v).unwrap() - want).abs());
    }
    let mut worst_identity = 0.0f64;
    for i in 0..100 {
        let v = 0.99 * i as f64 / 99.0;
        let t = dilation_time(1.0, v).unwrap();
        worst_identity = worst_identity.max((t * (1.0 - v * v).sqrt() - 1.0).abs());
    }
    ensure(
        worst_case <= 1e-12 && worst_identity <= 1e-12,
        format!("worst example error {worst_case:e}, worst identity error over 100 speeds {worst_identity:e}"),
    )
}

fn read_dir_sorted(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn parallel_invariance() -> Verdict {
    let runs: [&[&str]; 2] = [
        &[
            "--scenario",
            "star",
            "--intensities",
            "1,1,2",
            "--trials",
            "50000",
            "--seed",
            "42",
        ],
        &[
            "--scenario",
            "double-slit",
            "--trials",
            "20000",
            "--seed",
            "7",
            "--trace",
        ],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for jobs in ["1", "8"] {
            let out = root.path().join(format!("run{k}-jobs{jobs}"));
            let status = Command::new(env!("CARGO_BIN_EXE_talksim"))
                .args(*args)
                .args(["--jobs", jobs, "--tv-threshold", "1"])
                .arg("--out")
                .arg(&out)
                .stdout(Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!(
                    "talksim {args:?} --jobs {jobs} exited with {status}"
                ));
            }
            outputs.push(read_dir_sorted(&out));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("artifacts differ for {args:?}"));
        }
        compared += outputs[0].len();
    }
    ensure(
        compared >= 7,
        format!("{compared} artifacts byte-identical at --jobs 1 and --jobs 8"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("two-path interference", two_path_interference),
        ("engine/oracle amplitude equivalence", amplitude_equivalence),
        ("star Born frequencies", star_born),
        ("aggregate tree exactness", tree_born_exactness),
        ("double-slit fringes and Born agreement", double_slit),
        ("winner-path invariant", winner_path_invariant),
        ("queue-clock linearity", queue_clock),
        ("clock dilation", dilation),
        ("determinism across --jobs", parallel_invariance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
