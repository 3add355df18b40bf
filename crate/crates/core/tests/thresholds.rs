use ctm_core::corpus::{generate_random_program, GenLimits};
use ctm_core::harness::Verdict;
use ctm_core::{
    cross_validate, load_program, program_threshold, verify_unbounded, Checker, QeConfig, Strategy, VerifyConfig,
};

#[test]
fn strategies_agree_on_random_programs() {
    let mut extremal_sites = 0;
    for seed in 0..300 {
        let p = generate_random_program(seed, GenLimits::default());
        let Ok(e) = program_threshold(&p, Strategy::Elimination, &QeConfig::default()) else {
            continue;
        };
        let x = program_threshold(&p, Strategy::Extremal, &QeConfig::default()).unwrap();
        for (id, te) in &e.per_access {
            let tx = &x.per_access[id];
            if tx.method == Strategy::Extremal {
                extremal_sites += 1;
            }
            assert_eq!(te.unsafe_set, tx.unsafe_set, "seed {seed} site {id}\n{}", p.pretty());
        }
    }
    assert!(extremal_sites > 50, "closed form used on only {extremal_sites} sites");
}

#[test]
fn no_unsafe_size_beyond_a_clean_threshold_window() {
    for seed in 1000..1150 {
        let p = generate_random_program(seed, GenLimits::default());
        let r = cross_validate(&p, 150, &QeConfig::default());
        assert!(r.is_clean(), "seed {seed}: {r:?}\n{}", p.pretty());
    }
}

#[test]
fn verdicts_match_a_long_sweep() {
    for seed in 2000..2100 {
        let p = generate_random_program(seed, GenLimits::default());
        let v = verify_unbounded(&p, &VerifyConfig::default());
        let checker = Checker::new(&p);
        let first = (0..=200).find(|&n| !checker.unsafe_sites(n).is_empty());
        match v.verdict {
            Verdict::SafeForAllSizes { .. } => assert_eq!(first, None, "seed {seed}"),
            Verdict::Unsafe { witness, ct } => {
                assert_eq!(Some(witness.size), first, "seed {seed}");
                assert!(witness.size <= ct);
            }
            Verdict::Inconclusive { .. } => {}
        }
    }
}

#[test]
fn nested_triangular_overflow_starts_at_three() {
    let p = load_program("param n; array a[n]; for i in 0..n { for j in 0..i { a[i+j]; } }").unwrap();
    let t = program_threshold(&p, Strategy::Elimination, &QeConfig::default()).unwrap();
    let set = &t.per_access.values().next().unwrap().unsafe_set;
    for n in 0..60 {
        assert_eq!(set.contains(n), n >= 3, "n = {n}");
    }
}
