use rand::Rng;
use timing_core::payoff::checks::sample_rule;
use timing_core::payoff::{bankrun_payoff, BankRunParams, FnPayoff, Liquidation};
use timing_core::seed::stream;
use timing_core::*;

fn lattice(k: usize, dt: f64) -> LatticeModel {
    build_lattice(&LatticeConfig::new(k, dt, 3.0, 1.0, 1.0)).unwrap()
}

/// Random CdfAtT payoff `a_k + c·B_t + d·m[0,t)` with a random kink.
fn random_payoff(rng: &mut impl Rng) -> PayoffSpec {
    let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = rng.random_range(-0.5..0.5);
    let d = rng.random_range(-1.0..1.0);
    let kink = rng.random_range(1.0..5.0);
    FnPayoff::new("random", MeasureMode::CdfAtT, PathMode::SpotAtT, 20.0, move |lat, b, _, m, k| {
        a[k] + c * lat.b_value(b, k) + d * m.before(k) + (lat.b_value(b, k) - kink).max(0.0)
    })
    .into_spec()
}

#[test]
fn snell_matches_brute_force_on_random_public_instances() {
    let mut rng = stream(2024, &[]);
    for inst in 0..24u64 {
        let k = 1 + (inst as usize % 4);
        let lat = lattice(k, 0.5);
        let public = InfoTree::public(&lat);
        let full = InfoTree::full(&lat);
        let f = if inst % 3 == 0 {
            let p = BankRunParams::new(
                rng.random_range(0.05..0.3),
                0.01,
                Liquidation::Linear { slope: rng.random_range(0.3..0.7), intercept: 0.0 },
            );
            bankrun_payoff(&p).unwrap()
        } else {
            random_payoff(&mut rng)
        };
        let mu = conditional_law(&sample_rule(&full, &mut rng), &lat);
        let snell = snell_solve(f.as_ref(), &mu, &public, &lat);
        let brute = brute_force_optimal(f.as_ref(), &mu, &public, &lat).unwrap();
        assert!((snell.value - brute.value).abs() <= 1e-9, "instance {inst}: {} vs {}", snell.value, brute.value);
        assert!(snell.rule_min.same_times(&brute.argmax_min, &lat), "instance {inst}: min rules differ");
        assert!(snell.rule_max.same_times(&brute.argmax_max, &lat), "instance {inst}: max rules differ");
        for rule in [&snell.rule_min, &snell.rule_max] {
            assert!((evaluate_j(f.as_ref(), &mu, rule, &lat) - snell.value).abs() <= 1e-9);
        }
    }
}

#[test]
fn signal_tree_without_noise_reproduces_public_solution() {
    let lat = lattice(6, 0.5);
    let p = BankRunParams::new(0.1, 0.025, Liquidation::Linear { slope: 0.5, intercept: 0.0 });
    let f = bankrun_payoff(&p).unwrap();
    let public = InfoTree::public(&lat);
    let signal = build_signal_tree(&lat, &SignalModel { sigma: 0.0 });
    let full = InfoTree::full(&lat);
    let mut rng = stream(5, &[]);
    for _ in 0..5 {
        let mu = conditional_law(&sample_rule(&full, &mut rng), &lat);
        let a = snell_solve(f.as_ref(), &mu, &public, &lat);
        let b = snell_solve(f.as_ref(), &mu, &signal, &lat);
        assert_eq!(a.value, b.value);
        assert_eq!(a.rule_min.decisions(), b.rule_min.decisions());
        assert_eq!(a.rule_max.decisions(), b.rule_max.decisions());
    }
    let a = solve_mfe(f.as_ref(), &public, &lat, 200).unwrap();
    let b = solve_mfe(f.as_ref(), &signal, &lat, 200).unwrap();
    assert_eq!(a.tau_star.decisions(), b.tau_star.decisions());
    assert_eq!(a.theta_star.decisions(), b.theta_star.decisions());
    assert_eq!(a.value_max, b.value_max);
}

#[test]
fn posterior_rows_sum_to_one() {
    let lat = build_lattice(&LatticeConfig::new(4, 1.0, 0.0, 1.0, 1.0)).unwrap();
    for sigma in [0.0, 0.5, 1.0, 2.0] {
        let tree = build_signal_tree(&lat, &SignalModel { sigma });
        for k in 0..=4 {
            for node in 0..tree.layer_size(k) {
                let post = tree.posterior(k, node);
                assert!((post.total() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn ambiguous_symbol_posterior_by_enumeration() {
    let lat = build_lattice(&LatticeConfig::new(2, 1.0, 0.0, 1.0, 1.0)).unwrap();
    let tree = build_signal_tree(&lat, &SignalModel { sigma: 1.0 });
    let zero = tree.alphabet().iter().position(|&x| x == 0.0).unwrap();
    let two = tree.alphabet().iter().position(|&x| x == 2.0).unwrap();
    let post = tree.posterior(1, tree.child(0, 0, zero));
    assert_eq!(post.prefixes.len(), 2);
    assert_eq!(post.weight(), 0.5);
    let mut pairs: Vec<(u32, u32)> = post.prefixes.clone();
    pairs.sort();
    assert_eq!(pairs, vec![(0, 1), (1, 0)]);

    // observing (0, +2): the second pair must be (up, up)
    let node = tree.child(1, tree.child(0, 0, zero), two);
    let post = tree.posterior(2, node);
    let mut expected = Vec::new();
    for b in 0..4u32 {
        for w in 0..4u32 {
            let dx = |j: usize| (2.0 * ((b >> j) & 1) as f64 - 1.0) + (2.0 * ((w >> j) & 1) as f64 - 1.0);
            if dx(0) == 0.0 && dx(1) == 2.0 {
                expected.push((b, w));
            }
        }
    }
    let mut got = post.prefixes.clone();
    got.sort();
    assert_eq!(got, expected);
    assert_eq!(post.evidence(), 2.0 / 16.0);
}

#[test]
fn richer_information_never_lowers_the_value() {
    let lat = build_lattice(&LatticeConfig::new(5, 0.5, 0.0, 1.0, 1.0)).unwrap();
    let mut rng = stream(11, &[]);
    let full = InfoTree::full(&lat);
    let signal = build_signal_tree(&lat, &SignalModel { sigma: 1.0 });
    let public = InfoTree::public(&lat);
    let payoffs = [
        // reads the private noise only
        FnPayoff::new("w_kink", MeasureMode::CdfAtT, PathMode::SpotAtT, 10.0, |lat, _, w, _, k| {
            (lat.w_value(w, k) - 0.5).max(0.0) - 0.1 * k as f64
        })
        .into_spec(),
        FnPayoff::new("signal_put", MeasureMode::CdfAtT, PathMode::SpotAtT, 10.0, |lat, b, w, m, k| {
            (1.0 - lat.b_value(b, k) - lat.w_value(w, k)).max(0.0) * (1.0 - 0.5 * m.before(k))
        })
        .into_spec(),
    ];
    for f in &payoffs {
        for _ in 0..4 {
            let mu = conditional_law(&sample_rule(&full, &mut rng), &lat);
            let v_full = snell_solve(f.as_ref(), &mu, &full, &lat).value;
            let v_sig = snell_solve(f.as_ref(), &mu, &signal, &lat).value;
            let v_pub = snell_solve(f.as_ref(), &mu, &public, &lat).value;
            assert!(v_full >= v_sig - 1e-9 && v_sig >= v_pub - 1e-9, "{v_full} {v_sig} {v_pub}");
        }
    }
}

#[test]
fn public_bank_run_pipeline_closes() {
    let lat = lattice(6, 0.4);
    let p = BankRunParams::new(0.1, 0.025, Liquidation::Linear { slope: 0.5, intercept: 0.0 });
    let f = bankrun_payoff(&p).unwrap();
    let tree = InfoTree::public(&lat);
    let eq = solve_mfe(f.as_ref(), &tree, &lat, mfe::default_max_iter(&tree)).unwrap();
    assert!(eq.converged && eq.bracket_ok);
    let hit = public_info_equilibrium(&p, &lat).unwrap();
    assert_eq!(eq.tau_star, hit);
    for rule in [&eq.tau_star, &eq.theta_star] {
        let check = verify_mfe(f.as_ref(), rule, &tree, &lat);
        assert!(check.is_mfe, "gap {}", check.gap);
    }
    // everyone runs at the hitting time and is fully repaid
    let mut expected = 0.0;
    for b in 0..lat.num_paths() as u32 {
        let k = hit.stop_index(b, 0);
        expected += (p.spread() * lat.time(k)).exp();
    }
    expected /= lat.num_paths() as f64;
    assert!((eq.value_max - expected).abs() <= 1e-9);
}
