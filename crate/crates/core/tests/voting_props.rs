use proptest::prelude::*;
use tlc_core::voting::{
    aggregate_support, bundle_check, consent_cap_analytic, empirical_cap, FiniteLegislature, Levers, ThresholdDist,
    WeightProfile,
};

fn legislature() -> impl Strategy<Value = (f64, Vec<f64>)> {
    // Thresholds on a coarse lattice so that ties occur often.
    (0.1..1.0f64, prop::collection::vec((0u32..20).prop_map(|k| k as f64 * 0.05), 1..12))
}

proptest! {
    #[test]
    fn quota_test_matches_cap((w_b, xs) in legislature(), tau_frac in 0.0..1.2f64, theta in 0.0..3.0f64, bs in prop::collection::vec(0.0..3.0f64, 20)) {
        let leg = FiniteLegislature::two_bloc(w_b, &xs).unwrap();
        let tau = tau_frac * w_b;
        let cap = empirical_cap(theta, &leg, tau);
        for b in bs.into_iter().chain([cap, 0.0]) {
            let passes = aggregate_support(b, theta, &leg) >= tau;
            if b > 0.0 || cap > 0.0 {
                prop_assert_eq!(passes, b <= cap, "b = {}, cap = {}", b, cap);
            }
        }
    }

    #[test]
    fn support_is_non_increasing_in_b((w_b, xs) in legislature(), theta in 0.0..3.0f64, a in 0.0..3.0f64, d in 0.0..1.0f64) {
        let leg = FiniteLegislature::two_bloc(w_b, &xs).unwrap();
        prop_assert!(aggregate_support(a + d, theta, &leg) <= aggregate_support(a, theta, &leg));
        prop_assert!(aggregate_support(a, theta, &leg) <= w_b + 1e-12);
    }

    #[test]
    fn analytic_cap_matches_equal_weight_atoms(
        xs in (0u32..4).prop_flat_map(|e| prop::collection::vec((1u32..20).prop_map(|k| k as f64 * 0.05), 1usize << e)),
        w_b in (1u32..=4).prop_map(|k| k as f64 * 0.25),
        k in 1usize..=8,
        theta in 0.1..2.0f64,
    ) {
        // Equal dyadic weights keep every partial sum exact, and tau sits on the
        // atom lattice to exercise the tie convention.
        let m = xs.len();
        let k = k.min(m);
        let tau = w_b * k as f64 / m as f64;
        let leg = FiniteLegislature::two_bloc(w_b, &xs).unwrap();
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        for x in sorted {
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += 1.0 / m as f64,
                _ => atoms.push((x, 1.0 / m as f64)),
            }
        }
        let profile = WeightProfile { w_b, tau, h: ThresholdDist::discrete(atoms).unwrap(), threshold: theta };
        let analytic = consent_cap_analytic(&profile).unwrap();
        let scanned = empirical_cap(theta, &leg, tau);
        prop_assert!((analytic - scanned).abs() <= 1e-9 * theta.max(1.0), "{} vs {}", analytic, scanned);
    }

    #[test]
    fn analytic_cap_is_monotone_in_quota(w_b in 0.1..1.0f64, t1 in 0.0..1.0f64, t2 in 0.0..1.0f64, lo in 0.0..1.0f64, width in 0.1..2.0f64) {
        let h = ThresholdDist::Uniform { lo, hi: lo + width };
        let cap = |tau: f64| consent_cap_analytic(&WeightProfile { w_b, tau, h: h.clone(), threshold: 1.0 }).unwrap();
        let (a, b) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(cap(a) >= cap(b));
        if w_b < 0.99 {
            prop_assert_eq!(cap(w_b * 1.01), 0.0);
        }
    }

    #[test]
    fn bundle_forbids_raising_both(w0 in 0.0..2.0f64, b0 in 0.0..2.0f64, dw in -1.0..1.0f64, db in -1.0..1.0f64) {
        let before = Levers { omega_t: w0, b_bar: b0 };
        let after = Levers { omega_t: w0 + dw, b_bar: b0 + db };
        let ok = bundle_check(before, after);
        if dw >= 0.0 && db > 0.0 {
            prop_assert!(!ok);
        }
        if dw < 0.0 || db <= 0.0 {
            prop_assert!(ok);
        }
    }
}
