use proptest::prelude::*;
use tlc_core::allocation::{allocate, grid_allocation, AllocationProblem, Municipality};
use tlc_core::mechanism::{tlc_policy_linear, MechanismParams};

fn municipality() -> impl Strategy<Value = Municipality> {
    (0.5..2.0f64, 0.5..2.0f64, 0.0..1.0f64, 0.0..0.5f64, 0.1..2.0f64, 0.0..1.0f64).prop_map(
        |(omega_b, c, omega_t, threshold, b_bar, u)| {
            let params = MechanismParams::new(omega_b, c, omega_t, threshold, b_bar, 3.0).unwrap();
            Municipality { params, theta: 3.0 * u }
        },
    )
}

fn problem(max: usize) -> impl Strategy<Value = AllocationProblem> {
    (prop::collection::vec(municipality(), 1..=max), 0.0..4.0f64)
        .prop_map(|(municipalities, budget)| AllocationProblem { municipalities, budget })
}

proptest! {
    #[test]
    fn feasible_and_complementary(p in problem(8)) {
        let r = allocate(&p).unwrap();
        prop_assert!(r.lambda_b >= 0.0);
        prop_assert!(r.total() <= p.budget + 1e-8);
        prop_assert!(r.lambda_b * (p.budget - r.total()) <= 1e-8);
        for (m, &b) in p.municipalities.iter().zip(&r.bailouts) {
            prop_assert!(b >= 0.0 && b <= m.params.b_bar);
            // Each allocation is the municipality's own schedule at omega_t + lambda_b.
            let priced = tlc_policy_linear(m.theta, &m.params.with_omega_t(m.params.omega_t + r.lambda_b)).unwrap();
            prop_assert_eq!(b, priced);
            prop_assert!(b <= tlc_policy_linear(m.theta, &m.params).unwrap());
        }
    }

    #[test]
    fn more_budget_never_hurts(p in problem(6), extra in 0.0..2.0f64) {
        let base = allocate(&p).unwrap();
        let richer = allocate(&AllocationProblem { budget: p.budget + extra, ..p.clone() }).unwrap();
        prop_assert!(richer.lambda_b <= base.lambda_b + 1e-12);
        for (a, b) in base.bailouts.iter().zip(&richer.bailouts) {
            prop_assert!(b + 1e-9 >= *a);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_grid_oracle(p in problem(3)) {
        let r = allocate(&p).unwrap();
        let points = 121;
        let grid = grid_allocation(&p, points).unwrap();
        let objective = |b: &[f64]| -> f64 {
            p.municipalities.iter().zip(b).map(|(m, &b)| {
                let q = &m.params;
                q.omega_b * m.theta * b - q.omega_t * b - 0.5 * q.c * b * b
            }).sum()
        };
        // The exact allocation is at least as good as any feasible grid point,
        // and the grid optimum is within one cell of it in value.
        prop_assert!(objective(&r.bailouts) >= objective(&grid) - 1e-9);
        let cell = p.municipalities.iter().map(|m| m.params.b_bar / (points - 1) as f64).fold(0.0, f64::max);
        let lipschitz: f64 = p.municipalities.iter().map(|m| {
            let q = &m.params;
            (q.omega_b * m.theta).abs() + q.omega_t + q.c * q.b_bar
        }).sum();
        prop_assert!(objective(&r.bailouts) - objective(&grid) <= lipschitz * cell * 3.0 + 1e-9);
    }
}
