//! Property tests for the structural invariants.

use dpi_core::envs::{cartpole_step, CartpoleParams};
use dpi_core::harness::{read_csv, write_csv, IterationRow, RunRecord};
use dpi_core::mdp::{garnet_generate, TabularMdp, TabularPolicy};
use dpi_core::policy::GaussianPolicy;
use dpi_core::tabular::{binary_features, conservative_update, csoaa_fit, soft_value_iteration};
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn garnet_rows_stay_stochastic(
        seed in 0u64..500,
        states in 1usize..40,
        actions in 1usize..5,
    ) {
        let branches = 1 + (seed as usize % states.min(4));
        let mdp = garnet_generate(seed, states, actions, branches).unwrap();
        for s in 0..states {
            for a in 0..actions {
                let row = mdp.transition_row(s, a);
                prop_assert_eq!(row.len(), branches);
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|(_, p)| *p >= 0.0));
            }
        }
    }

    #[test]
    fn mdp_json_round_trip(seed in 0u64..200) {
        let mdp = garnet_generate(seed, 6, 3, 2).unwrap();
        let back = TabularMdp::from_json_str(&mdp.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(mdp.dense_transitions(), back.dense_transitions());
        prop_assert_eq!(mdp.costs(), back.costs());
    }

    #[test]
    fn conservative_update_keeps_tv_within_beta(
        seed in 0u64..200,
        beta in 0.0f64..=1.0,
    ) {
        let mut rng = dpi_core::seeding::master_rng(seed);
        let pi = TabularPolicy::random(12, 3, &mut rng);
        let states: Vec<usize> = (0..12).collect();
        let cost_vectors: Vec<Vec<f64>> = (0..12)
            .map(|s| (0..3).map(|a| ((s * 3 + a) as f64).sin()).collect())
            .collect();
        let clf = csoaa_fit(12, &states, &cost_vectors, 1e-6).unwrap();
        let next = conservative_update(&pi, &clf, beta).unwrap();
        for s in 0..12 {
            prop_assert!(next.tv_distance_at(&pi, s) <= beta + 1e-12);
            let sum: f64 = next.row(s).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn soft_vi_rows_are_distributions(seed in 0u64..100) {
        let mdp = garnet_generate(seed, 15, 3, 2).unwrap();
        let cost: Vec<f64> = mdp.costs().iter().map(|c| 2.0 * c - 1.0).collect();
        let (eta, _, _) = soft_value_iteration(&mdp, &cost, 0.9, 1e-8).unwrap();
        for s in 0..15 {
            let sum: f64 = eta.row(s).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(eta.row(s).iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn binary_feature_shape(state in 0usize..4096, extra in 1usize..64) {
        let num_states = state + extra;
        let phi = binary_features(state, num_states).unwrap();
        let bits = phi.len() - 1;
        prop_assert!(num_states <= (1usize << bits).max(2));
        prop_assert_eq!(*phi.last().unwrap(), 1.0);
        // decode back
        let decoded: usize = phi[..bits]
            .iter()
            .enumerate()
            .map(|(i, b)| (*b as usize) << i)
            .sum();
        prop_assert_eq!(decoded, state);
    }

    #[test]
    fn policy_checkpoint_round_trip(seed in 0u64..100, two_layer in any::<bool>()) {
        let base = if two_layer {
            GaussianPolicy::two_layer(3, 2, 5, -0.3, seed)
        } else {
            GaussianPolicy::linear(3, 2, -0.3)
        };
        let mut rng = dpi_core::seeding::master_rng(seed);
        let theta = DVector::from_fn(base.param_count(), |_, _| {
            use rand::Rng;
            rng.gen::<f64>() * 2.0 - 1.0
        });
        let pol = base.with_params(&theta).unwrap();
        let back = GaussianPolicy::from_json(&pol.to_json()).unwrap();
        prop_assert_eq!(pol.params(), back.params());
    }

    #[test]
    fn cartpole_step_finite_on_finite_inputs(
        x in -3.0f64..3.0,
        xd in -5.0f64..5.0,
        th in -3.0f64..3.0,
        thd in -8.0f64..8.0,
        force in -50.0f64..50.0,
    ) {
        let p = CartpoleParams::default();
        let next = cartpole_step(&p, &[x, xd, th, thd], force).unwrap();
        prop_assert!(next.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn run_record_csv_round_trip(seed in 0u64..100, rows in 1usize..12) {
        let mut rng = dpi_core::seeding::master_rng(seed);
        use rand::Rng;
        let mut rec = RunRecord::new(format!("m{}", seed % 3), seed);
        for i in 0..rows {
            rec.push(IterationRow {
                iteration: i,
                cumulative_episodes: (i + 1) * 7,
                j_pi: rng.gen::<f64>() * 100.0 - 50.0,
                j_pi_stderr: rng.gen::<f64>(),
                j_eta: if i % 4 == 3 { f64::NAN } else { rng.gen::<f64>() },
                kl_measured: rng.gen::<f64>() * 1e-3,
                mu: (rng.gen::<f64>() * 12.0 - 6.0).exp(),
                beta: 0.1,
                wall_ms: rng.gen::<f64>() * 1e3,
            }).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_csv(std::slice::from_ref(&rec), &path).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert!(back[0].content_equals(&rec));
    }
}
