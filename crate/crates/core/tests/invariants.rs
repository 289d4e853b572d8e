use markovcat::category::{MarkovCategory, Object, OutputPartition};
use markovcat::cli::json;
use markovcat::filtering::filter_instantiated;
use markovcat::finite::cardinality;
use markovcat::random::{self, Shape};
use markovcat::{finsetmulti, finstoch, gauss, FinSetMulti, FinStoch, Gauss};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

fn objects() -> impl Strategy<Value = Object> {
    prop::collection::vec(1usize..4, 0..3).prop_map(Object::new)
}

fn column_sums(k: &finstoch::StochasticKernel) -> Vec<f64> {
    (0..k.cols()).map(|a| k.column(a).iter().sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stochastic_kernels_stay_normalized(
        a in objects(), b in objects(), c in objects(), seed in any::<u64>(), sparsity in 0.0..0.7f64,
    ) {
        let cat = FinStoch::new();
        let mut rng = random::rng(seed);
        let f = finstoch::random_kernel(&a, &b, sparsity, &mut rng);
        let g = finstoch::random_kernel(&b, &c, sparsity, &mut rng);
        for k in [cat.compose(&f, &g).unwrap(), cat.tensor(&f, &g), cat.copy_then(&f, &g).unwrap()] {
            prop_assert!(k.values().iter().all(|&p| p >= 0.0));
            prop_assert!(column_sums(&k).iter().all(|s| (s - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn relations_stay_total(
        a in objects(), b in objects(), c in objects(), seed in any::<u64>(), density in 0.0..0.6f64,
    ) {
        let cat = FinSetMulti::new();
        let mut rng = random::rng(seed);
        let f = finsetmulti::random_kernel(&a, &b, density, &mut rng);
        let g = finsetmulti::random_kernel(&b, &c, density, &mut rng);
        for k in [cat.compose(&f, &g).unwrap(), cat.tensor(&f, &g)] {
            prop_assert!((0..k.cols()).all(|x| k.column(x).iter().any(|&m| m)));
        }
    }

    #[test]
    fn finite_joint_rebuilds_from_its_conditional(
        x in 1usize..5, y in 1usize..5, seed in any::<u64>(), sparsity in 0.0..0.7f64,
    ) {
        let cat = FinStoch::new();
        let mut rng = random::rng(seed);
        let joint = finstoch::random_kernel(&Object::unit(), &Object::new(vec![x, y]), sparsity, &mut rng);
        let py = cat.marginal(&joint, &[1]).unwrap();
        let c = cat.conditional(&joint, &OutputPartition::new(vec![0], vec![1], 2).unwrap()).unwrap();
        let rebuilt = cat.permute(&cat.copy_then(&py, &c).unwrap(), &[1, 0]).unwrap();
        prop_assert!(cat.approx_eq(&rebuilt, &joint), "{:?}", cat.deviation(&rebuilt, &joint));
    }

    #[test]
    fn gaussian_joint_rebuilds_from_its_conditional(
        x in 1usize..4, y in 1usize..4, rank in 0usize..7, seed in any::<u64>(),
    ) {
        let cat = Gauss::new();
        let mut rng = random::rng(seed);
        let joint = gauss::random_map(&Object::unit(), &Object::new(vec![x, y]), Some(rank), &mut rng);
        let py = cat.marginal(&joint, &[1]).unwrap();
        let c = cat.conditional(&joint, &OutputPartition::new(vec![0], vec![1], 2).unwrap()).unwrap();
        let rebuilt = cat.permute(&cat.copy_then(&py, &c).unwrap(), &[1, 0]).unwrap();
        prop_assert!(cat.approx_eq(&rebuilt, &joint), "{:?}", cat.deviation(&rebuilt, &joint));
    }

    #[test]
    fn gaussian_composites_are_psd(
        a in 0usize..4, b in 1usize..4, c in 1usize..4, seed in any::<u64>(),
    ) {
        let cat = Gauss::new();
        let mut rng = random::rng(seed);
        let (a, b, c) = (Object::single(a), Object::single(b), Object::single(c));
        let f = gauss::random_map(&a, &b, None, &mut rng);
        let g = gauss::random_map(&b, &c, Some(1), &mut rng);
        let h = cat.compose(&f, &g).unwrap();
        let scale = h.cov.amax().max(1.0);
        let min = SymmetricEigen::new(h.cov.clone()).eigenvalues.min();
        prop_assert!(min >= -1e-10 * scale, "{min}");
        prop_assert!((&h.cov - h.cov.transpose()).amax() <= 1e-12 * scale);
    }

    #[test]
    fn filter_posteriors_are_distributions(seed in any::<u64>(), horizon in 0usize..4) {
        let cat = FinStoch::new();
        let mut rng = random::rng(seed);
        let shape = Shape { horizon, max_state: 4, max_obs: 3, joint_cap: 1 << 16 };
        let hmm = random::finstoch_hmm(&shape, 0.3, &mut rng);
        let obs: Vec<usize> = (0..=horizon)
            .map(|t| rand::Rng::random_range(&mut rng, 0..cardinality(hmm.obs_space(t))))
            .collect();
        let run = filter_instantiated(&cat, &hmm, &obs).unwrap();
        for step in &run.steps {
            let p = &step.posterior;
            prop_assert!(p.values().iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
            prop_assert!((column_sums(p)[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn report_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let text = json::float(v);
        let back: f64 = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }
}
