mod common;

use common::*;
use ebmeans::inference::median_probability_model;
use ebmeans::math::fmt_sig6;
use ebmeans::mixture::MixtureBuilder;
use ebmeans::oracle::{enumerate_posterior, inclusion_probabilities};
use ebmeans::theory::size_prior_ratio_report;
use ebmeans::{Configuration, DataVector, SizePrior};
use proptest::prelude::*;

fn data(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-9.0f64..9.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn configuration_text_round_trips(mask in 0u32..(1 << 12)) {
        let indices: Vec<usize> = (1..=12).filter(|k| mask >> (k - 1) & 1 == 1).collect();
        let c = Configuration::new(indices, 12).unwrap();
        let back: Configuration = c.to_string().parse().unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn posterior_is_a_distribution(y in (1usize..=8).prop_flat_map(data), a in 0.5f64..2.5) {
        let n = y.len();
        let cfg = default_cfg(n);
        let prior = SizePrior::complexity(a, 2.0).unwrap();
        let y = DataVector::new(y).unwrap();
        let table = enumerate_posterior(&cfg, &prior, &y).unwrap();
        let total: f64 = table.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let p = inclusion_probabilities(&table).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        let mpm = median_probability_model(&p.iter().map(|v| v.min(1.0)).collect::<Vec<_>>()).unwrap();
        for k in 1..=n {
            prop_assert_eq!(mpm.contains(k), p[k - 1] > 0.5);
        }
    }

    #[test]
    fn larger_data_never_lowers_inclusion(y in data(5), bump in 0.0f64..3.0) {
        let cfg = default_cfg(5);
        let prior = SizePrior::complexity(1.0, 1.0).unwrap();
        let base = inclusion_probabilities(&enumerate_posterior(&cfg, &prior, &DataVector::new(y.clone()).unwrap()).unwrap()).unwrap();
        let mut moved = y.clone();
        moved[0] = moved[0].abs() + bump;
        let after = inclusion_probabilities(&enumerate_posterior(&cfg, &prior, &DataVector::new(moved).unwrap()).unwrap()).unwrap();
        prop_assert!(after[0] >= base[0] - 1e-12);
    }

    #[test]
    fn mixture_quantiles_are_monotone_and_consistent(
        jump in 0.0f64..0.8,
        comps in prop::collection::vec((0.05f64..1.0, -6.0f64..6.0, 0.2f64..2.0), 1..6),
        q1 in 0.01f64..0.99,
        q2 in 0.01f64..0.99,
    ) {
        let mut b = MixtureBuilder::new();
        b.add(jump, 0.0, 0.0);
        for &(w, m, s) in &comps {
            b.add(w, m, s);
        }
        let h = b.build();
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let (tl, th) = (h.quantile(lo), h.quantile(hi));
        prop_assert!(tl <= th + 1e-9);
        prop_assert!(h.cdf(th + 1e-8) >= hi - 1e-9);
        prop_assert!(h.cdf_left(th - 1e-8) <= hi + 1e-9);
    }

    #[test]
    fn sig6_round_trips_to_six_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_sig6(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5e-6);
    }

    #[test]
    fn complexity_ratios_are_constant(a in 0.1f64..3.0, c in 1.0f64..4.0, n in 5usize..300) {
        let prior = SizePrior::complexity(a, c).unwrap();
        let r = size_prior_ratio_report(&prior, n, 4).unwrap();
        let want = 1.0 / (c * (n as f64).powf(a));
        prop_assert!((r.min_ratio / want - 1.0).abs() < 1e-9);
        prop_assert!((r.max_ratio / want - 1.0).abs() < 1e-9);
        prop_assert!((r.implied_a1 - r.implied_a2).abs() < 1e-9);
    }
}
