use causal_core::exec::Execution;
use causal_core::graph::Dag;
use causal_core::scm::{Intervention, Scm};
use proptest::prelude::*;

fn arb_dag() -> impl Strategy<Value = Dag> {
    (2usize..=5)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::bool::weighted(0.4), n * (n - 1) / 2)))
        .prop_map(|(n, bits)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k] {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            let names = (0..n).map(|i| format!("v{i}")).collect();
            Dag::from_indices(names, &edges).unwrap()
        })
        .prop_filter("at most 3 parents", |g| (0..g.len()).all(|i| g.parents(i).len() <= 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn markov_condition_holds(g in arb_dag(), seed in any::<u64>()) {
        let scm = Scm::random_binary(&g, seed).unwrap();
        for c in scm.verify_markov().unwrap() {
            prop_assert!(c.holds, "{:?}", c);
        }
    }

    #[test]
    fn causal_factorization_reproduces_joint(g in arb_dag(), seed in any::<u64>()) {
        let scm = Scm::random_binary(&g, seed).unwrap();
        let d = scm.exact_distribution().unwrap();
        let f = d.causal_factorization(scm.graph());
        for (a, b) in d.probabilities().iter().zip(&f) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    /// do(v_k = c) leaves every non-descendant marginal unchanged and makes
    /// the joint equal the truncated factorization.
    #[test]
    fn intervention_is_local(g in arb_dag(), seed in any::<u64>(), k in 0usize..5, c in 0u8..2) {
        let k = k % g.len();
        let scm = Scm::random_binary(&g, seed).unwrap();
        let obs = scm.exact_distribution().unwrap();
        let name = g.name(k).to_owned();
        let done = scm.intervene(&Intervention::set_constant(&name, f64::from(c))).unwrap();
        let int = done.exact_distribution().unwrap();
        let desc = g.descendants(k);
        let keep: Vec<usize> = (0..g.len()).filter(|i| *i != k && !desc.contains(i)).collect();
        let (mo, mi) = (obs.marginal(&keep), int.marginal(&keep));
        for (a, b) in mo.probabilities().iter().zip(mi.probabilities()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for cell in 0..int.n_cells() {
            let v = int.cell_values(cell);
            let mut p = if v[k] == f64::from(c) { 1.0 } else { 0.0 };
            for i in (0..g.len()).filter(|&i| i != k) {
                let given: Vec<(usize, f64)> = g.parents(i).iter().map(|&q| (q, v[q])).collect();
                p *= obs.conditional(i, v[i], &given).unwrap_or(0.0);
            }
            prop_assert!((p - int.prob(&v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampling_ignores_execution_mode(g in arb_dag(), seed in any::<u64>(), n in 1usize..3000) {
        let scm = Scm::random_binary(&g, seed).unwrap();
        prop_assert_eq!(
            scm.sample_with(n, seed, Execution::Sequential),
            scm.sample_with(n, seed, Execution::Parallel)
        );
    }
}
