mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logicx::cart::{DecisionTree, TreeParams};
use logicx::gnn::GcnModel;
use logicx::graph::{FeatureKind, Graph, LabeledDataset, Split};
use logicx::grounding::orbit_decompose;
use logicx::io::{
    load_dataset, load_embeddings, save_embeddings, save_jsonl, DatasetFormat, LoadOptions,
};
use logicx::matching::{subgraph_isomorphic, MatchMode, MatchOptions, MatchOutcome};
use logicx::rules::{eval_rules, learn_rules, ActivationMatrix};
use logicx::synth::{generate, oracle_embeddings, SynthConfig};
use logicx::wl::wl_hash;

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (1..=max_nodes).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), pairs).prop_map(move |mask| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if mask[k] {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            Graph::from_edges("p", n, &edges).unwrap()
        })
    })
}

fn with_permutation(max_nodes: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    graph_strategy(max_nodes).prop_flat_map(|g| {
        let n = g.num_nodes();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn bit_matrix() -> impl Strategy<Value = (Vec<Vec<bool>>, Vec<usize>, usize)> {
    (2usize..=3, 2usize..=6, 4usize..=40).prop_flat_map(|(classes, preds, rows)| {
        (
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), preds), rows),
            proptest::collection::vec(0..classes, rows),
            Just(classes),
        )
    })
}

fn matrix(rows: Vec<Vec<bool>>, labels: Vec<usize>, classes: usize) -> ActivationMatrix {
    let n = rows.len();
    ActivationMatrix {
        num_predicates: rows[0].len(),
        graph_ids: (0..n).map(|i| format!("g{i}")).collect(),
        graph_index: (0..n).collect(),
        rows,
        labels,
        num_classes: classes,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wl_digest_ignores_node_order((g, perm) in with_permutation(10)) {
        let h = g.permuted(&perm);
        prop_assert_eq!(wl_hash(&g, None), wl_hash(&h, None));
        for (c, &pc) in perm.iter().enumerate() {
            prop_assert_eq!(wl_hash(&g, Some(c)), wl_hash(&h, Some(pc)));
        }
    }

    #[test]
    fn anchored_orbits_match_automorphism_enumeration(g in graph_strategy(7), a in 0usize..7, fix in any::<bool>()) {
        let anchor = a % g.num_nodes();
        let d = orbit_decompose(&g, anchor, 30, fix).unwrap();
        let (nodes, _) = common::brute_orbits(&g, fix.then_some(anchor));
        let mut got = d.orbits.clone();
        got.sort_by_key(|o| o[0]);
        prop_assert_eq!(got, nodes);
        prop_assert!(d.keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn orbits_follow_a_relabeling((g, perm) in with_permutation(7), a in 0usize..7) {
        let anchor = a % g.num_nodes();
        let d = orbit_decompose(&g, anchor, 30, true).unwrap();
        let e = orbit_decompose(&g.permuted(&perm), perm[anchor], 30, true).unwrap();
        let summary = |keys: &[logicx::grounding::OrbitKey], orbits: Vec<Vec<usize>>| {
            keys.iter()
                .zip(orbits)
                .map(|(k, mut o)| {
                    o.sort_unstable();
                    (k.not_anchor, k.size, k.degrees.clone(), k.distances.clone(), o)
                })
                .collect::<std::collections::BTreeSet<_>>()
        };
        let mapped: Vec<Vec<usize>> = d.orbits.iter().map(|o| o.iter().map(|&v| perm[v]).collect()).collect();
        prop_assert_eq!(summary(&d.keys, mapped), summary(&e.keys, e.orbits.clone()));
    }

    #[test]
    fn matcher_agrees_with_exhaustive_search(p in graph_strategy(4), t in graph_strategy(6), induced in any::<bool>()) {
        let mode = if induced { MatchMode::Induced } else { MatchMode::Monomorphism };
        let opts = MatchOptions { mode, respect_labels: true, edge_labels: true, timeout: None };
        let got = subgraph_isomorphic(&p, &t, &opts) == MatchOutcome::Yes;
        prop_assert_eq!(got, common::brute_match(&p, &t, induced, false));
    }

    #[test]
    fn every_graph_contains_itself(g in graph_strategy(8)) {
        let opts = MatchOptions { mode: MatchMode::Induced, respect_labels: true, edge_labels: true, timeout: None };
        prop_assert_eq!(subgraph_isomorphic(&g, &g, &opts), MatchOutcome::Yes);
    }

    #[test]
    fn deeper_trees_never_fit_worse(
        x in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 2), 4..40),
        seed in any::<u64>(),
    ) {
        let y: Vec<usize> = x.iter().enumerate().map(|(i, r)| usize::from(r[0] + r[1] > 0.0) ^ usize::from((seed >> (i % 64)) & 1 == 1 && i % 5 == 0)).collect();
        let mut last = 0.0;
        for depth in 1..=5 {
            let tree = DecisionTree::fit(&x, &y, 2, &TreeParams::new(depth)).unwrap();
            let acc = tree.accuracy(&x, &y);
            prop_assert!(acc + 1e-12 >= last, "depth {} accuracy {} < {}", depth, acc, last);
            prop_assert!(tree.depth() <= depth);
            last = acc;
        }
    }

    #[test]
    fn separable_data_needs_one_split(xs in proptest::collection::vec(-5.0f64..5.0, 2..30), cut in -4.0f64..4.0) {
        let y: Vec<usize> = xs.iter().map(|&v| usize::from(v > cut)).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let tree = DecisionTree::fit(&rows, &y, 2, &TreeParams::new(1)).unwrap();
        prop_assert_eq!(tree.accuracy(&rows, &y), 1.0);
    }

    #[test]
    fn learned_rules_are_exclusive_and_follow_the_tree((rows, labels, classes) in bit_matrix(), depth in 1usize..6) {
        let m = matrix(rows.clone(), labels, classes);
        let (rules, tree) = learn_rules(&m, depth).unwrap();
        let simple = rules.simplified();
        let preds = m.num_predicates;
        for code in 0..(1u32 << preds) {
            let bits: Vec<bool> = (0..preds).map(|i| code >> i & 1 == 1).collect();
            let e = eval_rules(&rules, &bits).unwrap();
            prop_assert_eq!(e.satisfied.iter().filter(|&&s| s).count(), 1);
            let x: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
            prop_assert_eq!(e.verdict.class(), Some(tree.predict(&x).unwrap()));
            prop_assert_eq!(eval_rules(&simple, &bits).unwrap().satisfied, e.satisfied);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gcn_output_ignores_node_order((g, perm) in with_permutation(8), seed in any::<u64>()) {
        let n = g.num_nodes();
        let x: Vec<Vec<f64>> = (0..n).map(|v| vec![(v % 3) as f64, 1.0 / (v + 1) as f64]).collect();
        let g = Graph::new("p", n, g.edges().to_vec(), x, None, None).unwrap();
        let model = GcnModel::init(2, &[5, 4], 3, seed).unwrap();
        let a = model.forward(&g).unwrap();
        let b = model.forward(&g.permuted(&perm)).unwrap();
        for (u, v) in a.logits.iter().zip(b.logits.iter()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
        for (v, &pv) in perm.iter().enumerate() {
            for (p, q) in a.node_embeddings.row(v).iter().zip(b.node_embeddings.row(pv).iter()) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs: Vec<Graph> = (0..2)
            .map(|i| {
                let g = common::random_graph(&mut rng, 4, 0.6);
                let x = (0..4).map(|v| vec![(v + i) as f64 * 0.3 - 0.5, 1.0]).collect();
                Graph::new(format!("g{i}"), 4, g.edges().to_vec(), x, None, None).unwrap()
            })
            .collect();
        let ds = LabeledDataset::new(graphs, vec![0, 1], vec![Split::Train; 2], vec![FeatureKind::Continuous; 2], None).unwrap();
        let mut model = GcnModel::init(2, &[3], 2, seed).unwrap();
        let analytic = model.loss_and_gradients(&ds, &[0, 1]).unwrap().1.flatten();
        let h = 1e-5;
        for (i, &a) in analytic.iter().enumerate() {
            let orig = *model.parameter_mut(i);
            *model.parameter_mut(i) = orig + h;
            let up = model.loss_and_gradients(&ds, &[0, 1]).unwrap().0;
            *model.parameter_mut(i) = orig - h;
            let down = model.loss_and_gradients(&ds, &[0, 1]).unwrap().0;
            *model.parameter_mut(i) = orig;
            let numeric = (up - down) / (2.0 * h);
            prop_assert!((a - numeric).abs() <= 1e-6 + 1e-4 * numeric.abs(), "param {}: {} vs {}", i, a, numeric);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn datasets_and_embeddings_survive_a_file_round_trip(seed in any::<u64>()) {
        let synth = generate(&SynthConfig { n_graphs: 20, base_nodes: 8, seed, ..SynthConfig::default() }).unwrap();
        let emb = oracle_embeddings(&synth, 0.2, 2, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.jsonl");
        let embs = dir.path().join("e.jsonl");
        save_jsonl(&synth.dataset, &data).unwrap();
        let options = LoadOptions {
            symbols: synth.dataset.symbol_table().map(<[String]>::to_vec),
            ..LoadOptions::default()
        };
        let back = load_dataset(&data, DatasetFormat::Jsonl, &options).unwrap();
        prop_assert_eq!(&back, &synth.dataset);
        save_embeddings(&emb, &synth.dataset, &embs).unwrap();
        let e2 = load_embeddings(&embs, &back).unwrap();
        prop_assert_eq!(e2.predictions(), emb.predictions());
        prop_assert_eq!(e2.layers(), emb.layers());
        for g in 0..back.len() {
            for (r, s) in emb.graph(g).iter().zip(e2.graph(g)) {
                for (a, b) in r.iter().zip(s) {
                    prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
                }
            }
        }
    }
}
