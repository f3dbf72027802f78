use std::collections::HashSet;

use hdna_core::dna::{parse_canonical, weight};
use hdna_core::testkit::{oracle, random_deep_document, random_document, remove_subtree};
use hdna_core::{
    build_tree, diff, dna_of, fingerprint, quick_changed, total_weight, ChangeStatus,
    CleanDocument, Fingerprint,
};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn doc_strategy() -> impl Strategy<Value = CleanDocument> {
    (any::<u64>(), 1usize..=200, any::<bool>()).prop_map(|(seed, size, deep)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if deep {
            random_deep_document(&mut rng, size)
        } else {
            random_document(&mut rng, size)
        }
    })
}

fn quad(doc: &CleanDocument) -> Vec<(String, usize, usize, f64)> {
    dna_of(&build_tree(doc, ""))
        .into_iter()
        .map(|w| (w.triple.a, w.triple.n, w.triple.d, w.weight))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn numbering_depth_and_descendants_match_oracle(doc in doc_strategy()) {
        let tree = build_tree(&doc, "");
        let order = oracle::level_order(&doc);
        let depths = oracle::depths(&doc);
        let parents = oracle::parents(&doc);
        prop_assert_eq!(tree.node_count(), doc.len());
        let mut n_of = vec![0usize; doc.len()];
        for (n, &id) in order.iter().enumerate() {
            n_of[id] = n;
        }
        for (n, &id) in order.iter().enumerate() {
            let rec = tree.node(n);
            prop_assert_eq!(rec.n, n);
            prop_assert_eq!(&rec.name, doc.name(id));
            prop_assert_eq!(rec.depth, depths[id]);
            prop_assert_eq!(rec.d, oracle::descendant_recount(&doc, id));
            prop_assert_eq!(rec.parent, parents[id].map(|p| n_of[p]));
            let kids: Vec<usize> = doc.children(id).iter().map(|&c| n_of[c]).collect();
            prop_assert_eq!(&rec.children, &kids);
            let sum: usize = rec.children.iter().map(|&c| tree.node(c).d + 1).sum();
            prop_assert_eq!(rec.d, sum);
        }
    }

    #[test]
    fn weights_match_rational_oracle(doc in doc_strategy()) {
        let tree = build_tree(&doc, "");
        for (rec, w) in tree.nodes().iter().zip(dna_of(&tree)) {
            let exact = oracle::rational_weight(rec.d, rec.n, rec.depth);
            let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
            if exact_f == 0.0 {
                prop_assert_eq!(w.weight, 0.0);
            } else {
                prop_assert!(((w.weight - exact_f) / exact_f).abs() < 1e-9);
            }
            if rec.n == 0 {
                prop_assert_eq!(w.weight, rec.d as f64);
            }
            if rec.d == 0 {
                prop_assert_eq!(w.weight, 0.0);
            }
        }
    }

    #[test]
    fn weight_rises_with_d_and_falls_with_n_and_depth(
        d in 1usize..10_000, n in 1usize..10_000, depth in 1usize..500
    ) {
        prop_assert!(weight(d + 1, n, depth) > weight(d, n, depth));
        prop_assert!(weight(d, n + 1, depth) < weight(d, n, depth));
        prop_assert!(weight(d, n, depth + 1) < weight(d, n, depth));
    }

    #[test]
    fn canonical_matches_plain_rendering_and_round_trips(doc in doc_strategy()) {
        let tree = build_tree(&doc, "t");
        let fp = fingerprint(&tree);
        let plain: Vec<(String, usize, usize)> =
            tree.nodes().iter().map(|r| (r.name.clone(), r.n, r.d)).collect();
        prop_assert_eq!(&fp.canonical, &oracle::canonical(&plain));
        prop_assert_eq!(fp.digest.len(), 64);
        let back = Fingerprint::from_canonical(&fp.canonical).unwrap();
        prop_assert_eq!(&back, &fp);
        prop_assert_eq!(back.to_tree("t").unwrap(), tree);
        prop_assert_eq!(parse_canonical(&fp.canonical).unwrap(), fp.entries);
    }

    #[test]
    fn canonical_equality_is_tree_isomorphism(a in doc_strategy(), b in doc_strategy()) {
        let ca = fingerprint(&build_tree(&a, "")).canonical;
        let cb = fingerprint(&build_tree(&b, "")).canonical;
        prop_assert_eq!(ca == cb, a.is_isomorphic(&b));
        // A copy rebuilt in a different arena order is still isomorphic.
        let copy = remove_then_restore(&a);
        prop_assert_eq!(fingerprint(&build_tree(&copy, "")).canonical, ca);
    }

    #[test]
    fn diff_agrees_with_oracle(a in doc_strategy(), b in doc_strategy()) {
        let (qa, qb) = (quad(&a), quad(&b));
        let report = diff(
            &dna_of(&build_tree(&a, "")),
            &dna_of(&build_tree(&b, "")),
        );
        let (entries, raw, normalized) = oracle::diff(&qa, &qb);
        let got: Vec<(usize, &str)> =
            report.entries.iter().map(|e| (e.n, e.status.as_str())).collect();
        let want: Vec<(usize, &str)> = entries.iter().map(|e| (e.n, e.status)).collect();
        prop_assert_eq!(got, want);
        prop_assert!((report.raw_score - raw).abs() <= 1e-9 * raw.max(1.0));
        prop_assert!((report.normalized_score - normalized).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&report.normalized_score));
        prop_assert_eq!(report.identical, report.entries.is_empty());
        if report.identical {
            prop_assert_eq!(report.raw_score, 0.0);
        }
        if report.raw_score > 0.0 {
            prop_assert!(!report.identical);
        }
    }

    #[test]
    fn diff_is_position_symmetric(a in doc_strategy(), b in doc_strategy()) {
        let (wa, wb) = (dna_of(&build_tree(&a, "")), dna_of(&build_tree(&b, "")));
        let ab = diff(&wa, &wb);
        let ba = diff(&wb, &wa);
        let ns = |r: &hdna_core::DiffReport| r.entries.iter().map(|e| e.n).collect::<Vec<_>>();
        prop_assert_eq!(ns(&ab), ns(&ba));
        for (x, y) in ab.entries.iter().zip(&ba.entries) {
            let swapped = match x.status {
                ChangeStatus::Added => ChangeStatus::Removed,
                ChangeStatus::Removed => ChangeStatus::Added,
                ChangeStatus::Changed => ChangeStatus::Changed,
            };
            prop_assert_eq!(y.status, swapped);
        }
        let fa = fingerprint(&build_tree(&a, ""));
        let fb = fingerprint(&build_tree(&b, ""));
        prop_assert_eq!(quick_changed(&fa, &fb).unwrap(), !ab.identical);
    }

    #[test]
    fn deletion_propagates_to_ancestors(doc in doc_strategy(), pick in any::<prop::sample::Index>()) {
        prop_assume!(doc.len() > 1);
        let victim = 1 + pick.index(doc.len() - 1);
        let old_tree = build_tree(&doc, "");
        let new_tree = build_tree(&remove_subtree(&doc, victim), "");
        let report = diff(&dna_of(&old_tree), &dna_of(&new_tree));

        let order = oracle::level_order(&doc);
        let victim_n = order.iter().position(|&id| id == victim).unwrap();
        let ancestors: Vec<usize> = old_tree.ancestors(victim_n).collect();
        for a in &ancestors {
            let e = report.entries.iter().find(|e| e.n == *a);
            prop_assert!(matches!(e, Some(e) if e.status == ChangeStatus::Changed));
        }
        let last = old_tree.node_count() - 1;
        let entry_ns: HashSet<usize> = report.entries.iter().map(|e| e.n).collect();
        if victim_n == last {
            let mut want: HashSet<usize> = ancestors.iter().copied().collect();
            want.insert(victim_n);
            prop_assert_eq!(entry_ns, want);
            prop_assert_eq!(report.entries.last().unwrap().status, ChangeStatus::Removed);
        } else {
            prop_assert!(report.entries.iter().any(|e| e.n == last && e.status == ChangeStatus::Removed));
            prop_assert!(entry_ns.iter().any(|&n| n > victim_n));
        }
    }
}

/// Rebuilds `doc` pushing nodes in level order instead of creation order.
fn remove_then_restore(doc: &CleanDocument) -> CleanDocument {
    let order = oracle::level_order(doc);
    let mut out = CleanDocument::new();
    let mut map = vec![0usize; doc.len()];
    for &id in &order {
        for &c in doc.children(id) {
            map[c] = out.push_child(map[id], doc.name(c));
        }
    }
    out
}

#[test]
fn total_weight_matches_brute_force_for_flat_trees() {
    for k in 0..30 {
        let mut doc = CleanDocument::new();
        for _ in 0..k {
            doc.push_child(CleanDocument::ROOT, "li");
        }
        let nodes = dna_of(&build_tree(&doc, ""));
        // all children are leaves
        assert_eq!(total_weight(&nodes), 0.0);
        assert_eq!(nodes[0].weight, k as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for size in 1..150 {
        let doc = random_document(&mut rng, size);
        let tree = build_tree(&doc, "");
        let brute_f: f64 = tree
            .nodes()
            .iter()
            .skip(1)
            .map(|r| oracle::rational_weight(r.d, r.n, r.depth))
            .map(|q: Ratio<u128>| *q.numer() as f64 / *q.denom() as f64)
            .sum();
        let got = total_weight(&dna_of(&tree));
        assert!(
            (got - brute_f).abs() <= 1e-9 * brute_f.max(1.0),
            "{got} vs {brute_f}"
        );
    }
}
