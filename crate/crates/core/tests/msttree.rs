mod common;

use std::collections::BTreeSet;

use common::{codes, edge_key, prufer_edges, random_distances, random_tree};
use fxmst::ingest::CurrencyCode;
use fxmst::msttree::{
    build_mst, degree_distribution, export_tree, parse_edge_csv, DistanceMatrix, SpanningTree,
    TreeEdge, TreeFormat,
};
use fxmst::synth::NormalStream;
use proptest::prelude::*;

fn edge_set(tree: &SpanningTree) -> BTreeSet<(CurrencyCode, CurrencyCode)> {
    tree.edges().iter().map(|e| edge_key(e.a, e.b)).collect()
}

fn brute_force_minimum(d: &DistanceMatrix) -> (f64, usize) {
    let n = d.size();
    let mut best = f64::INFINITY;
    let mut count = 0;
    let mut seq = vec![0usize; n - 2];
    loop {
        count += 1;
        let w: f64 = prufer_edges(&seq).iter().map(|&(i, j)| d.get(i, j)).sum();
        best = best.min(w);
        let mut k = 0;
        while k < seq.len() {
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
        if k == seq.len() {
            break;
        }
    }
    (best, count)
}

fn prim_from(d: &DistanceMatrix, start: usize) -> BTreeSet<(usize, usize)> {
    let n = d.size();
    let mut inside = vec![false; n];
    inside[start] = true;
    let mut edges = BTreeSet::new();
    for _ in 1..n {
        let mut best = (f64::INFINITY, 0, 0);
        for i in (0..n).filter(|&i| inside[i]) {
            for j in (0..n).filter(|&j| !inside[j]) {
                if d.get(i, j) < best.0 {
                    best = (d.get(i, j), i, j);
                }
            }
        }
        inside[best.2] = true;
        edges.insert((best.1.min(best.2), best.1.max(best.2)));
    }
    edges
}

#[test]
fn kruskal_matches_exhaustive_enumeration() {
    let mut s = NormalStream::new(17);
    for _ in 0..50 {
        let d = random_distances(6, &mut s);
        let (best, count) = brute_force_minimum(&d);
        assert_eq!(count, 1296);
        let w = build_mst(&d).unwrap().total_weight();
        assert!((w - best).abs() < 1e-12, "{w} vs {best}");
    }
}

#[test]
fn kruskal_matches_prim_from_every_start() {
    let mut s = NormalStream::new(5);
    for n in 2..=12 {
        let d = random_distances(n, &mut s);
        let tree = build_mst(&d).unwrap();
        let cs = d.currencies();
        let ours: BTreeSet<(usize, usize)> = tree
            .edges()
            .iter()
            .map(|e| {
                let i = cs.iter().position(|c| *c == e.a).unwrap();
                let j = cs.iter().position(|c| *c == e.b).unwrap();
                (i.min(j), i.max(j))
            })
            .collect();
        for start in 0..n {
            assert_eq!(prim_from(&d, start), ours);
        }
    }
}

#[test]
fn relabeling_permutes_the_tree() {
    let mut s = NormalStream::new(23);
    let d = random_distances(15, &mut s);
    let tree = build_mst(&d).unwrap();
    let mut relabeled = codes(15);
    relabeled.reverse();
    let renamed = DistanceMatrix::from_entries(
        relabeled.clone(),
        (0..15 * 15).map(|k| d.get(k / 15, k % 15)).collect(),
    )
    .unwrap();
    let other = build_mst(&renamed).unwrap();
    assert!((tree.total_weight() - other.total_weight()).abs() < 1e-12);
    let map = |c: CurrencyCode| relabeled[d.currencies().iter().position(|x| *x == c).unwrap()];
    let mapped: BTreeSet<_> = tree.edges().iter().map(|e| edge_key(map(e.a), map(e.b))).collect();
    assert_eq!(mapped, edge_set(&other));
}

#[test]
fn monotone_transforms_keep_edges() {
    let mut s = NormalStream::new(31);
    for _ in 0..20 {
        let d = random_distances(20, &mut s);
        let base = edge_set(&build_mst(&d).unwrap());
        for f in [|x: f64| x * x, |x: f64| x.sqrt(), |x: f64| x.powi(3)] {
            assert_eq!(edge_set(&build_mst(&d.map(f).unwrap()).unwrap()), base);
        }
    }
}

#[test]
fn fifty_nine_node_tree_exports_fifty_eight_edges() {
    let mut s = NormalStream::new(2);
    let tree = build_mst(&random_distances(59, &mut s)).unwrap();
    let dot = String::from_utf8(export_tree(&tree, TreeFormat::Dot)).unwrap();
    assert_eq!(dot.lines().filter(|l| l.contains(" -- ")).count(), 58);
    let csv = export_tree(&tree, TreeFormat::EdgeCsv);
    assert_eq!(csv.iter().filter(|&&b| b == b'\n').count(), 59);
    let back = parse_edge_csv(csv.as_slice()).unwrap();
    assert_eq!(export_tree(&back, TreeFormat::EdgeCsv), csv);
}

proptest! {
    #[test]
    fn handshake_and_cumulative_shape(n in 2usize..60, seed in any::<u64>()) {
        let mut s = NormalStream::new(seed);
        let cs = codes(n);
        let edges = random_tree(n, &mut s)
            .into_iter()
            .map(|(i, j)| TreeEdge { a: cs[i], b: cs[j], distance: 0.5 })
            .collect();
        let tree = SpanningTree::from_edges(cs, edges).unwrap();
        prop_assert_eq!(tree.degree().values().sum::<usize>(), 2 * (n - 1));
        prop_assert!(tree.degree().values().all(|&k| k >= 1));
        let dist = degree_distribution(&tree);
        let total: usize = (1..=dist.k_max).map(|k| dist.count(k)).sum();
        let weighted: usize = (1..=dist.k_max).map(|k| k * dist.count(k)).sum();
        prop_assert_eq!(total, n);
        prop_assert_eq!(weighted, 2 * (n - 1));
        prop_assert_eq!(dist.f(1), 1.0);
        prop_assert!((1..dist.k_max).all(|k| dist.f(k + 1) <= dist.f(k)));
        prop_assert!(dist.f(dist.k_max) >= 1.0 / n as f64);
    }

    #[test]
    fn mst_is_a_spanning_tree(n in 2usize..25, seed in any::<u64>()) {
        let mut s = NormalStream::new(seed);
        let tree = build_mst(&random_distances(n, &mut s)).unwrap();
        prop_assert_eq!(tree.edges().len(), n - 1);
        prop_assert!((tree.mean_degree() - 2.0 * (n as f64 - 1.0) / n as f64).abs() < 1e-15);
    }
}
