#![allow(dead_code)]

use fxmst::ingest::CurrencyCode;
use fxmst::msttree::DistanceMatrix;
use fxmst::synth::{synthetic_codes, NormalStream};

pub fn codes(n: usize) -> Vec<CurrencyCode> {
    synthetic_codes(n).unwrap()
}

pub fn code(s: &str) -> CurrencyCode {
    CurrencyCode::new(s).unwrap()
}

/// Symmetric matrix of i.i.d. uniform distances in (0, 1), zero diagonal.
pub fn random_distances(n: usize, stream: &mut NormalStream) -> DistanceMatrix {
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 0.001 + 0.998 * stream.uniform();
            e[i * n + j] = d;
            e[j * n + i] = d;
        }
    }
    DistanceMatrix::from_entries(codes(n), e).unwrap()
}

/// Edges of the labeled tree encoded by a Prüfer sequence over `0..seq.len() + 2`.
pub fn prufer_edges(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Uniformly random labeled tree on `n >= 2` nodes.
pub fn random_tree(n: usize, stream: &mut NormalStream) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let seq: Vec<usize> = (0..n - 2)
        .map(|_| ((stream.uniform() * n as f64) as usize).min(n - 1))
        .collect();
    prufer_edges(&seq)
}

/// Normalized edge key with the smaller code first.
pub fn edge_key(a: CurrencyCode, b: CurrencyCode) -> (CurrencyCode, CurrencyCode) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
