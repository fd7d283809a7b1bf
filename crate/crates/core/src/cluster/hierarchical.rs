//! Agglomerative clustering with Lance–Williams updates on squared Euclidean
//! dissimilarities.

use super::Linkage;

/// Merge of the clusters represented by rows `a < b`, at dissimilarity `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Full merge sequence over `n` rows.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

pub fn linkage(sq: &[f64], n: usize, method: Linkage) -> Dendrogram {
    let mut dist = sq.to_vec();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && dist[i * n + j] < best.2 {
                    best = (i, j, dist[i * n + j]);
                }
            }
        }
        let (i, j, dij) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for m in 0..n {
            if !active[m] || m == i || m == j {
                continue;
            }
            let dim = dist[i * n + m];
            let djm = dist[j * n + m];
            let nm = size[m] as f64;
            let updated = match method {
                Linkage::Ward => ((ni + nm) * dim + (nj + nm) * djm - nm * dij) / (ni + nj + nm),
                Linkage::Centroid => (ni * dim + nj * djm) / (ni + nj) - ni * nj * dij / ((ni + nj) * (ni + nj)),
            };
            dist[i * n + m] = updated;
            dist[m * n + i] = updated;
        }
        size[i] += size[j];
        active[j] = false;
        merges.push(Merge { a: i, b: j, height: dij });
    }
    Dendrogram { n, merges }
}

impl Dendrogram {
    /// Cluster index per row after the first `n - k` merges, numbered by
    /// first appearance.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in self.merges.iter().take(self.n - k) {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[rb] = ra;
        }
        let roots: Vec<usize> = (0..self.n).map(|x| find(&mut parent, x)).collect();
        super::canonical_labels(&roots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::squared_distances;

    #[test]
    fn ward_merges_closest_pairs_first() {
        let rows = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.2], vec![20.0]];
        let (sq, n) = squared_distances(&rows);
        let dendro = linkage(&sq, n, Linkage::Ward);
        assert_eq!((dendro.merges[0].a, dendro.merges[0].b), (0, 1));
        assert_eq!((dendro.merges[1].a, dendro.merges[1].b), (2, 3));
        assert_eq!(dendro.cut(3), vec![0, 0, 1, 1, 2]);
        assert_eq!(dendro.cut(5), vec![0, 1, 2, 3, 4]);
        assert_eq!(dendro.cut(1), vec![0; 5]);
    }

    #[test]
    fn centroid_update_is_squared_centroid_distance() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0], vec![9.0, 9.0]];
        let (sq, n) = squared_distances(&rows);
        let d = linkage(&sq, n, Linkage::Centroid);
        // First merge {0, 1} (distance 4); its centroid (1, 0) is at squared
        // distance 9 from row 2.
        assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
        assert!((d.merges[1].height - 9.0).abs() < 1e-12);
    }

    #[test]
    fn ward_heights_are_monotone() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![((i * 37) % 11) as f64, ((i * 13) % 7) as f64]).collect();
        let (sq, n) = squared_distances(&rows);
        let d = linkage(&sq, n, Linkage::Ward);
        for w in d.merges.windows(2) {
            assert!(w[1].height >= w[0].height - 1e-9);
        }
    }
}
