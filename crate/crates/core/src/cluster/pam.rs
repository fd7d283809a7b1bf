//! Partitioning around medoids: greedy BUILD, then first-improvement SWAP.

/// Medoid indices (sorted), labels and the total cost after BUILD and after
/// each accepted swap.
pub struct PamFit {
    pub medoids: Vec<usize>,
    pub labels: Vec<usize>,
    pub cost: Vec<f64>,
}

struct Nearest {
    first: Vec<f64>,
    first_idx: Vec<usize>,
    second: Vec<f64>,
}

fn nearest(dist: &[f64], n: usize, medoids: &[usize]) -> Nearest {
    let mut first = vec![f64::INFINITY; n];
    let mut first_idx = vec![0; n];
    let mut second = vec![f64::INFINITY; n];
    for j in 0..n {
        for (pos, &m) in medoids.iter().enumerate() {
            let d = dist[j * n + m];
            if d < first[j] {
                second[j] = first[j];
                first[j] = d;
                first_idx[j] = pos;
            } else if d < second[j] {
                second[j] = d;
            }
        }
    }
    Nearest {
        first,
        first_idx,
        second,
    }
}

/// `dist` is a full `n × n` dissimilarity matrix.
pub fn pam(dist: &[f64], n: usize, k: usize) -> PamFit {
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];

    // BUILD
    let first = (0..n)
        .map(|i| (i, (0..n).map(|j| dist[j * n + i]).sum::<f64>()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
        .0;
    medoids.push(first);
    is_medoid[first] = true;
    let mut dnear: Vec<f64> = (0..n).map(|j| dist[j * n + first]).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for i in (0..n).filter(|&i| !is_medoid[i]) {
            let gain: f64 = (0..n).map(|j| (dnear[j] - dist[j * n + i]).max(0.0)).sum();
            if gain > best.1 {
                best = (i, gain);
            }
        }
        let i = best.0;
        medoids.push(i);
        is_medoid[i] = true;
        for j in 0..n {
            dnear[j] = dnear[j].min(dist[j * n + i]);
        }
    }

    let mut near = nearest(dist, n, &medoids);
    let mut total: f64 = near.first.iter().sum();
    let mut cost = vec![total];

    // SWAP
    'outer: loop {
        for pos in 0..k {
            for h in 0..n {
                if is_medoid[h] {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let djh = dist[j * n + h];
                    if near.first_idx[j] == pos {
                        delta += djh.min(near.second[j]) - near.first[j];
                    } else if djh < near.first[j] {
                        delta += djh - near.first[j];
                    }
                }
                if delta < -1e-12 * (1.0 + total) {
                    is_medoid[medoids[pos]] = false;
                    medoids[pos] = h;
                    is_medoid[h] = true;
                    near = nearest(dist, n, &medoids);
                    total = near.first.iter().sum();
                    cost.push(total);
                    continue 'outer;
                }
            }
        }
        break;
    }

    medoids.sort_unstable();
    let near = nearest(dist, n, &medoids);
    PamFit {
        medoids,
        labels: near.first_idx,
        cost,
    }
}
