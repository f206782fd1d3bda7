use super::SelectionRule;
use crate::error::{domain, Result};
use crate::model::ModelVector;

/// Complete-linkage agglomerative clustering of predictors with similarity
/// `|corr|`, cut at `threshold`: two predictors share a cluster only if every
/// cross pair of the merged clusters has `|corr| >= threshold`.
///
/// Ties in the merge order go to the smallest pair of cluster representatives
/// (the smallest member index of each cluster). Clusters are returned sorted by
/// their smallest member, members ascending.
pub fn complete_linkage_clusters(corr: &[Vec<f64>], threshold: f64) -> Result<Vec<Vec<usize>>> {
    let p = corr.len();
    if corr.iter().any(|row| row.len() != p) {
        return domain("correlation matrix is not square");
    }
    for i in 0..p {
        for j in 0..i {
            let (a, b) = (corr[i][j], corr[j][i]);
            if !a.is_finite() || (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                return domain(format!("correlation matrix not symmetric at ({i}, {j})"));
            }
        }
        if (corr[i][i] - 1.0).abs() > 1e-8 {
            return domain(format!("correlation matrix diagonal at {i} is {}", corr[i][i]));
        }
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return domain(format!("threshold must lie in (0, 1], got {threshold}"));
    }

    // sim[i][j] holds the complete-linkage similarity between active clusters
    // represented by i and j (the minimum |corr| over cross pairs).
    let mut sim: Vec<Vec<f64>> = corr
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).collect())
        .collect();
    let mut members: Vec<Vec<usize>> = (0..p).map(|i| vec![i]).collect();
    let mut active = vec![true; p];
    // best[i] = (similarity, partner) over active partners j > i.
    let row_best = |sim: &Vec<Vec<f64>>, active: &[bool], i: usize| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for j in (i + 1)..p {
            if active[j] && best.is_none_or(|(s, _)| sim[i][j] > s) {
                best = Some((sim[i][j], j));
            }
        }
        best
    };
    let mut best: Vec<Option<(f64, usize)>> = (0..p).map(|i| row_best(&sim, &active, i)).collect();

    loop {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..p {
            if !active[i] {
                continue;
            }
            if let Some((s, j)) = best[i] {
                if pick.is_none_or(|(ps, _, _)| s > ps) {
                    pick = Some((s, i, j));
                }
            }
        }
        let Some((s, a, b)) = pick else { break };
        if s < threshold {
            break;
        }
        // Merge b into a (a < b, so a stays the representative).
        active[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        for k in 0..p {
            if active[k] && k != a {
                let v = sim[a][k].min(sim[b][k]);
                sim[a][k] = v;
                sim[k][a] = v;
            }
        }
        for i in 0..p {
            if !active[i] {
                best[i] = None;
                continue;
            }
            let stale = i == a || matches!(best[i], Some((_, j)) if j == a || j == b);
            if stale {
                best[i] = row_best(&sim, &active, i);
            }
        }
    }

    let mut clusters: Vec<Vec<usize>> = members
        .into_iter()
        .zip(active)
        .filter(|(_, keep)| *keep)
        .map(|(mut m, _)| {
            m.sort_unstable();
            m
        })
        .collect();
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}

/// Selection rule that spreads equal total mass over the clusters with at
/// least one excluded member, split evenly among those members.
#[derive(Clone, Debug)]
pub struct DilutionSelection {
    clusters: Vec<Vec<usize>>,
}

impl DilutionSelection {
    pub fn from_clusters(clusters: Vec<Vec<usize>>) -> Self {
        Self { clusters }
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }
}

impl SelectionRule for DilutionSelection {
    fn weights(&self, model: &ModelVector, out: &mut [f64]) {
        out.iter_mut().for_each(|w| *w = 0.0);
        let available = self
            .clusters
            .iter()
            .filter(|c| c.iter().any(|&j| !model.contains(j)))
            .count();
        if available == 0 {
            return;
        }
        for cluster in &self.clusters {
            let free = cluster.iter().filter(|&&j| !model.contains(j)).count();
            if free == 0 {
                continue;
            }
            let share = 1.0 / (available as f64 * free as f64);
            for &j in cluster {
                if !model.contains(j) {
                    out[j] = share;
                }
            }
        }
    }
}

/// Dilution selection rule from a predictor correlation matrix.
pub fn dilution_prior(corr: &[Vec<f64>], threshold: f64) -> Result<DilutionSelection> {
    Ok(DilutionSelection::from_clusters(complete_linkage_clusters(corr, threshold)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{PfsPrior, SizeStopping, UniformSelection};
    use std::sync::Arc;

    fn identity(p: usize) -> Vec<Vec<f64>> {
        (0..p)
            .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn worked_cluster_example() {
        // Clusters {1,2,3}, {4,10}, {5,7,9}, {6,8} in 1-based labels.
        let clusters = vec![vec![0, 1, 2], vec![3, 9], vec![4, 6, 8], vec![5, 7]];
        let rule = DilutionSelection::from_clusters(clusters);
        let model = ModelVector::from_indices(10, &[0, 3, 4, 5, 7]).unwrap();
        let mut out = vec![0.0; 10];
        rule.weights(&model, &mut out);
        let sixth = 1.0 / 6.0;
        let want = [0.0, sixth, sixth, 0.0, 0.0, 0.0, sixth, 0.0, sixth, 1.0 / 3.0];
        for (g, w) in out.iter().zip(want) {
            assert!((g - w).abs() < 1e-15, "{out:?}");
        }
    }

    #[test]
    fn clustering_recovers_blocks() {
        // Two tight groups {0,1,2} and {3,4}.
        fn set(c: &mut [Vec<f64>], i: usize, j: usize, v: f64) {
            c[i][j] = v;
            c[j][i] = v;
        }
        let mut c = identity(5);
        set(&mut c, 0, 1, 0.95);
        set(&mut c, 1, 2, -0.97);
        set(&mut c, 0, 2, 0.93);
        set(&mut c, 3, 4, 0.99);
        set(&mut c, 2, 3, 0.5);
        let clusters = complete_linkage_clusters(&c, 0.9).unwrap();
        assert_eq!(clusters, vec![vec![0, 1, 2], vec![3, 4]]);

        // Complete linkage: {1,2} merge first, then 0-2 below the cut keeps 0
        // out even though 0-1 clears it.
        set(&mut c, 0, 2, 0.85);
        let clusters = complete_linkage_clusters(&c, 0.9).unwrap();
        assert_eq!(clusters, vec![vec![0], vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn ties_break_toward_smallest_pair() {
        // All off-diagonal similarities equal: 0 and 1 merge first, then the
        // merged cluster {0,1} takes 2, and so on.
        let p = 4;
        let c: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.95 }).collect())
            .collect();
        assert_eq!(complete_linkage_clusters(&c, 0.9).unwrap(), vec![vec![0, 1, 2, 3]]);
        assert_eq!(complete_linkage_clusters(&c, 0.96).unwrap().len(), 4);
    }

    #[test]
    fn singletons_match_uniform() {
        let p = 6;
        let rule = dilution_prior(&identity(p), 0.9).unwrap();
        assert_eq!(rule.clusters().len(), p);
        let stop = Arc::new(SizeStopping::new(vec![0.3; p + 1]));
        let dil = PfsPrior::new(p, stop.clone(), Arc::new(rule));
        let uni = PfsPrior::new(p, stop, Arc::new(UniformSelection::new(p)));
        for m in crate::model::enumerate_models(p).unwrap().filter(|m| !m.is_full()) {
            let (a, b) = (dil.lambda(&m).unwrap(), uni.lambda(&m).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        let mut c = identity(3);
        c[0][1] = 0.5;
        assert!(dilution_prior(&c, 0.9).is_err());
        assert!(dilution_prior(&identity(3), 0.0).is_err());
        assert!(dilution_prior(&identity(3), 1.5).is_err());
    }
}
