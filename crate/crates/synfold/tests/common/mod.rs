//! Shared random generators for the integration suites. Seeded explicitly
//! so every run sees the same corpus.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use synfold::rat::{ratio, Rat};
use synfold::space::{DistanceMatrix, PointId};
use synfold::tree::Dendrogram;

/// Random dendrogram with 3..=12 leaves and strictly increasing random
/// rational merge heights.
pub fn random_dendrogram(rng: &mut StdRng) -> Dendrogram {
    let leaves = rng.gen_range(3..=12);
    let mut clusters: Vec<Dendrogram> = (0..leaves)
        .map(|i| Dendrogram::leaf(PointId::new(format!("l{i:02}"))))
        .collect();
    let mut height: Rat = ratio(rng.gen_range(1..=8), rng.gen_range(1..=4));
    while clusters.len() > 1 {
        let k = rng.gen_range(2..=clusters.len());
        clusters.shuffle(rng);
        let merged: Vec<Dendrogram> = clusters.drain(..k).collect();
        clusters.push(Dendrogram::node(height.clone(), merged));
        height += ratio(rng.gen_range(1..=8), rng.gen_range(1..=4));
    }
    clusters.pop().expect("one cluster remains")
}

/// Random symmetric nonnegative matrix with up to `max_points` points;
/// occasionally contains zero off-diagonal entries.
pub fn random_matrix(rng: &mut StdRng, max_points: usize) -> DistanceMatrix {
    let n = rng.gen_range(1..=max_points);
    let points: Vec<PointId> = (0..n).map(|i| PointId::new(format!("q{i}"))).collect();
    let mut d = vec![vec![ratio(0, 1); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let value = ratio(rng.gen_range(0..=12), rng.gen_range(1..=4));
            d[i][j] = value.clone();
            d[j][i] = value;
        }
    }
    DistanceMatrix::new(points, d).expect("generated matrix is well-formed")
}
