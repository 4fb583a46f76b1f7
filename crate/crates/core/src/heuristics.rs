//! Baseline rank-one heuristics: column majority (`average`) and a random
//! seed column (`partition`). Fractions are over observed entries only.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::binmat::{RowSubsetView, Tile};

/// Columns with a strict majority of observed ones form `v`; rows with an
/// observed one in any of those columns form `u`.
pub fn average_rank1(b: &RowSubsetView<'_>) -> Tile {
    let mut ones = vec![0usize; b.n_cols()];
    let mut seen = vec![0usize; b.n_cols()];
    for (_, j, bit) in b.entries() {
        seen[j] += 1;
        ones[j] += usize::from(bit);
    }
    let v: Vec<bool> = ones.iter().zip(&seen).map(|(&o, &s)| 2 * o > s).collect();
    let u = (0..b.n_rows())
        .map(|i| b.row(i).iter().any(|&(j, bit)| bit && v[j]))
        .collect();
    Tile { u, v }
}

/// Picks a random column with an observed one; its observed ones give `u`
/// and `v` is the column mean over those rows thresholded at ½ (ties go
/// to 1). Returns the empty tile when no column has an observed one.
pub fn partition_rank1<R: Rng + ?Sized>(b: &RowSubsetView<'_>, rng: &mut R) -> Tile {
    let mut positive = vec![false; b.n_cols()];
    for (_, j, bit) in b.entries() {
        positive[j] |= bit;
    }
    let candidates: Vec<usize> = (0..b.n_cols()).filter(|&j| positive[j]).collect();
    let Some(&pick) = candidates.choose(rng) else {
        return Tile::empty(b.n_rows(), b.n_cols());
    };
    let u: Vec<bool> = (0..b.n_rows())
        .map(|i| b.row(i).iter().any(|&(j, bit)| j == pick && bit))
        .collect();
    let mut ones = vec![0usize; b.n_cols()];
    let mut seen = vec![0usize; b.n_cols()];
    for (i, j, bit) in b.entries() {
        if u[i] {
            seen[j] += 1;
            ones[j] += usize::from(bit);
        }
    }
    let v = ones.iter().zip(&seen).map(|(&o, &s)| s > 0 && 2 * o >= s).collect();
    Tile { u, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ObservedBinaryMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(rows: &[&[u8]]) -> ObservedBinaryMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        ObservedBinaryMatrix::from_dense(&rows).unwrap()
    }

    #[test]
    fn average_examples() {
        let ones = dense(&[&[1, 1], &[1, 1]]);
        assert_eq!(average_rank1(&ones.view()), Tile { u: vec![true; 2], v: vec![true; 2] });

        let zeros = dense(&[&[0, 0], &[0, 0]]);
        assert_eq!(average_rank1(&zeros.view()), Tile::empty(2, 2));

        let col = dense(&[&[1], &[1], &[0]]);
        let t = average_rank1(&col.view());
        assert_eq!(t.v, vec![true]);
        assert_eq!(t.u, vec![true, true, false]);

        // an exact half is not a majority
        let half = dense(&[&[1], &[0]]);
        assert_eq!(average_rank1(&half.view()).v, vec![false]);
    }

    #[test]
    fn average_ignores_missing() {
        // column 0 is 1 on its only observed entry; column 1 is never seen
        let m = ObservedBinaryMatrix::from_triplets(2, 2, [(0, 0, true)]).unwrap();
        let t = average_rank1(&m.view());
        assert_eq!(t, Tile { u: vec![true, false], v: vec![true, false] });
    }

    #[test]
    fn partition_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zeros = dense(&[&[0, 0], &[0, 0]]);
        assert_eq!(partition_rank1(&zeros.view(), &mut rng), Tile::empty(2, 2));

        let ones = dense(&[&[1, 1, 1], &[1, 1, 1]]);
        for _ in 0..5 {
            assert_eq!(
                partition_rank1(&ones.view(), &mut rng),
                Tile { u: vec![true; 2], v: vec![true; 3] }
            );
        }

        // planted tile on rows {0,1} x cols {0,1}; every positive column is inside it
        let planted = dense(&[&[1, 1, 0], &[1, 1, 0], &[0, 0, 0]]);
        let want = Tile { u: vec![true, true, false], v: vec![true, true, false] };
        for _ in 0..5 {
            assert_eq!(partition_rank1(&planted.view(), &mut rng), want);
        }
    }

    #[test]
    fn partition_half_rounds_up() {
        // column 0 selects both rows; column 1 is 1 on exactly half of them
        let m = dense(&[&[1, 1], &[1, 0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = (0..20)
            .map(|_| partition_rank1(&m.view(), &mut rng))
            .find(|t| t.u == vec![true, true])
            .unwrap();
        assert_eq!(t.v, vec![true, true]);
    }

    #[test]
    fn partition_is_seed_deterministic() {
        let m = dense(&[&[1, 0, 1, 0], &[0, 1, 1, 0], &[1, 1, 0, 1]]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10).map(|_| partition_rank1(&m.view(), &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
    }
}
