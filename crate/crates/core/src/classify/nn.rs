use super::{check_query, check_training};
use crate::cube_io::FeatureMatrix;
use crate::error::Result;
use crate::par;

/// 1-NN under Euclidean distance; ties go to the lowest training row.
pub fn nn_classify(train: &FeatureMatrix, labels: &[u32], query: &FeatureMatrix) -> Result<Vec<u32>> {
    check_training(train, labels)?;
    check_query(train, query)?;
    let rows: Vec<usize> = (0..query.rows()).collect();
    Ok(par::map_collect(&rows, |&q| {
        let x = query.row(q);
        let mut best = (f64::INFINITY, 0usize);
        for t in 0..train.rows() {
            let d: f64 = train.row(t).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, t);
            }
        }
        labels[best.1]
    }))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::cube_io::Stage;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> FeatureMatrix {
        FeatureMatrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Stage::Reduced,
        )
        .unwrap()
    }

    #[test]
    fn single_training_row_wins_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = random(10, 3, &mut rng);
        let t = random(1, 3, &mut rng);
        assert_eq!(nn_classify(&t, &[3], &q).unwrap(), vec![3; 10]);
    }

    #[test]
    fn exact_match_and_ties() {
        let t = FeatureMatrix::new(3, 1, vec![0.0, 2.0, 2.0], Stage::Reduced).unwrap();
        let q = FeatureMatrix::new(3, 1, vec![2.0, 1.0, -5.0], Stage::Reduced).unwrap();
        // 1.0 is equidistant from rows 0 and 1: lowest index wins
        assert_eq!(nn_classify(&t, &[7, 8, 9], &q).unwrap(), vec![8, 7, 7]);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(nn_classify(&random(4, 2, &mut rng), &[1, 1, 2, 2], &random(3, 3, &mut rng)).is_err());
        assert!(nn_classify(&random(4, 2, &mut rng), &[1, 1, 2], &random(3, 2, &mut rng)).is_err());
        assert!(nn_classify(&FeatureMatrix::empty(0, Stage::Reduced), &[], &random(3, 0, &mut rng)).is_err());
    }
}
