use std::fmt::Write as _;

use crate::error::{IapError, Result};

/// Accuracy summary over classes `1..=classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Recall per class; `None` for classes with no test sample.
    pub per_class_recall: Vec<Option<f64>>,
    /// `confusion[t][p]`: samples of true class `t+1` predicted as `p+1`.
    pub confusion: Vec<Vec<u64>>,
}

/// Scores predictions against ground truth. Labels are class ids starting at 1.
pub fn evaluate(pred: &[u32], truth: &[u32]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(IapError::dims(format!(
            "{} predictions for {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(IapError::invalid("nothing to evaluate"));
    }
    if pred.iter().chain(truth).any(|&c| c == 0) {
        return Err(IapError::invalid("class ids start at 1; found 0"));
    }
    let classes = pred.iter().chain(truth).copied().max().unwrap_or(0) as usize;
    let mut confusion = vec![vec![0u64; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t as usize - 1][p as usize - 1] += 1;
    }
    let total = pred.len() as f64;
    let correct: u64 = (0..classes).map(|c| confusion[c][c]).sum();
    let oa = correct as f64 / total;
    let row_sums: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..classes).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();
    let per_class_recall: Vec<Option<f64>> = (0..classes)
        .map(|c| (row_sums[c] > 0).then(|| confusion[c][c] as f64 / row_sums[c] as f64))
        .collect();
    let present: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
    let aa = present.iter().sum::<f64>() / present.len() as f64;
    let pe = row_sums
        .iter()
        .zip(&col_sums)
        .map(|(&r, &c)| r as f64 * c as f64)
        .sum::<f64>()
        / (total * total);
    let kappa = if (1.0 - pe).abs() < 1e-15 {
        // every sample in one class on both sides
        if oa == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - pe) / (1.0 - pe)
    };
    Ok(Metrics {
        oa,
        aa,
        kappa,
        per_class_recall,
        confusion,
    })
}

impl Metrics {
    pub fn classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn samples(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Plain-text report: scalars, a per-class table and the confusion matrix.
    pub fn render(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {title}");
        let _ = writeln!(s, "classes = {}", self.classes());
        let _ = writeln!(s, "samples = {}", self.samples());
        let _ = writeln!(s, "OA = {:.6}", self.oa);
        let _ = writeln!(s, "AA = {:.6}", self.aa);
        let _ = writeln!(s, "kappa = {:.6}", self.kappa);
        let _ = writeln!(s);
        let _ = writeln!(s, "class\tsamples\trecall");
        for (c, r) in self.per_class_recall.iter().enumerate() {
            let n: u64 = self.confusion[c].iter().sum();
            match r {
                Some(r) => {
                    let _ = writeln!(s, "{}\t{}\t{:.6}", c + 1, n, r);
                }
                None => {
                    let _ = writeln!(s, "{}\t0\t-", c + 1);
                }
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "confusion (rows: truth, columns: prediction)");
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn perfect_prediction() {
        let t = [1, 2, 3, 2, 1];
        let m = evaluate(&t, &t).unwrap();
        assert_eq!((m.oa, m.aa, m.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn chance_agreement() {
        let mut truth = vec![1u32; 50];
        truth.extend(vec![2u32; 50]);
        let pred: Vec<u32> = (0..100).map(|i| if (i % 50) < 25 { 1 } else { 2 }).collect();
        let m = evaluate(&pred, &truth).unwrap();
        assert_eq!(m.confusion, vec![vec![25, 25], vec![25, 25]]);
        assert_eq!(m.oa, 0.5);
        assert!(m.kappa.abs() < 1e-15);
    }

    /// Kappa from the confusion matrix alone, written out longhand.
    #[allow(clippy::needless_range_loop)]
    fn kappa_oracle(c: &[Vec<u64>]) -> f64 {
        let k = c.len();
        let mut n = 0.0;
        let mut diag = 0.0;
        for i in 0..k {
            for j in 0..k {
                n += c[i][j] as f64;
            }
            diag += c[i][i] as f64;
        }
        let mut chance = 0.0;
        for i in 0..k {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..k {
                row += c[i][j] as f64;
                col += c[j][i] as f64;
            }
            chance += (row / n) * (col / n);
        }
        (diag / n - chance) / (1.0 - chance)
    }

    #[test]
    fn kappa_matches_longhand_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(10..200);
            let truth: Vec<u32> = (0..n).map(|_| rng.random_range(1..=3)).collect();
            let pred: Vec<u32> = truth
                .iter()
                .map(|&t| {
                    if rng.random_bool(0.6) {
                        t
                    } else {
                        rng.random_range(1..=3)
                    }
                })
                .collect();
            let m = evaluate(&pred, &truth).unwrap();
            assert!((m.kappa - kappa_oracle(&m.confusion)).abs() < 1e-12);
        }
    }

    #[test]
    fn aa_skips_classes_missing_from_truth() {
        let m = evaluate(&[1, 3, 3], &[1, 1, 1]).unwrap();
        assert_eq!(m.per_class_recall, vec![Some(1.0 / 3.0), None, None]);
        assert!((m.aa - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn relabeling_preserves_oa_and_kappa() {
        let truth = [1, 2, 3, 3, 2, 1, 1, 2];
        let pred = [1, 3, 3, 2, 2, 1, 2, 2];
        let perm = |c: u32| [0, 3, 1, 2][c as usize];
        let a = evaluate(&pred, &truth).unwrap();
        let pt: Vec<u32> = truth.iter().map(|&c| perm(c)).collect();
        let pp: Vec<u32> = pred.iter().map(|&c| perm(c)).collect();
        let b = evaluate(&pp, &pt).unwrap();
        assert_eq!(a.oa, b.oa);
        assert!((a.kappa - b.kappa).abs() < 1e-15);
    }

    #[test]
    fn errors_and_report() {
        assert!(evaluate(&[1], &[1, 2]).is_err());
        assert!(evaluate(&[0], &[1]).is_err());
        let text = evaluate(&[1, 2], &[1, 1]).unwrap().render("nn");
        assert!(text.starts_with("# nn\n"));
        assert!(text.contains("OA = 0.500000"));
        assert!(text.contains("2\t0\t-"));
    }
}
