use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve by the rank-sum statistic: the probability
/// that a random positive outscores a random negative, ties counting 1/2.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric(format!("score {bad}")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC-AUC needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum keeps tied average ranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean (i + j + 2) / 2.
        let twice_mean = (i + j + 2) as u128;
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += positives * twice_mean;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    // U = R - p(p+1)/2, AUC = U / (p n).
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroAuc {
    pub value: f64,
    pub per_class: Vec<Option<f64>>,
    /// Classes left out because one side of the one-vs-rest split was empty.
    pub skipped: Vec<usize>,
}

/// Mean one-vs-rest ROC-AUC over classes; `scores[i][c]` scores sample i
/// for class c.
pub fn macro_auc(labels: &[u32], scores: &[Vec<f64>]) -> Result<MacroAuc> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let classes = scores.first().map_or(0, Vec::len);
    if let Some(row) = scores.iter().find(|row| row.len() != classes) {
        return Err(Error::DimensionMismatch {
            expected: classes,
            got: row.len(),
        });
    }
    let mut per_class = Vec::with_capacity(classes);
    let mut skipped = Vec::new();
    for c in 0..classes {
        let is_c: Vec<bool> = labels.iter().map(|&l| l as usize == c).collect();
        let column: Vec<f64> = scores.iter().map(|row| row[c]).collect();
        match roc_auc(&is_c, &column) {
            Ok(auc) => per_class.push(Some(auc)),
            Err(Error::UndefinedMetric(_)) if column.iter().all(|s| !s.is_nan()) => {
                per_class.push(None);
                skipped.push(c);
            }
            Err(e) => return Err(e),
        }
    }
    // With two labels present every present class has both sides.
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "macro AUC needs at least 2 classes, {} present",
            present.len()
        )));
    }
    Ok(MacroAuc {
        value: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_examples() {
        assert_eq!(
            roc_auc(&[true, true, false, false], &[0.9, 0.8, 0.2, 0.1]).unwrap(),
            1.0
        );
        assert_eq!(roc_auc(&[true, false, true, false], &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[true, false, true, false], &[0.9, 0.8, 0.7, 0.1]).unwrap(),
            0.75
        );
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            roc_auc(&[true, true], &[0.1, 0.2]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(roc_auc(&[true], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn ties_across_classes() {
        // Pairs: (0.5 vs 0.5) tie, (0.5 vs 0.1) win, (0.9 vs 0.5) win, (0.9 vs 0.1) win.
        let auc = roc_auc(&[true, false, true, false], &[0.5, 0.5, 0.9, 0.1]).unwrap();
        assert_eq!(auc, 3.5 / 4.0);
    }

    #[test]
    fn macro_examples() {
        let labels = [0, 1, 2, 1];
        let perfect: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..3).map(|c| f64::from(c == l)).collect())
            .collect();
        assert_eq!(macro_auc(&labels, &perfect).unwrap().value, 1.0);
        let flat = vec![vec![0.3; 3]; 4];
        assert_eq!(macro_auc(&labels, &flat).unwrap().value, 0.5);

        let scores = [0.9, 0.2, 0.4, 0.6];
        let bin = [1, 0, 0, 1];
        let two: Vec<Vec<f64>> = scores.iter().map(|&s| vec![1.0 - s, s]).collect();
        let direct = roc_auc(&bin.map(|l| l == 1), &scores).unwrap();
        let m = macro_auc(&bin, &two).unwrap();
        assert_eq!(m.per_class[1], Some(direct));
        assert_eq!(m.value, direct);
    }

    #[test]
    fn absent_classes_are_skipped() {
        let labels = [0, 1, 0, 1];
        let scores = vec![vec![0.9, 0.1, 0.0, 0.3]; 4];
        let m = macro_auc(&labels, &scores).unwrap();
        assert_eq!(m.skipped, vec![2, 3]);
        assert_eq!(m.per_class.len(), 4);
        assert!(macro_auc(&[0, 0], &[vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.3]]).is_err());
    }
}
