//! Removal of constant and exactly duplicated columns after imputation.

use std::collections::BTreeMap;

use crate::matrix::FeatureMatrix;

/// Names of columns that are constant or bitwise duplicates of an
/// earlier-named column, decided on the given (complete) matrix.
pub fn redundant_constant_columns(m: &FeatureMatrix) -> Vec<String> {
    let mut dropped = Vec::new();
    let mut seen: BTreeMap<Vec<u64>, String> = BTreeMap::new();
    // Visit columns in name order so the later name of a duplicate pair drops.
    let mut order: Vec<usize> = (0..m.n_cols()).collect();
    order.sort_by(|&a, &b| m.feature_names[a].cmp(&m.feature_names[b]));
    for c in order {
        let col: Vec<f64> = (0..m.n_rows())
            .map(|r| m.get(r, c).unwrap_or(f64::NAN))
            .collect();
        let constant = col.windows(2).all(|w| w[0].to_bits() == w[1].to_bits());
        if constant && !col.is_empty() {
            dropped.push(m.feature_names[c].clone());
            continue;
        }
        let key: Vec<u64> = col.iter().map(|v| v.to_bits()).collect();
        if let std::collections::btree_map::Entry::Vacant(e) = seen.entry(key) {
            e.insert(m.feature_names[c].clone());
        } else {
            dropped.push(m.feature_names[c].clone());
        }
    }
    dropped.sort();
    dropped
}

/// Drops the named columns, preserving the order of the rest.
pub fn drop_columns(m: &FeatureMatrix, names: &[String]) -> FeatureMatrix {
    let keep: Vec<usize> = (0..m.n_cols())
        .filter(|&c| !names.contains(&m.feature_names[c]))
        .collect();
    m.select_columns(&keep)
}

/// Removes constant and duplicate columns from one matrix, returning the
/// pruned matrix and the dropped names.
pub fn drop_redundant_constant(m: &FeatureMatrix) -> (FeatureMatrix, Vec<String>) {
    let dropped = redundant_constant_columns(m);
    (drop_columns(m, &dropped), dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(names: &[&str], rows: &[Vec<f64>]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(
            names.iter().map(|s| s.to_string()).collect(),
            (0..rows.len()).map(|i| format!("d{i}")).collect(),
            vec![],
        );
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        m
    }

    #[test]
    fn constant_column_dropped() {
        let m = matrix(
            &["x", "const"],
            &[vec![1.0, 3.0], vec![2.0, 3.0], vec![5.0, 3.0]],
        );
        let (out, dropped) = drop_redundant_constant(&m);
        assert_eq!(dropped, vec!["const".to_string()]);
        assert_eq!(out.feature_names, vec!["x".to_string()]);
    }

    #[test]
    fn duplicate_keeps_first_by_name() {
        let m = matrix(
            &["b_copy", "a_original"],
            &[vec![1.0, 1.0], vec![2.0, 2.0], vec![7.0, 7.0]],
        );
        let (out, dropped) = drop_redundant_constant(&m);
        assert_eq!(dropped, vec!["b_copy".to_string()]);
        assert_eq!(out.feature_names, vec!["a_original".to_string()]);
    }

    #[test]
    fn clean_matrix_unchanged() {
        let m = matrix(&["x", "y"], &[vec![1.0, 2.0], vec![3.0, 1.0]]);
        let (out, dropped) = drop_redundant_constant(&m);
        assert!(dropped.is_empty());
        assert_eq!(out.feature_names, m.feature_names);
        assert_eq!(out.values, m.values);
    }
}
