use crate::data::UserFeatureTable;
use crate::error::Result;

/// Replaces every masked cell of `column` with 0.0 and clears its mask.
pub fn impute_zero(table: &UserFeatureTable, column: &str) -> Result<UserFeatureTable> {
    let c = table.schema().require(column)?;
    if !table.has_missing(c) {
        return Ok(table.clone());
    }
    let values: Vec<f64> = (0..table.n_rows()).map(|r| table.get(r, c).unwrap_or(0.0)).collect();
    table.with_column(c, values, vec![false; table.n_rows()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnRole, ColumnSpec, FeatureSchema};
    use crate::error::Error;

    fn one_col(values: Vec<Option<f64>>) -> UserFeatureTable {
        let s = FeatureSchema::new(vec![ColumnSpec::new("x", ColumnRole::Predictor, &[])]).unwrap();
        UserFeatureTable::from_options(s, vec![values]).unwrap()
    }

    #[test]
    fn masked_cells_become_zero() {
        let t = impute_zero(&one_col(vec![None, Some(3.0), None]), "x").unwrap();
        assert_eq!(t.column_values("x").unwrap(), &[0.0, 3.0, 0.0]);
        assert!(!t.has_missing(0));
    }

    #[test]
    fn all_missing_column() {
        let t = impute_zero(&one_col(vec![None, None]), "x").unwrap();
        assert_eq!(t.column_values("x").unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn complete_column_is_fixed_point() {
        let t0 = one_col(vec![Some(1.5), Some(-2.0)]);
        let t1 = impute_zero(&t0, "x").unwrap();
        assert_eq!(t0, t1);
        assert_eq!(impute_zero(&t1, "x").unwrap(), t1);
    }

    #[test]
    fn unknown_column() {
        assert!(matches!(impute_zero(&one_col(vec![None]), "y"), Err(Error::Schema(_))));
    }
}
