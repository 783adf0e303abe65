//! Shared inputs for the criterion benchmarks.

use nalgebra::DMatrix;
use qabench_core::data::{generate_synthetic_users, SyntheticProfile, UserFeatureTable};

/// Seeded synthetic user table.
pub fn users(rows: usize) -> UserFeatureTable {
    generate_synthetic_users(rows, 42, &SyntheticProfile::default()).expect("valid profile")
}

/// Complete synthetic users: predictor matrix and the Answers column.
pub fn answers_problem(rows: usize, predictors: &[&str]) -> (DMatrix<f64>, Vec<f64>) {
    let t = generate_synthetic_users(rows, 42, &SyntheticProfile::complete()).expect("valid profile");
    let x = t.to_matrix(predictors).expect("complete columns");
    let y = t.column_values("Answers").expect("target column").to_vec();
    (x, y)
}

/// A post body with `paragraphs` paragraphs and one commented Python snippet.
pub fn post_html(paragraphs: usize) -> String {
    let mut s = String::new();
    for i in 0..paragraphs {
        s.push_str(&format!("<p>Paragraph {i}: how do I read a file, see https://docs.python.org/3/ (thanks!)</p>"));
    }
    s.push_str("<pre><code>def read(path):\n    # open it\n    with open(path) as f:\n        return f.read()\n</code></pre>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        assert_eq!(users(50).n_rows(), 50);
        let (x, y) = answers_problem(40, &["Comments", "Questions"]);
        assert_eq!((x.nrows(), x.ncols(), y.len()), (40, 2, 40));
        assert!(post_html(2).contains("<pre><code>"));
    }
}
