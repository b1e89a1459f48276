use serde::{Deserialize, Serialize};

use super::tune::CvPoint;

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub feature_set: String,
    pub group: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    /// Columns in the input feature table.
    pub n_features: usize,
    /// Columns seen by ridge after any PCA stage.
    pub n_model_features: usize,
    pub pca_k: Option<usize>,
    /// `None` for the mean baseline.
    pub lambda: Option<f64>,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// `None` when predictions are constant (always for the baseline).
    pub train_corr: Option<f64>,
    pub test_corr: Option<f64>,
    pub cv_curve: Vec<CvPoint>,
    /// Caveat shown next to the row, e.g. for mixed-scale outcomes.
    pub note: Option<String>,
    /// SHA-256 over the label, config, feature values and outcome.
    pub fingerprint: String,
}

pub const CSV_HEADER: [&str; 15] = [
    "name",
    "feature_set",
    "group",
    "train_rmse",
    "test_rmse",
    "train_corr",
    "test_corr",
    "lambda",
    "n_train",
    "n_test",
    "n_features",
    "n_model_features",
    "pca_k",
    "note",
    "fingerprint",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Header plus one row per report. Floats use the shortest round-trip form.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.feature_set.clone(),
            opt(&r.group),
            r.train_rmse.to_string(),
            r.test_rmse.to_string(),
            opt(&r.train_corr),
            opt(&r.test_corr),
            opt(&r.lambda),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.n_features.to_string(),
            r.n_model_features.to_string(),
            opt(&r.pca_k),
            opt(&r.note),
            r.fingerprint.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 input")
}

pub fn reports_to_json(reports: &[EvalReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

/// RMSE (train, test) then correlation (train, test), with a bold heading
/// row whenever the group changes.
pub fn reports_to_markdown(title: &str, reports: &[EvalReport]) -> String {
    let f = |v: f64| format!("{v:.3}");
    let fo = |v: Option<f64>| v.map_or("-".to_string(), f);
    let mut out = format!("## {title}\n\n");
    out.push_str("| | RMSE Train | RMSE Test | Correlation Train | Correlation Test |\n");
    out.push_str("|---|---:|---:|---:|---:|\n");
    let mut group: Option<&str> = None;
    for r in reports {
        if r.group.is_some() && r.group.as_deref() != group {
            out.push_str(&format!("| **{}** | | | | |\n", r.group.as_deref().unwrap_or("")));
        }
        group = r.group.as_deref();
        let name = match &r.note {
            Some(n) => format!("{} ({n})", r.name),
            None => r.name.clone(),
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            name.replace('|', "\\|"),
            f(r.train_rmse),
            f(r.test_rmse),
            fo(r.train_corr),
            fo(r.test_corr)
        ));
    }
    out
}
