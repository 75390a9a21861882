//! Run metrics, the pairwise win probability and the cross-function
//! comparison matrix.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Scalar;

/// Running minimum of a curve.
pub fn best_so_far<S: Scalar>(curve: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(curve.len());
    let mut best = S::infinity();
    for &v in curve {
        if v < best {
            best = v;
        }
        out.push(best);
    }
    out
}

/// Composite trapezoid integral (unit spacing) of the best-so-far envelope.
/// A single point has zero area.
pub fn auc<S: Scalar>(curve: &[S]) -> Result<S> {
    if curve.is_empty() {
        return Err(Error::InvalidArgument("auc of an empty curve".into()));
    }
    let env = best_so_far(curve);
    let half = S::lit(0.5);
    Ok(env.windows(2).map(|w| half * (w[0] + w[1])).sum())
}

/// Lowest fitness seen in the run.
pub fn best_of_run<S: Scalar>(curve: &[S]) -> Result<S> {
    curve
        .iter()
        .copied()
        .reduce(|a, b| if b < a { b } else { a })
        .ok_or_else(|| Error::InvalidArgument("best_of_run of an empty curve".into()))
}

/// p(A < B) = (1/(n·m)) Σ_i Σ_j 1[A_i < B_j]; ties count as losses.
pub fn win_probability<S: Scalar>(a: &[S], b: &[S]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("win probability needs non-empty samples".into()));
    }
    let mut sorted_b: Vec<S> = b.to_vec();
    sorted_b.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    // For each A_i count B_j strictly greater via binary search.
    let wins: usize = a
        .iter()
        .map(|&ai| sorted_b.len() - sorted_b.partition_point(|&bj| bj <= ai))
        .sum();
    Ok(wins as f64 / (a.len() * b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Auc,
    Best,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::Best => "best",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auc" => Ok(Metric::Auc),
            "best" | "best_of_run" => Ok(Metric::Best),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

/// Rows are variants, columns functions; a cell is p(variant < opponent)
/// or `None` when runs are missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMatrix {
    pub metric: Metric,
    pub opponent: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ComparisonMatrix {
    /// |{cells > 0.5}| / |{cells ≠ 0.5}|, `None` when every present cell is 0.5.
    pub fn row_ratio(&self, row: usize) -> Option<f64> {
        let present = self.cells[row].iter().flatten();
        let (mut wins, mut decided) = (0usize, 0usize);
        for &p in present {
            if p != 0.5 {
                decided += 1;
                if p > 0.5 {
                    wins += 1;
                }
            }
        }
        (decided > 0).then(|| wins as f64 / decided as f64)
    }

    pub fn ratios(&self) -> Vec<Option<f64>> {
        (0..self.rows.len()).map(|r| self.row_ratio(r)).collect()
    }

    /// CSV: `variant,ratio,<function columns…>`, probabilities with 6 decimals,
    /// absent values as `n/a`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["variant".to_string(), "ratio".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (r, name) in self.rows.iter().enumerate() {
            let mut rec = vec![name.clone(), fmt_cell(self.row_ratio(r))];
            rec.extend(self.cells[r].iter().map(|&c| fmt_cell(c)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            metric: &'a str,
            opponent: &'a str,
            columns: &'a [String],
            rows: Vec<Row<'a>>,
        }
        #[derive(Serialize)]
        struct Row<'a> {
            variant: &'a str,
            ratio: Option<f64>,
            cells: &'a [Option<f64>],
        }
        let doc = Doc {
            metric: self.metric.name(),
            opponent: &self.opponent,
            columns: &self.columns,
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(r, v)| Row { variant: v, ratio: self.row_ratio(r), cells: &self.cells[r] })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("matrix serializes")
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(json_path, self.to_json() + "\n")?;
        Ok(())
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(p) => format!("{p:.6}"),
        None => "n/a".to_string(),
    }
}

/// Builds the matrix from per-cell metric samples: `variants[r][c]` and
/// `opponent[c]` are the per-run metric vectors (or `None` if missing).
pub fn build_comparison(
    metric: Metric,
    opponent_name: &str,
    variant_names: &[String],
    columns: &[String],
    variants: &[Vec<Option<Vec<f64>>>],
    opponent: &[Option<Vec<f64>>],
) -> Result<ComparisonMatrix> {
    if variants.len() != variant_names.len() || opponent.len() != columns.len() {
        return Err(Error::InvalidArgument("comparison shape mismatch".into()));
    }
    let mut cells = Vec::with_capacity(variants.len());
    for row in variants {
        if row.len() != columns.len() {
            return Err(Error::InvalidArgument("comparison shape mismatch".into()));
        }
        let r = row
            .iter()
            .zip(opponent)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => win_probability(a, b).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(r);
    }
    Ok(ComparisonMatrix {
        metric,
        opponent: opponent_name.to_string(),
        rows: variant_names.to_vec(),
        columns: columns.to_vec(),
        cells,
    })
}
