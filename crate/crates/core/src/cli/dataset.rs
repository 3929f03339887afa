//! Input parsing: dense CSV, MatrixMarket coordinate files and rating
//! triples, plus the deterministic train/validation/test split.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::objective::TargetProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    DenseCsv,
    MatrixMarket,
    RatingTriples,
}

impl FromStr for SourceFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "dense-csv" | "csv" => Ok(Self::DenseCsv),
            "matrix-market" | "mtx" => Ok(Self::MatrixMarket),
            "triples" | "rating-triples" => Ok(Self::RatingTriples),
            other => Err(CliError::Usage(format!(
                "unknown format '{other}' (expected dense-csv, matrix-market or triples)"
            ))),
        }
    }
}

/// Split assignment per observed entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

/// An ingested matrix: coordinates with values, 0-indexed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub format: SourceFormat,
    pub shape: (usize, usize),
    pub entries: Vec<(usize, usize, f64)>,
    /// True when every cell of `shape` is present (dense CSV input).
    pub dense: bool,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn load(path: &Path, format: Option<SourceFormat>) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let format = match format {
            Some(f) => f,
            None => sniff_format(&text),
        };
        match format {
            SourceFormat::DenseCsv => parse_dense_csv(&text),
            SourceFormat::MatrixMarket => parse_matrix_market(&text),
            SourceFormat::RatingTriples => parse_rating_triples(&text),
        }
    }

    /// Dense materialization (unobserved cells are zero).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.shape.0, self.shape.1);
        for &(r, c, v) in &self.entries {
            out[(r, c)] = v;
        }
        out
    }

    /// Fully observed problem from the dense materialization.
    pub fn to_full_problem(&self, symmetric: bool) -> Result<TargetProblem, CliError> {
        let y = self.to_dense();
        let problem = if symmetric {
            TargetProblem::full_symmetric(y)
        } else {
            TargetProblem::full(y)
        };
        problem.map_err(|e| CliError::Usage(format!("input incompatible with flags: {e}")))
    }

    /// Deterministic split assignment: a seeded shuffle of entry indices,
    /// assigned to train/validation/test by the requested fractions. A pure
    /// function of the entry order and the seed.
    pub fn split(&self, fractions: (f64, f64, f64), seed: u64) -> Vec<SplitTag> {
        let n = self.entries.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let n_train = (fractions.0 * n as f64).floor() as usize;
        let n_val = (fractions.1 * n as f64).floor() as usize;
        let mut tags = vec![SplitTag::Test; n];
        for (slot, &index) in order.iter().enumerate() {
            tags[index] = if slot < n_train {
                SplitTag::Train
            } else if slot < n_train + n_val {
                SplitTag::Validation
            } else {
                SplitTag::Test
            };
        }
        tags
    }
}

fn sniff_format(text: &str) -> SourceFormat {
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or_default();
    if first.trim_start().starts_with("%%MatrixMarket") {
        return SourceFormat::MatrixMarket;
    }
    if first.contains("::") {
        return SourceFormat::RatingTriples;
    }
    if !first.contains(',') {
        let tokens: Vec<&str> = first.split_whitespace().collect();
        if (tokens.len() == 3 || tokens.len() == 4)
            && tokens[0].parse::<u64>().is_ok()
            && tokens[1].parse::<u64>().is_ok()
            && tokens[2].parse::<f64>().is_ok()
        {
            return SourceFormat::RatingTriples;
        }
    }
    SourceFormat::DenseCsv
}

fn parse_dense_csv(text: &str) -> Result<Dataset, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut warnings = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let mut pending: Option<(usize, &str)> = lines.next();
    // Header auto-detection: a non-numeric first line is skipped.
    if let Some((_, first)) = pending {
        let numeric = first
            .split(',')
            .all(|tok| tok.trim().parse::<f64>().is_ok());
        if !numeric {
            warnings.push("skipped non-numeric header line".into());
            pending = lines.next();
        }
    }

    while let Some((line_no, line)) = pending {
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect();
        let row = row.map_err(|e| {
            CliError::Parse(format!("line {}: bad number: {e}", line_no + 1))
        })?;
        if let Some(previous) = rows.first() {
            if row.len() != previous.len() {
                return Err(CliError::Parse(format!(
                    "line {}: expected {} columns, got {}",
                    line_no + 1,
                    previous.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
        pending = lines.next();
    }

    if rows.is_empty() {
        return Err(CliError::Parse("empty CSV input".into()));
    }
    let shape = (rows.len(), rows[0].len());
    let mut entries = Vec::with_capacity(shape.0 * shape.1);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            entries.push((r, c, v));
        }
    }
    Ok(Dataset {
        format: SourceFormat::DenseCsv,
        shape,
        entries,
        dense: true,
        warnings,
    })
}

fn parse_matrix_market(text: &str) -> Result<Dataset, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty MatrixMarket input".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
        || !(tokens[3] == "real" || tokens[3] == "integer")
        || tokens[4] != "general"
    {
        return Err(CliError::Parse(
            "expected a '%%MatrixMarket matrix coordinate real general' header".into(),
        ));
    }

    let mut body = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line_no, size_line) = body
        .next()
        .ok_or_else(|| CliError::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Parse(format!("line {}: bad size line: {e}", size_line_no + 2)))?;
    if dims.len() != 3 {
        return Err(CliError::Parse("size line must be 'rows cols nnz'".into()));
    }
    let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);

    let mut entries = Vec::with_capacity(nnz);
    for (line_no, line) in body {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CliError::Parse(format!(
                "line {}: expected 'i j value'",
                line_no + 2
            )));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: {e}", line_no + 2)))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: {e}", line_no + 2)))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: {e}", line_no + 2)))?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(CliError::Parse(format!(
                "line {}: index ({i}, {j}) outside 1..={nrows} x 1..={ncols}",
                line_no + 2
            )));
        }
        entries.push((i - 1, j - 1, v));
    }
    if entries.len() != nnz {
        return Err(CliError::Parse(format!(
            "expected {nnz} entries, found {}",
            entries.len()
        )));
    }
    let mut sorted = entries.clone();
    sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
        return Err(CliError::Parse("duplicate coordinate in MatrixMarket input".into()));
    }
    Ok(Dataset {
        format: SourceFormat::MatrixMarket,
        shape: (nrows, ncols),
        entries,
        dense: false,
        warnings: Vec::new(),
    })
}

fn parse_rating_triples(text: &str) -> Result<Dataset, CliError> {
    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains("::") {
            line.split("::").collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 3 && fields.len() != 4 {
            return Err(CliError::Parse(format!(
                "line {}: expected 'user item rating [timestamp]'",
                line_no + 1
            )));
        }
        let user: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: {e}", line_no + 1)))?;
        let item: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: {e}", line_no + 1)))?;
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| CliError::Parse(format!("line {}: {e}", line_no + 1)))?;
        if user == 0 || item == 0 {
            return Err(CliError::Parse(format!(
                "line {}: ids are 1-indexed",
                line_no + 1
            )));
        }
        raw.push((user - 1, item - 1, rating));
    }
    if raw.is_empty() {
        return Err(CliError::Parse("no rating triples found".into()));
    }

    // Duplicate (user, item) pairs keep the last occurrence.
    let mut warnings = Vec::new();
    let mut dedup: std::collections::HashMap<(usize, usize), (usize, f64)> =
        std::collections::HashMap::new();
    let mut duplicates = 0usize;
    for (position, &(r, c, v)) in raw.iter().enumerate() {
        if dedup.insert((r, c), (position, v)).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        warnings.push(format!(
            "{duplicates} duplicate (user, item) pairs; kept the last occurrence"
        ));
    }
    let mut kept: Vec<(usize, (usize, usize, f64))> = dedup
        .into_iter()
        .map(|((r, c), (position, v))| (position, (r, c, v)))
        .collect();
    // Preserve input order of the kept occurrences.
    kept.sort_unstable_by_key(|&(position, _)| position);
    let entries: Vec<(usize, usize, f64)> = kept.into_iter().map(|(_, e)| e).collect();

    let shape = entries.iter().fold((0, 0), |acc, &(r, c, _)| {
        (acc.0.max(r + 1), acc.1.max(c + 1))
    });
    Ok(Dataset {
        format: SourceFormat::RatingTriples,
        shape,
        entries,
        dense: false,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_csv_with_header_autodetect() {
        let data = Dataset::load_from_str("a,b\n1.0,2.0\n3.0,4.0\n", None).unwrap();
        assert_eq!(data.format, SourceFormat::DenseCsv);
        assert_eq!(data.shape, (2, 2));
        assert_eq!(data.entries.len(), 4);
        assert_eq!(data.warnings.len(), 1);
    }

    #[test]
    fn dense_csv_ragged_rows_error() {
        assert!(Dataset::load_from_str("1,2\n3\n", None).is_err());
    }

    #[test]
    fn matrix_market_roundtrip() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n3 4 2\n1 1 5.0\n3 4 -1.5\n";
        let data = Dataset::load_from_str(text, None).unwrap();
        assert_eq!(data.format, SourceFormat::MatrixMarket);
        assert_eq!(data.shape, (3, 4));
        assert_eq!(data.entries, vec![(0, 0, 5.0), (2, 3, -1.5)]);
    }

    #[test]
    fn matrix_market_rejects_bad_headers_and_indices() {
        assert!(Dataset::load_from_str("%%MatrixMarket matrix array real general\n2 2\n1.0\n", None).is_err());
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(Dataset::load_from_str(bad, None).is_err());
    }

    #[test]
    fn triples_with_double_colon_and_duplicates() {
        let text = "1::2::3.0::978300760\n2::1::4.0::978302109\n1::2::5.0::978301968\n";
        let data = Dataset::load_from_str(text, None).unwrap();
        assert_eq!(data.format, SourceFormat::RatingTriples);
        assert_eq!(data.shape, (2, 2));
        assert_eq!(data.entries.len(), 2);
        // Last occurrence of (1, 2) wins.
        assert!(data.entries.contains(&(0, 1, 5.0)));
        assert_eq!(data.warnings.len(), 1);
    }

    #[test]
    fn triples_whitespace_form_and_zero_index_rejection() {
        let data = Dataset::load_from_str("1 1 2.5\n2 3 1.0\n", None).unwrap();
        assert_eq!(data.format, SourceFormat::RatingTriples);
        assert_eq!(data.shape, (2, 3));
        assert!(Dataset::load_from_str("0 1 2.5\n", Some(SourceFormat::RatingTriples)).is_err());
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let data = Dataset::load_from_str("1 1 1.0\n1 2 1.0\n2 1 1.0\n2 2 1.0\n3 1 1.0\n3 2 1.0\n3 3 1.0\n4 1 1.0\n4 2 1.0\n4 3 1.0\n", None).unwrap();
        let a = data.split((0.5, 0.2, 0.3), 7);
        let b = data.split((0.5, 0.2, 0.3), 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), data.entries.len());
        let trains = a.iter().filter(|t| **t == SplitTag::Train).count();
        let vals = a.iter().filter(|t| **t == SplitTag::Validation).count();
        assert_eq!(trains, 5);
        assert_eq!(vals, 2);
        let c = data.split((0.5, 0.2, 0.3), 8);
        assert_ne!(a, c);
    }

    impl Dataset {
        fn load_from_str(text: &str, format: Option<SourceFormat>) -> Result<Self, CliError> {
            let format = format.unwrap_or_else(|| sniff_format(text));
            match format {
                SourceFormat::DenseCsv => parse_dense_csv(text),
                SourceFormat::MatrixMarket => parse_matrix_market(text),
                SourceFormat::RatingTriples => parse_rating_triples(text),
            }
        }
    }
}
