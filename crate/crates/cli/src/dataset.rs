//! CSV ingestion: comma-separated, header required, UTF-8, '.' decimal point.

use crate::CliError;
use baker_copula::em::AxisKind;
use baker_copula::marginals::{self, MarginalModel};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    /// Column-major values, rectangular.
    pub columns: Vec<Vec<f64>>,
    pub kinds: Vec<AxisKind>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn fit_marginals(&self) -> Result<Vec<MarginalModel>, CliError> {
        self.columns
            .iter()
            .zip(&self.kinds)
            .map(|(col, kind)| match kind {
                AxisKind::Continuous => marginals::fit_continuous(col, None),
                AxisKind::Discrete => marginals::fit_discrete(col),
            })
            .collect::<Result<_, _>>()
            .map_err(CliError::input)
    }
}

/// Read a CSV file; rows with non-numeric cells are rejected with their line
/// number.  `kinds` must be empty (all continuous) or one entry per column.
pub fn read_csv(path: &Path, kinds: &[AxisKind]) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(CliError::input)?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if names.is_empty() {
        return Err(CliError::Input("CSV has no columns".into()));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for result in reader.records() {
        let record = result.map_err(CliError::input)?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        if record.len() != names.len() {
            return Err(CliError::Input(format!(
                "line {line}: expected {} fields, got {}",
                names.len(),
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "line {line}: column '{}' has non-numeric value '{field}'",
                    names[j]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Input(format!(
                    "line {line}: column '{}' has non-finite value",
                    names[j]
                )));
            }
            columns[j].push(value);
        }
    }
    if columns[0].len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need at least 2 data rows",
            path.display()
        )));
    }
    let kinds = if kinds.is_empty() {
        vec![AxisKind::Continuous; names.len()]
    } else if kinds.len() == names.len() {
        kinds.to_vec()
    } else {
        return Err(CliError::Input(format!(
            "--kinds has {} entries for {} columns",
            kinds.len(),
            names.len()
        )));
    };
    Ok(Dataset {
        names,
        columns,
        kinds,
    })
}

/// Parse a kinds flag like `c,d` or `continuous,discrete`.
pub fn parse_kinds(spec: &str) -> Result<Vec<AxisKind>, CliError> {
    spec.split(',')
        .map(|tok| match tok.trim().to_ascii_lowercase().as_str() {
            "c" | "cont" | "continuous" => Ok(AxisKind::Continuous),
            "d" | "disc" | "discrete" => Ok(AxisKind::Discrete),
            other => Err(CliError::Input(format!("unknown axis kind '{other}'"))),
        })
        .collect()
}

/// Parse a dims flag like `2,3` (one entry per column).
pub fn parse_dims(spec: &str) -> Result<Vec<usize>, CliError> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| CliError::Input(format!("bad dims entry '{tok}'")))
        })
        .collect()
}

/// Parse a grid spec like `1..10x1..10` (per-axis ranges or singletons,
/// joined by `x`) into the cartesian list of candidate dims.
pub fn parse_grid(spec: &str) -> Result<Vec<Vec<usize>>, CliError> {
    let axes: Vec<Vec<usize>> = spec
        .split('x')
        .map(|part| -> Result<Vec<usize>, CliError> {
            let part = part.trim();
            if let Some((lo, hi)) = part.split_once("..") {
                let lo: usize = lo
                    .parse()
                    .map_err(|_| CliError::Input(format!("bad grid bound '{lo}'")))?;
                let hi: usize = hi
                    .parse()
                    .map_err(|_| CliError::Input(format!("bad grid bound '{hi}'")))?;
                if lo < 1 || hi < lo {
                    return Err(CliError::Input(format!("bad grid range '{part}'")));
                }
                Ok((lo..=hi).collect())
            } else {
                let v: usize = part
                    .parse()
                    .map_err(|_| CliError::Input(format!("bad grid entry '{part}'")))?;
                if v < 1 {
                    return Err(CliError::Input("grid entries must be >= 1".into()));
                }
                Ok(vec![v])
            }
        })
        .collect::<Result<_, _>>()?;
    if axes.is_empty() {
        return Err(CliError::Input("empty grid spec".into()));
    }
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(combos.len() * axis.len());
        for combo in &combos {
            for &v in axis {
                let mut c = combo.clone();
                c.push(v);
                next.push(c);
            }
        }
        combos = next;
    }
    Ok(combos)
}
