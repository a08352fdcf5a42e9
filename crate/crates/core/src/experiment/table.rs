use serde::{Deserialize, Serialize};

use crate::error::{UiError, UiResult};
use crate::stats::Estimate;

use super::config::ExperimentConfig;

/// Suffix marking the standard-error partner of a Monte Carlo column.
pub const SE_SUFFIX: &str = "_se";
/// Prefix marking Monte Carlo columns.
pub const MC_PREFIX: &str = "mc_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub shots: u64,
    pub version: String,
}

/// Column-oriented output of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: TableMetadata,
    pub columns: Vec<Column>,
}

impl ResultTable {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            metadata: TableMetadata {
                seed: config.seed,
                shots: config.shots,
                config,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            columns: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Builds the table from per-row `(name, value)` records, which must
    /// share one column layout.
    pub fn from_rows(config: ExperimentConfig, rows: Vec<Row>) -> UiResult<Self> {
        let mut table = Self::new(config);
        let Some(first) = rows.first() else {
            return Ok(table);
        };
        table.columns = first
            .cells
            .iter()
            .map(|(name, _)| Column {
                name: name.clone(),
                values: Vec::with_capacity(rows.len()),
            })
            .collect();
        for row in &rows {
            let same = row.cells.len() == table.columns.len()
                && row
                    .cells
                    .iter()
                    .zip(&table.columns)
                    .all(|((n, _), c)| *n == c.name);
            if !same {
                return Err(UiError::domain("rows disagree on column layout"));
            }
            for ((_, v), c) in row.cells.iter().zip(&mut table.columns) {
                c.values.push(*v);
            }
        }
        table.check()?;
        Ok(table)
    }

    /// Equal column lengths, unique names, and an `_se` partner for every MC column.
    pub fn check(&self) -> UiResult<()> {
        let n = self.rows();
        for (i, c) in self.columns.iter().enumerate() {
            if c.values.len() != n {
                return Err(UiError::domain(format!(
                    "column `{}` has {} rows, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(UiError::domain(format!("duplicate column `{}`", c.name)));
            }
            if c.name.starts_with(MC_PREFIX) && !c.name.ends_with(SE_SUFFIX) {
                let se = format!("{}{SE_SUFFIX}", c.name);
                if self.column(&se).is_none() {
                    return Err(UiError::domain(format!("column `{}` lacks `{se}`", c.name)));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> UiResult<String> {
        let io = |e: csv::Error| UiError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(io)?;
        for r in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| format_value(c.values[r])))
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| UiError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| UiError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("table serialises");
        text.push('\n');
        text
    }
}

/// Shortest round-trip decimal; independent of locale.
fn format_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// One row under construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    pub cells: Vec<(String, f64)>,
}

impl Row {
    pub fn push(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.cells.push((name.into(), value));
        self
    }

    /// Adds `mc_<name>` and `mc_<name>_se`.
    pub fn push_estimate(&mut self, name: &str, est: Estimate) -> &mut Self {
        self.push(format!("{MC_PREFIX}{name}"), est.mean);
        self.push(format!("{MC_PREFIX}{name}{SE_SUFFIX}"), est.std_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::Protocol;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::new(Protocol::Weak)
    }

    #[test]
    fn csv_layout() {
        let mut a = Row::default();
        a.push("delta", 0.5)
            .push_estimate("p", Estimate::proportion(1, 4));
        let mut b = Row::default();
        b.push("delta", 1.0)
            .push_estimate("p", Estimate::proportion(3, 4));
        let t = ResultTable::from_rows(cfg(), vec![a, b]).unwrap();
        let csv = t.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "delta,mc_p,mc_p_se");
        assert!(lines[1].starts_with("0.5,0.25,0.2165"));
        assert!(lines[2].starts_with("1,0.75,"));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn missing_se_is_rejected() {
        let mut t = ResultTable::new(cfg());
        t.columns.push(Column {
            name: "mc_p".into(),
            values: vec![0.1],
        });
        assert!(t.check().is_err());
        t.columns.push(Column {
            name: "mc_p_se".into(),
            values: vec![0.01],
        });
        t.check().unwrap();
        t.columns.push(Column {
            name: "x".into(),
            values: vec![],
        });
        assert!(t.check().is_err());
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let mut a = Row::default();
        a.push("x", 1.0);
        let mut b = Row::default();
        b.push("y", 1.0);
        assert!(ResultTable::from_rows(cfg(), vec![a, b]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut a = Row::default();
        a.push("x", 0.1).push("y", f64::NAN);
        let t = ResultTable::from_rows(cfg(), vec![a]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["columns"][0]["name"], "x");
        assert!(v["columns"][1]["values"][0].is_null());
        assert_eq!(v["metadata"]["config"]["protocol"], "weak");
    }
}
