use thiserror::Error;

/// Required header names, in canonical order.
pub const COLUMNS: [&str; 7] = [
    "id",
    "log_return",
    "beta",
    "smb",
    "hml",
    "leverage_ratio",
    "short_sale_ratio",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    /// `row` counts data rows from 1 (the header is row 0).
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("observation table has no rows")]
    EmptyTable,
    #[error("malformed CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub log_return: f64,
    pub beta: f64,
    pub smb: f64,
    pub hml: f64,
    pub leverage_ratio: f64,
    pub short_sale_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationTable {
    pub rows: Vec<Observation>,
}

impl ObservationTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// A numeric column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let get: fn(&Observation) -> f64 = match name {
            "log_return" => |o| o.log_return,
            "beta" => |o| o.beta,
            "smb" => |o| o.smb,
            "hml" => |o| o.hml,
            "leverage_ratio" => |o| o.leverage_ratio,
            "short_sale_ratio" => |o| o.short_sale_ratio,
            _ => return None,
        };
        Some(self.rows.iter().map(get).collect())
    }
}

/// Parses the observation CSV. Columns may appear in any order; extra
/// columns are ignored.
pub fn load_observations(bytes: &[u8]) -> Result<ObservationTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let row = i + 1;
        let num = |col: usize| -> Result<f64, DataError> {
            let raw = record.get(index[col]).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumericCell {
                    row,
                    column: COLUMNS[col].to_string(),
                    value: raw.to_string(),
                })
        };
        rows.push(Observation {
            id: record.get(index[0]).unwrap_or("").to_string(),
            log_return: num(1)?,
            beta: num(2)?,
            smb: num(3)?,
            hml: num(4)?,
            leverage_ratio: num(5)?,
            short_sale_ratio: num(6)?,
        });
    }
    if rows.is_empty() {
        return Err(DataError::EmptyTable);
    }
    Ok(ObservationTable { rows })
}
