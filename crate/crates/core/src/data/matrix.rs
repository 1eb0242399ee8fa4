//! Participant-by-item grids and the CSV exchange format.
//!
//! The CSV layout is shared by human datasets, synthetic datasets, and
//! predictions: first column `pid`, then one column per item id, an empty
//! cell meaning "missing".

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DataError, Registry};
use crate::scalar::Scalar;

/// Read access to a dense participant × item grid.
pub trait ItemGrid<T> {
    fn participant_ids(&self) -> &[String];
    fn item_ids(&self) -> &[String];
    fn value(&self, row: usize, col: usize) -> Option<T>;

    fn item_index(&self, item_id: &str) -> Option<usize> {
        self.item_ids().iter().position(|i| i == item_id)
    }
}

/// Validated integer responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    participant_ids: Vec<String>,
    item_ids: Vec<String>,
    values: Vec<Option<i32>>,
}

impl ResponseMatrix {
    /// Builds a matrix, checking every present value against the registry bounds.
    pub fn new(
        participant_ids: Vec<String>,
        item_ids: Vec<String>,
        values: Vec<Option<i32>>,
        registry: &Registry,
    ) -> Result<Self, DataError> {
        if values.len() != participant_ids.len() * item_ids.len() {
            return Err(DataError::Shape {
                expected: participant_ids.len() * item_ids.len(),
                got: values.len(),
            });
        }
        let items = item_ids
            .iter()
            .map(|id| registry.item(id).ok_or_else(|| DataError::UnknownItem(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen_items = HashSet::new();
        for id in &item_ids {
            if !seen_items.insert(id.as_str()) {
                return Err(DataError::DuplicateItem(id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for (row, pid) in participant_ids.iter().enumerate() {
            if !seen.insert(pid.as_str()) {
                return Err(DataError::DuplicateParticipant(pid.clone()));
            }
            for (col, item) in items.iter().enumerate() {
                if let Some(v) = values[row * item_ids.len() + col] {
                    if !item.contains(v) {
                        return Err(DataError::OutOfRange {
                            participant: pid.clone(),
                            item: item.item_id.clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(Self { participant_ids, item_ids, values })
    }

    pub fn participant_ids(&self) -> &[String] {
        &self.participant_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.item_ids.iter().position(|i| i == item_id)
    }

    pub fn n_participants(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<i32> {
        self.values[row * self.item_ids.len() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<i32>] {
        let w = self.item_ids.len();
        &self.values[row * w..(row + 1) * w]
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let w = self.item_ids.len();
        let mut values = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            participant_ids: rows.iter().map(|&r| self.participant_ids[r].clone()).collect(),
            item_ids: self.item_ids.clone(),
            values,
        }
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_items(&self, item_ids: &[String]) -> Result<Self, DataError> {
        let cols = item_ids
            .iter()
            .map(|id| self.item_index(id).ok_or_else(|| DataError::MissingColumn(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(self.n_participants() * cols.len());
        for r in 0..self.n_participants() {
            values.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        Ok(Self {
            participant_ids: self.participant_ids.clone(),
            item_ids: item_ids.to_vec(),
            values,
        })
    }

    /// Side-by-side concatenation over the same participants.
    pub fn hconcat(&self, other: &Self) -> Result<Self, DataError> {
        if self.participant_ids != other.participant_ids {
            return Err(DataError::ParticipantMismatch);
        }
        if let Some(dup) = other.item_ids.iter().find(|id| self.item_ids.contains(id)) {
            return Err(DataError::DuplicateItem(dup.clone()));
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for r in 0..self.n_participants() {
            values.extend_from_slice(self.row(r));
            values.extend_from_slice(other.row(r));
        }
        let mut item_ids = self.item_ids.clone();
        item_ids.extend(other.item_ids.iter().cloned());
        Ok(Self { participant_ids: self.participant_ids.clone(), item_ids, values })
    }

    /// Row as reals; `None` if any cell is missing.
    pub fn complete_row<T: Scalar>(&self, row: usize) -> Option<Vec<T>> {
        self.row(row).iter().map(|v| v.map(|x| T::of(f64::from(x)))).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["pid".to_string()];
        header.extend(self.item_ids.iter().cloned());
        w.write_record(&header)?;
        for (r, pid) in self.participant_ids.iter().enumerate() {
            let mut rec = vec![pid.clone()];
            rec.extend(self.row(r).iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl<T: Scalar> ItemGrid<T> for ResponseMatrix {
    fn participant_ids(&self) -> &[String] {
        &self.participant_ids
    }
    fn item_ids(&self) -> &[String] {
        &self.item_ids
    }
    fn value(&self, row: usize, col: usize) -> Option<T> {
        self.get(row, col).map(|v| T::of(f64::from(v)))
    }
}

/// Reads a dataset CSV (`pid`, item columns) and validates it against the registry.
pub fn load_dataset<R: Read>(source: R, registry: &Registry) -> Result<ResponseMatrix, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader.headers()?.clone();
    if header.get(0).map(str::trim) != Some("pid") {
        return Err(DataError::MalformedRow { line: 1, reason: "first column must be `pid`".into() });
    }
    let item_ids: Vec<String> = header.iter().skip(1).map(|h| h.trim().to_string()).collect();
    for id in &item_ids {
        if registry.item(id).is_none() {
            return Err(DataError::UnknownItem(id.clone()));
        }
    }
    let mut pids = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::MalformedRow { line, reason: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let pid = rec[0].trim();
        if pid.is_empty() {
            return Err(DataError::MalformedRow { line, reason: "empty pid".into() });
        }
        pids.push(pid.to_string());
        for cell in rec.iter().skip(1) {
            let cell = cell.trim();
            if cell.is_empty() {
                values.push(None);
            } else {
                let v = cell.parse::<i32>().map_err(|_| DataError::MalformedRow {
                    line,
                    reason: format!("`{cell}` is not an integer"),
                })?;
                values.push(Some(v));
            }
        }
    }
    ResponseMatrix::new(pids, item_ids, values, registry)
}

/// Real-valued item-level predictions, laid out like a [`ResponseMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix<T = f64> {
    participant_ids: Vec<String>,
    item_ids: Vec<String>,
    values: Vec<Option<T>>,
}

impl<T: Scalar> PredictionMatrix<T> {
    pub fn new(
        participant_ids: Vec<String>,
        item_ids: Vec<String>,
        values: Vec<Option<T>>,
    ) -> Result<Self, DataError> {
        if values.len() != participant_ids.len() * item_ids.len() {
            return Err(DataError::Shape {
                expected: participant_ids.len() * item_ids.len(),
                got: values.len(),
            });
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        Ok(Self { participant_ids, item_ids, values })
    }

    pub fn empty(participant_ids: Vec<String>, item_ids: Vec<String>) -> Self {
        let n = participant_ids.len() * item_ids.len();
        Self { participant_ids, item_ids, values: vec![None; n] }
    }

    /// Integer responses copied verbatim.
    pub fn from_responses(m: &ResponseMatrix) -> Self {
        Self {
            participant_ids: m.participant_ids.clone(),
            item_ids: m.item_ids.clone(),
            values: m.values.iter().map(|v| v.map(|x| T::of(f64::from(x)))).collect(),
        }
    }

    pub fn n_participants(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.values[row * self.item_ids.len() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<T>) {
        let w = self.item_ids.len();
        self.values[row * w + col] = value;
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let w = self.item_ids.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.map(|x| f(i / w, i % w, x)))
            .collect();
        Self { participant_ids: self.participant_ids.clone(), item_ids: self.item_ids.clone(), values }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["pid".to_string()];
        header.extend(self.item_ids.iter().cloned());
        w.write_record(&header)?;
        for (r, pid) in self.participant_ids.iter().enumerate() {
            let mut rec = vec![pid.clone()];
            for c in 0..self.item_ids.len() {
                rec.push(self.get(r, c).map(|x| x.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, DataError>
    where
        T: std::str::FromStr,
    {
        let mut reader = csv::Reader::from_reader(source);
        let header = reader.headers()?.clone();
        if header.get(0) != Some("pid") {
            return Err(DataError::MalformedRow { line: 1, reason: "first column must be `pid`".into() });
        }
        let item_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut pids = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| DataError::MalformedRow { line, reason: e.to_string() })?;
            pids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                if cell.is_empty() {
                    values.push(None);
                } else {
                    values.push(Some(cell.parse::<T>().map_err(|_| DataError::MalformedRow {
                        line,
                        reason: format!("`{cell}` is not a number"),
                    })?));
                }
            }
        }
        Self::new(pids, item_ids, values)
    }
}

impl<T: Scalar> ItemGrid<T> for PredictionMatrix<T> {
    fn participant_ids(&self) -> &[String] {
        &self.participant_ids
    }
    fn item_ids(&self) -> &[String] {
        &self.item_ids
    }
    fn value(&self, row: usize, col: usize) -> Option<T> {
        self.get(row, col)
    }
}

/// Per-participant sub-scale scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscaleScores<T = f64> {
    pub participant_ids: Vec<String>,
    pub subscale_ids: Vec<String>,
    values: Vec<Option<T>>,
}

impl<T: Scalar> SubscaleScores<T> {
    pub fn new(
        participant_ids: Vec<String>,
        subscale_ids: Vec<String>,
        values: Vec<Option<T>>,
    ) -> Result<Self, DataError> {
        if values.len() != participant_ids.len() * subscale_ids.len() {
            return Err(DataError::Shape {
                expected: participant_ids.len() * subscale_ids.len(),
                got: values.len(),
            });
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        Ok(Self { participant_ids, subscale_ids, values })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.values[row * self.subscale_ids.len() + col]
    }

    pub fn column_index(&self, subscale_id: &str) -> Option<usize> {
        self.subscale_ids.iter().position(|s| s == subscale_id)
    }

    pub fn column(&self, col: usize) -> Vec<Option<T>> {
        (0..self.participant_ids.len()).map(|r| self.get(r, col)).collect()
    }

    /// Side-by-side concatenation of two score sets over the same participants.
    pub fn hconcat(&self, other: &Self) -> Result<Self, DataError> {
        if self.participant_ids != other.participant_ids {
            return Err(DataError::ParticipantMismatch);
        }
        let mut subscale_ids = self.subscale_ids.clone();
        subscale_ids.extend(other.subscale_ids.iter().cloned());
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for r in 0..self.participant_ids.len() {
            values.extend((0..self.subscale_ids.len()).map(|c| self.get(r, c)));
            values.extend((0..other.subscale_ids.len()).map(|c| other.get(r, c)));
        }
        Self::new(self.participant_ids.clone(), subscale_ids, values)
    }

    /// Same layout as the item grids, with sub-scale ids as columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["pid".to_string()];
        header.extend(self.subscale_ids.iter().cloned());
        w.write_record(&header)?;
        for (r, pid) in self.participant_ids.iter().enumerate() {
            let mut rec = vec![pid.clone()];
            rec.extend((0..self.subscale_ids.len()).map(|c| self.get(r, c).map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let w = self.subscale_ids.len();
        let mut values = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            values.extend_from_slice(&self.values[r * w..(r + 1) * w]);
        }
        Self {
            participant_ids: rows.iter().map(|&r| self.participant_ids[r].clone()).collect(),
            subscale_ids: self.subscale_ids.clone(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = String::from("pid");
        for i in 1..=20 {
            h.push_str(&format!(",BF{i:02}"));
        }
        h
    }

    #[test]
    fn single_row_round_trip() {
        let reg = Registry::builtin();
        let csv = format!("{}\np1,{}\n", header(), (0..20).map(|i| (i % 5 + 1).to_string()).collect::<Vec<_>>().join(","));
        let m = load_dataset(csv.as_bytes(), &reg).unwrap();
        assert_eq!((m.n_participants(), m.n_items()), (1, 20));
        assert_eq!(m.get(0, 4), Some(5));
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }

    #[test]
    fn out_of_range_value_rejected() {
        let reg = Registry::builtin();
        let mut cells = vec!["3"; 20];
        cells[7] = "6";
        let csv = format!("{}\np1,{}\n", header(), cells.join(","));
        match load_dataset(csv.as_bytes(), &reg) {
            Err(DataError::OutOfRange { item, value, .. }) => {
                assert_eq!((item.as_str(), value), ("BF08", 6));
            }
            other => panic!("expected OutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn ingestion_errors_are_classified() {
        let reg = Registry::builtin();
        let row = vec!["3"; 20].join(",");
        let dup = format!("{}\np1,{row}\np1,{row}\n", header());
        assert!(matches!(load_dataset(dup.as_bytes(), &reg), Err(DataError::DuplicateParticipant(p)) if p == "p1"));
        let unknown = "pid,XX99\np1,3\n";
        assert!(matches!(load_dataset(unknown.as_bytes(), &reg), Err(DataError::UnknownItem(i)) if i == "XX99"));
        let short = format!("{}\np1,3,3\n", header());
        assert!(matches!(load_dataset(short.as_bytes(), &reg), Err(DataError::MalformedRow { line: 2, .. })));
        let text = format!("{}\np1,{}\n", header(), vec!["x"; 20].join(","));
        assert!(matches!(load_dataset(text.as_bytes(), &reg), Err(DataError::MalformedRow { .. })));
    }

    #[test]
    fn empty_cell_is_missing() {
        let reg = Registry::builtin();
        let mut cells = vec!["2"; 20];
        cells[0] = "";
        let csv = format!("{}\np1,{}\n", header(), cells.join(","));
        let m = load_dataset(csv.as_bytes(), &reg).unwrap();
        assert_eq!(m.get(0, 0), None);
        assert_eq!(m.complete_row::<f64>(0), None);
    }

    #[test]
    fn prediction_csv_round_trip() {
        let p = PredictionMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["X".into(), "Y".into()],
            vec![Some(1.25), None, Some(-0.1), Some(7.0)],
        )
        .unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let back = PredictionMatrix::<f64>::read_csv(out.as_slice()).unwrap();
        assert_eq!(back, p);
    }
}
