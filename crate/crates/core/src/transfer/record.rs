use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{check_dim, Error, Result};

/// One `(s, a, s′, r)` tuple in physical units: raw state vectors, a proto
/// action in dB / ms, and the unregularized reward.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
}

/// Transitions of a fixed shape together with the CSV column names.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub state_columns: Vec<String>,
    pub action_columns: Vec<String>,
    pub records: Vec<TransitionRecord>,
}

impl Dataset {
    pub fn new(state_columns: Vec<String>, action_columns: Vec<String>) -> Self {
        Dataset {
            state_columns,
            action_columns,
            records: Vec::new(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_columns.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_columns.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TransitionRecord) -> Result<()> {
        check_dim("record state", self.state_dim(), record.state.len())?;
        check_dim("record action", self.action_dim(), record.action.len())?;
        check_dim(
            "record next state",
            self.state_dim(),
            record.next_state.len(),
        )?;
        self.records.push(record);
        Ok(())
    }

    /// Header: state columns, action columns, `next_`-prefixed state columns, `reward`.
    pub fn header(&self) -> Vec<String> {
        let mut h = self.state_columns.clone();
        h.extend(self.action_columns.iter().cloned());
        h.extend(self.state_columns.iter().map(|c| format!("next_{c}")));
        h.push("reward".into());
        h
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        let mut row: Vec<String> = Vec::with_capacity(2 * self.state_dim() + self.action_dim() + 1);
        for r in &self.records {
            row.clear();
            for v in r.state.iter().chain(&r.action).chain(&r.next_state) {
                row.push(format!("{v:?}"));
            }
            row.push(format!("{:?}", r.reward));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dataset; the action block is recognized by the `a_` column prefix.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some("reward") {
            return Err(Error::Parse("dataset header must end with `reward`".into()));
        }
        let action_start = header
            .iter()
            .position(|c| c.starts_with("a_"))
            .ok_or_else(|| Error::Parse("dataset header has no action columns".into()))?;
        let action_end = header[action_start..]
            .iter()
            .position(|c| !c.starts_with("a_"))
            .map(|p| action_start + p)
            .unwrap_or(header.len());
        let sd = action_start;
        let ad = action_end - action_start;
        if header.len() != 2 * sd + ad + 1 {
            return Err(Error::Parse(
                "dataset header has inconsistent block sizes".into(),
            ));
        }
        let mut data = Dataset::new(header[..sd].to_vec(), header[sd..sd + ad].to_vec());
        for row in r.records() {
            let row = row?;
            let values: Vec<f64> = row
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("`{v}`: {e}")))
                })
                .collect::<Result<_>>()?;
            check_dim("dataset row", header.len(), values.len())?;
            data.records.push(TransitionRecord {
                state: values[..sd].to_vec(),
                action: values[sd..sd + ad].to_vec(),
                next_state: values[sd + ad..2 * sd + ad].to_vec(),
                reward: values[2 * sd + ad],
            });
        }
        Ok(data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                stage: "collect",
                what: "offline dataset",
                path: path.display().to_string(),
            });
        }
        Self::read_csv(File::open(path)?)
    }
}

/// Action column names `a_{n}-{m}_s{s}_{hom|ttt}` in action-layout order.
pub fn action_columns(directed: &[(usize, usize)], n_slices: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(2 * directed.len() * n_slices);
    for (n, m) in directed {
        for s in 0..n_slices {
            names.push(format!("a_{n}-{m}_s{s}_hom"));
            names.push(format!("a_{n}-{m}_s{s}_ttt"));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut d = Dataset::new(vec!["x".into(), "y".into()], action_columns(&[(0, 1)], 1));
        d.push(TransitionRecord {
            state: vec![0.1, 1.0 / 3.0],
            action: vec![-2.5, 512.0],
            next_state: vec![1e-17, 7.0],
            reward: -0.123456789012345,
        })
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,a_0-1_s0_hom,a_0-1_s0_ttt,next_x,next_y,reward\n"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        let mut d = Dataset::new(vec!["x".into()], action_columns(&[(0, 1)], 1));
        let bad = TransitionRecord {
            state: vec![0.0],
            action: vec![0.0],
            next_state: vec![0.0],
            reward: 0.0,
        };
        assert!(d.push(bad).is_err());
        assert!(Dataset::read_csv("x,next_x,reward\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_file_names_collect_stage() {
        let err = Dataset::load(Path::new("/nonexistent/data.csv")).unwrap_err();
        assert!(err.to_string().contains("collect"));
    }
}
