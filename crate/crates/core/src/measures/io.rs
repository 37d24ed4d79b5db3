//! CSV body `(node, weight)` plus a JSON header `{carrier, R}`.
//!
//! Floats are written in Rust's shortest round-trip form, so reading back a
//! written measure reproduces it bit for bit.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use super::{Carrier, GridMeasure};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureHeader {
    #[serde(flatten)]
    pub carrier: Carrier,
    pub count: usize,
}

impl GridMeasure {
    pub fn header(&self) -> MeasureHeader {
        MeasureHeader { carrier: self.carrier, count: self.len() }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node", "weight"])?;
        for (x, p) in self.nodes.iter().zip(&self.weights) {
            w.write_record([x.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(header: &MeasureHeader, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!("expected 2 columns, found {}", rec.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            nodes.push(parse(&rec[0])?);
            weights.push(parse(&rec[1])?);
        }
        if nodes.len() != header.count {
            return Err(Error::Parse(format!("header announces {} rows, body has {}", header.count, nodes.len())));
        }
        GridMeasure::new(header.carrier, nodes, weights)
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let csv_path = stem.with_extension("csv");
        let json_path = stem.with_extension("json");
        self.write_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(json_path, serde_json::to_string_pretty(&self.header())?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let header: MeasureHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        GridMeasure::read_csv(&header, std::fs::File::open(stem.with_extension("csv"))?)
    }
}
