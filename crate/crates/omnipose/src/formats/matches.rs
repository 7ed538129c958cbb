//! Pixel matches as CSV: `src_row,src_col,dst_row,dst_col,outlier`.

use std::path::Path;

use omnipose_core::sim::PixelMatch;
use omnipose_core::sphere::PixelCoord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    src_row: f64,
    src_col: f64,
    dst_row: f64,
    dst_col: f64,
    /// Ground-truth label from the simulator; `false` when unknown.
    #[serde(default)]
    outlier: bool,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_matches(path: &Path, matches: &[PixelMatch]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for m in matches {
        w.serialize(Row {
            src_row: m.src.row,
            src_col: m.src.col,
            dst_row: m.dst.row,
            dst_col: m.dst.col,
            outlier: m.outlier,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(crate::error::io(path))
}

pub fn read_matches(path: &Path) -> Result<Vec<PixelMatch>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .map(|row| {
            let row: Row = row.map_err(csv_err(path))?;
            Ok(PixelMatch {
                src: PixelCoord::new(row.src_row, row.src_col),
                dst: PixelCoord::new(row.dst_row, row.dst_col),
                outlier: row.outlier,
            })
        })
        .collect()
}

/// `(k, t)` from a file name like `00003_00007.csv`.
pub fn parse_pair_name(name: &str) -> Option<(usize, usize)> {
    let stem = name.strip_suffix(".csv")?;
    let (a, b) = stem.split_once('_')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

pub fn pair_name(k: usize, t: usize) -> String {
    format!("{k:05}_{t:05}.csv")
}
