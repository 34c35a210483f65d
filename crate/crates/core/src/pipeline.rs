//! Price files to sphericity reports: ingestion, log returns, random groups.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sphericity::{run_test, TestConfig, TestKind, TestReport};

/// Orientation of the CSV file. The first column always holds labels and
/// the header row holds the other axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One row per date, one column per asset.
    #[default]
    DatesAsRows,
    /// One row per asset, one column per date.
    AssetsAsRows,
}

/// Assets × periods matrix with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    pub assets: Vec<String>,
    pub periods: Vec<String>,
    /// `assets.len() × periods.len()`.
    pub values: DMatrix<f64>,
    pub source: Option<PathBuf>,
    pub transforms: Vec<String>,
    /// Assets dropped during ingestion.
    pub dropped: Vec<String>,
}

impl ReturnsMatrix {
    pub fn n_assets(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.values.ncols()
    }

    /// Rows for the named assets, in the given order.
    pub fn select(&self, assets: &[String]) -> Result<ReturnsMatrix> {
        let idx: Vec<usize> = assets
            .iter()
            .map(|a| {
                self.assets
                    .iter()
                    .position(|b| b == a)
                    .ok_or_else(|| Error::input(format!("unknown asset '{a}'")))
            })
            .collect::<Result<_>>()?;
        Ok(ReturnsMatrix {
            assets: assets.to_vec(),
            periods: self.periods.clone(),
            values: self.values.select_rows(&idx),
            source: self.source.clone(),
            transforms: self.transforms.clone(),
            dropped: Vec::new(),
        })
    }

    /// Write in `layout`; values use the shortest representation that
    /// parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, w: W, layout: Layout) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        match layout {
            Layout::DatesAsRows => {
                let mut header = vec!["date".to_string()];
                header.extend(self.assets.iter().cloned());
                out.write_record(&header)?;
                for (j, label) in self.periods.iter().enumerate() {
                    let mut rec = vec![label.clone()];
                    rec.extend(self.values.column(j).iter().map(|v| v.to_string()));
                    out.write_record(&rec)?;
                }
            }
            Layout::AssetsAsRows => {
                let mut header = vec!["asset".to_string()];
                header.extend(self.periods.iter().cloned());
                out.write_record(&header)?;
                for (i, name) in self.assets.iter().enumerate() {
                    let mut rec = vec![name.clone()];
                    rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
                    out.write_record(&rec)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Parse a price table. Assets with a missing, unparseable or nonpositive
/// price anywhere are dropped (and logged).
pub fn read_prices<R: Read>(reader: R, layout: Layout) -> Result<ReturnsMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(format!("row {}: {e}", line + 2)))?;
        if rec.len() != header.len() + 1 {
            return Err(Error::input(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                rec.len(),
                header.len() + 1
            )));
        }
        labels.push(rec[0].to_string());
        cells.push(rec.iter().skip(1).map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite())).collect());
    }
    if header.is_empty() || cells.is_empty() {
        return Err(Error::input("price file has no data"));
    }
    // Orient as assets × periods.
    let (assets, periods, grid): (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>) = match layout {
        Layout::AssetsAsRows => (labels, header, cells),
        Layout::DatesAsRows => {
            let grid = (0..header.len()).map(|a| cells.iter().map(|row| row[a]).collect()).collect();
            (header, labels, grid)
        }
    };
    let mut kept_names = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (name, row) in assets.into_iter().zip(grid) {
        if row.iter().all(|v| matches!(v, Some(x) if *x > 0.0)) {
            kept_names.push(name);
            kept.extend(row.into_iter().map(|v| v.expect("checked")));
        } else {
            dropped.push(name);
        }
    }
    if !dropped.is_empty() {
        log::warn!("dropped {} asset(s) with missing or nonpositive prices: {}", dropped.len(), dropped.join(", "));
    }
    if kept_names.is_empty() {
        return Err(Error::input("no asset has a complete, positive price series"));
    }
    let t = periods.len();
    let values = DMatrix::from_row_slice(kept_names.len(), t, &kept);
    Ok(ReturnsMatrix {
        assets: kept_names,
        periods,
        values,
        source: None,
        transforms: Vec::new(),
        dropped,
    })
}

/// [`read_prices`] on a file.
pub fn ingest_prices(path: impl AsRef<Path>, layout: Layout) -> Result<ReturnsMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let mut m = read_prices(std::io::BufReader::new(file), layout)?;
    m.source = Some(path.to_path_buf());
    Ok(m)
}

/// `x_{ij} = ln(u_{i,j+1}/u_{ij})`; one fewer period.
pub fn log_returns(prices: &ReturnsMatrix) -> Result<ReturnsMatrix> {
    let (a, t) = prices.values.shape();
    if t < 2 {
        return Err(Error::domain(format!("log returns need at least 2 periods, got {t}")));
    }
    for i in 0..a {
        for j in 0..t {
            let v = prices.values[(i, j)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "price {v} at (row {i}, column {j}) is not positive"
                )));
            }
        }
    }
    let values = DMatrix::from_fn(a, t - 1, |i, j| (prices.values[(i, j + 1)] / prices.values[(i, j)]).ln());
    let mut transforms = prices.transforms.clone();
    transforms.push("log_difference".into());
    Ok(ReturnsMatrix {
        assets: prices.assets.clone(),
        periods: prices.periods[1..].to_vec(),
        values,
        source: prices.source.clone(),
        transforms,
        dropped: prices.dropped.clone(),
    })
}

/// `count` random groups of `size` assets. Each group takes `size` distinct
/// sectors uniformly at random (all of them when `size` equals the number of
/// sectors) and one asset uniformly from each.
pub fn group_sample<R: Rng + ?Sized>(
    sectors: &BTreeMap<String, Vec<String>>,
    size: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<String>>> {
    if let Some((name, _)) = sectors.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::domain(format!("sector '{name}' has no assets")));
    }
    if size == 0 || size > sectors.len() {
        return Err(Error::domain(format!(
            "group size {size} must lie in 1..={} (one asset per sector)",
            sectors.len()
        )));
    }
    let members: Vec<&Vec<String>> = sectors.values().collect();
    let mut groups = Vec::with_capacity(count);
    for _ in 0..count {
        let chosen: Vec<usize> = if size == members.len() {
            (0..members.len()).collect()
        } else {
            let mut idx = rand::seq::index::sample(rng, members.len(), size).into_vec();
            idx.sort_unstable();
            idx
        };
        groups.push(
            chosen
                .into_iter()
                .map(|k| members[k].choose(rng).expect("sector is nonempty").clone())
                .collect(),
        );
    }
    Ok(groups)
}

/// Read a two-column `asset,sector` file.
pub fn read_sectors(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::input("sector file needs columns asset,sector"));
        }
        map.entry(rec[1].to_string()).or_default().push(rec[0].to_string());
    }
    if map.is_empty() {
        return Err(Error::input("sector file is empty"));
    }
    Ok(map)
}

/// Hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What the input file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    #[default]
    Prices,
    Returns,
}

/// Load a file as a returns matrix, applying log differences to prices.
/// Returns the matrix and the digest of the raw file.
pub fn load_returns(path: impl AsRef<Path>, layout: Layout, kind: InputKind) -> Result<(ReturnsMatrix, String)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    let hash = digest(&bytes);
    let matrix = match kind {
        InputKind::Prices => {
            let mut m = read_prices(bytes.as_slice(), layout)?;
            m.source = Some(path.to_path_buf());
            log_returns(&m)?
        }
        InputKind::Returns => read_returns(bytes.as_slice(), layout, path)?,
    };
    Ok((matrix, hash))
}

fn read_returns(bytes: &[u8], layout: Layout, path: &Path) -> Result<ReturnsMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::input(e.to_string()))?;
        labels.push(rec.get(0).unwrap_or_default().to_string());
        rows.push(rec.iter().skip(1).map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite())).collect());
    }
    if header.is_empty() || rows.is_empty() || rows.iter().any(|r| r.len() != header.len()) {
        return Err(Error::input("returns file is empty or ragged"));
    }
    let (assets, periods, grid): (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>) = match layout {
        Layout::AssetsAsRows => (labels, header, rows),
        Layout::DatesAsRows => {
            let grid = (0..header.len()).map(|a| rows.iter().map(|r| r[a]).collect()).collect();
            (header, labels, grid)
        }
    };
    let mut names = Vec::new();
    let mut data = Vec::new();
    let mut dropped = Vec::new();
    for (name, row) in assets.into_iter().zip(grid) {
        if row.iter().all(Option::is_some) {
            names.push(name);
            data.extend(row.into_iter().flatten());
        } else {
            dropped.push(name);
        }
    }
    if !dropped.is_empty() {
        log::warn!("dropped {} asset(s) with missing returns", dropped.len());
    }
    if names.is_empty() {
        return Err(Error::input("no asset has a complete return series"));
    }
    Ok(ReturnsMatrix {
        values: DMatrix::from_row_slice(names.len(), periods.len(), &data),
        assets: names,
        periods,
        source: Some(path.to_path_buf()),
        transforms: Vec::new(),
        dropped,
    })
}

/// Run `test` on a returns matrix: assets are dimensions, periods are observations.
pub fn test_returns(test: TestKind, returns: &ReturnsMatrix, cfg: &TestConfig) -> Result<TestReport> {
    run_test(test, &returns.values, cfg)
}

/// Run `test` on every group of assets; reports come back in group order.
pub fn test_groups(test: TestKind, returns: &ReturnsMatrix, groups: &[Vec<String>], cfg: &TestConfig) -> Result<Vec<TestReport>> {
    groups
        .par_iter()
        .map(|g| test_returns(test, &returns.select(g)?, cfg))
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_report<W: Write, T: Serialize>(mut w: W, report: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}
