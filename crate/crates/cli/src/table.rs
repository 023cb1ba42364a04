//! CSV ingestion of functional records and plot-ready CSV export.
//!
//! Input layout: one row per observation, covariate columns followed by
//! response columns named `y@<location>`. Locations are rescaled onto
//! `[0, 1]` to form the grid.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use fosr_gm::stats::RunningMoments;
use fosr_gm::{CoefficientField, ConfidenceBand, FunctionalSample, Grid};
use serde::Serialize;

use crate::config::{ColumnMapping, MalformedPolicy};
use crate::error::{CliError, IoContext, Result};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column positions resolved from the header row.
#[derive(Debug, Clone)]
pub struct Layout {
    pub covariate_names: Vec<String>,
    covariate_idx: Vec<usize>,
    response_idx: Vec<usize>,
    pub locations: Vec<f64>,
    pub grid: Grid,
    pub intercept: bool,
}

impl Layout {
    pub fn from_header(header: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Self> {
        let prefix = mapping.response_prefix.as_str();
        let mut responses = Vec::new();
        for (i, name) in header.iter().enumerate() {
            if let Some(loc) = name.trim().strip_prefix(prefix) {
                let t: f64 = loc
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Header(format!("non-numeric grid location in `{name}`")))?;
                if !t.is_finite() {
                    return Err(CliError::Header(format!("non-finite grid location in `{name}`")));
                }
                responses.push((t, i));
            }
        }
        if responses.len() < 2 {
            return Err(CliError::Header(format!(
                "need at least two `{prefix}<location>` response columns"
            )));
        }
        responses.sort_by(|a, b| a.0.total_cmp(&b.0));
        if responses.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(CliError::Header("duplicate grid location".into()));
        }
        let locations: Vec<f64> = responses.iter().map(|r| r.0).collect();
        let grid = Grid::rescaled(&locations)?;

        let (covariate_names, covariate_idx) = match &mapping.covariates {
            Some(names) => {
                let mut idx = Vec::with_capacity(names.len());
                for n in names {
                    let i = header
                        .iter()
                        .position(|h| h.trim() == n)
                        .ok_or_else(|| CliError::Header(format!("covariate column `{n}` not found")))?;
                    idx.push(i);
                }
                (names.clone(), idx)
            }
            None => header
                .iter()
                .enumerate()
                .filter(|(_, h)| !h.trim().starts_with(prefix))
                .map(|(i, h)| (h.trim().to_string(), i))
                .unzip(),
        };
        if covariate_idx.is_empty() && !mapping.intercept {
            return Err(CliError::Header("no covariate columns".into()));
        }
        Ok(Self {
            covariate_names,
            covariate_idx,
            response_idx: responses.iter().map(|r| r.1).collect(),
            locations,
            grid,
            intercept: mapping.intercept,
        })
    }

    /// Number of model covariates, including the intercept.
    pub fn dim(&self) -> usize {
        self.covariate_idx.len() + usize::from(self.intercept)
    }

    /// Coefficient labels in model order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim());
        if self.intercept {
            out.push("intercept".to_string());
        }
        out.extend(self.covariate_names.iter().cloned());
        out
    }
}

/// Counts of rows that did not become samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DropCounts {
    pub missing: u64,
    pub malformed: u64,
}

enum Parsed {
    Row(Vec<f64>, Vec<f64>),
    Missing,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("null")
}

/// Lazy sample reader over a CSV source.
pub struct SampleReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    layout: Layout,
    policy: MalformedPolicy,
    standardizer: Option<Vec<RunningMoments>>,
    drops: DropCounts,
    rows: u64,
}

impl<R: Read> SampleReader<R> {
    pub fn new(source: R, mapping: &ColumnMapping, policy: MalformedPolicy, standardize: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
        let layout = Layout::from_header(reader.headers()?, mapping)?;
        let standardizer = standardize.then(|| vec![RunningMoments::new(); layout.covariate_idx.len()]);
        Ok(Self {
            records: reader.into_records(),
            layout,
            policy,
            standardizer,
            drops: DropCounts::default(),
            rows: 0,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn grid(&self) -> &Grid {
        &self.layout.grid
    }

    pub fn drops(&self) -> DropCounts {
        self.drops
    }

    /// Data rows seen so far, including dropped ones.
    pub fn rows(&self) -> u64 {
        self.rows
    }

    fn parse(&self, record: &csv::StringRecord) -> std::result::Result<Parsed, String> {
        let width = self.layout.covariate_idx.len() + self.layout.response_idx.len();
        let needed = self
            .layout
            .covariate_idx
            .iter()
            .chain(&self.layout.response_idx)
            .copied()
            .max()
            .unwrap_or(0);
        if record.len() <= needed {
            return Err(format!("expected at least {} fields, found {}", needed + 1, record.len()));
        }
        let mut values = Vec::with_capacity(width);
        let mut missing = false;
        for &i in self.layout.covariate_idx.iter().chain(&self.layout.response_idx) {
            let field = &record[i];
            if is_missing(field) {
                missing = true;
                continue;
            }
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format!("field {} is not a number: `{field}`", i + 1))?;
            if !v.is_finite() {
                return Err(format!("field {} is not finite", i + 1));
            }
            values.push(v);
        }
        if missing {
            return Ok(Parsed::Missing);
        }
        let y = values.split_off(self.layout.covariate_idx.len());
        Ok(Parsed::Row(values, y))
    }

    fn finish_covariates(&mut self, raw: Vec<f64>) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.layout.dim());
        if self.layout.intercept {
            x.push(1.0);
        }
        match &mut self.standardizer {
            Some(moments) => {
                for (acc, v) in moments.iter_mut().zip(raw) {
                    acc.push(v);
                    x.push(acc.standardize(v));
                }
            }
            None => x.extend(raw),
        }
        x
    }
}

impl<R: Read> Iterator for SampleReader<R> {
    type Item = Result<FunctionalSample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e.into())),
            };
            self.rows += 1;
            let line = record.position().map_or(self.rows + 1, |p| p.line());
            match self.parse(&record) {
                Ok(Parsed::Row(raw, y)) => {
                    let x = self.finish_covariates(raw);
                    return Some(Ok(FunctionalSample::new(x, y)));
                }
                Ok(Parsed::Missing) => self.drops.missing += 1,
                Err(reason) => match self.policy {
                    MalformedPolicy::Skip => self.drops.malformed += 1,
                    MalformedPolicy::Abort => return Some(Err(CliError::MalformedRow { line, reason })),
                },
            }
        }
    }
}

pub fn load_stream(
    path: &Path,
    mapping: &ColumnMapping,
    policy: MalformedPolicy,
    standardize: bool,
) -> Result<SampleReader<io::BufReader<File>>> {
    let file = File::open(path).at(path)?;
    SampleReader::new(io::BufReader::new(file), mapping, policy, standardize)
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    let file = File::create(path).at(path)?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn close<W: Write>(w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: io::Error::other(e.to_string()),
        })?
        .flush()
        .at(path)
}

/// Writes samples in the input layout, so the file loads back unchanged.
/// `locations` label the response columns.
pub fn write_samples<'a, I>(path: &Path, locations: &[f64], samples: I) -> Result<()>
where
    I: IntoIterator<Item = &'a FunctionalSample>,
{
    let mut samples = samples.into_iter().peekable();
    let d = samples.peek().map_or(0, |s| s.x.len());
    let mut w = create(path)?;
    let header: Vec<String> = (1..=d)
        .map(|j| format!("x{j}"))
        .chain(locations.iter().map(|t| format!("y@{}", fmt17(*t))))
        .collect();
    w.write_record(&header)?;
    for s in samples {
        w.write_record(s.x.iter().chain(&s.y).map(|v| fmt17(*v)))?;
    }
    close(w, path)
}

/// Long table `coefficient,t,value`.
pub fn write_field(path: &Path, labels: &[String], field: &CoefficientField) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["coefficient", "t", "value"])?;
    for (j, row) in field.rows().enumerate() {
        for (t, v) in field.grid().points().iter().zip(row) {
            w.write_record([labels[j].clone(), fmt17(*t), fmt17(*v)])?;
        }
    }
    close(w, path)
}

/// Long table `method,level,coefficient,t,estimate,lower,upper`.
pub fn write_bands(path: &Path, labels: &[String], estimate: &CoefficientField, bands: &[ConfidenceBand]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["method", "level", "coefficient", "t", "estimate", "lower", "upper"])?;
    for band in bands {
        let level = fmt17(band.level());
        for j in 0..estimate.dim() {
            for (l, t) in estimate.grid().points().iter().enumerate() {
                w.write_record([
                    band.method.name().to_string(),
                    level.clone(),
                    labels[j].clone(),
                    fmt17(*t),
                    fmt17(estimate[(j, l)]),
                    fmt17(band.lower[(j, l)]),
                    fmt17(band.upper[(j, l)]),
                ])?;
            }
        }
    }
    close(w, path)
}

/// Long table `n,coefficient,t,value` of recorded running averages.
pub fn write_trajectory(path: &Path, labels: &[String], points: &[(u64, CoefficientField)]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["n", "coefficient", "t", "value"])?;
    for (n, field) in points {
        for (j, row) in field.rows().enumerate() {
            for (t, v) in field.grid().points().iter().zip(row) {
                w.write_record([n.to_string(), labels[j].clone(), fmt17(*t), fmt17(*v)])?;
            }
        }
    }
    close(w, path)
}

/// Wide table with a leading key column and one column per value.
pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    close(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reader(text: &str, policy: MalformedPolicy) -> SampleReader<&[u8]> {
        SampleReader::new(text.as_bytes(), &ColumnMapping::default(), policy, false).unwrap()
    }

    #[test]
    fn one_row() {
        let mut r = reader("x1,y@0,y@12,y@24\n2,1,2,3\n", MalformedPolicy::Skip);
        let s = r.next().unwrap().unwrap();
        assert_eq!(s.x, vec![2.0]);
        assert_eq!(s.y, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.grid().points(), &[0.0, 0.5, 1.0]);
        assert!(r.next().is_none());
    }

    #[test]
    fn missing_row_dropped() {
        let mut r = reader("x1,y@0,y@1\n1,,2\n1,NA,2\n3,4,5\n", MalformedPolicy::Skip);
        let got: Vec<_> = r.by_ref().collect::<Result<_>>().unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(r.drops(), DropCounts { missing: 2, malformed: 0 });
    }

    #[test]
    fn malformed_policy() {
        let text = "x1,y@0,y@1\n1,abc,2\n3,4,5\n";
        let mut r = reader(text, MalformedPolicy::Skip);
        assert_eq!(r.by_ref().count(), 1);
        assert_eq!(r.drops().malformed, 1);
        let mut r = reader(text, MalformedPolicy::Abort);
        assert!(matches!(r.next(), Some(Err(CliError::MalformedRow { line: 2, .. }))));
    }

    #[test]
    fn short_row_is_malformed() {
        let mut r = reader("x1,y@0,y@1\n1,2\n", MalformedPolicy::Skip);
        assert!(r.next().is_none());
        assert_eq!(r.drops().malformed, 1);
    }

    #[test]
    fn header_errors() {
        let m = ColumnMapping::default();
        assert!(SampleReader::new("x1,y@a,y@1\n".as_bytes(), &m, MalformedPolicy::Skip, false).is_err());
        assert!(SampleReader::new("x1,y@0\n".as_bytes(), &m, MalformedPolicy::Skip, false).is_err());
        let named = ColumnMapping {
            covariates: Some(vec!["temp".into()]),
            ..ColumnMapping::default()
        };
        assert!(SampleReader::new("x1,y@0,y@1\n".as_bytes(), &named, MalformedPolicy::Skip, false).is_err());
    }

    #[test]
    fn columns_sorted_by_location_and_selected_by_name() {
        let mapping = ColumnMapping {
            covariates: Some(vec!["b".into()]),
            intercept: true,
            ..ColumnMapping::default()
        };
        let text = "a,y@2,b,y@0\n9,20,7,10\n";
        let mut r = SampleReader::new(text.as_bytes(), &mapping, MalformedPolicy::Skip, false).unwrap();
        assert_eq!(r.layout().labels(), vec!["intercept".to_string(), "b".to_string()]);
        let s = r.next().unwrap().unwrap();
        assert_eq!(s.x, vec![1.0, 7.0]);
        assert_eq!(s.y, vec![10.0, 20.0]);
    }

    #[test]
    fn running_standardization() {
        let text = "x1,y@0,y@1\n1,0,0\n3,0,0\n5,0,0\n";
        let mut r = SampleReader::new(text.as_bytes(), &ColumnMapping::default(), MalformedPolicy::Skip, true).unwrap();
        let xs: Vec<f64> = r.by_ref().map(|s| s.unwrap().x[0]).collect();
        assert_eq!(xs[0], 0.0);
        // After {1, 3}: mean 2, sd sqrt(2).
        assert!((xs[1] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        // After {1, 3, 5}: mean 3, sd 2.
        assert!((xs[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, f64::MAX] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
    }
}
