use std::io::Write;
use std::path::Path;

use crate::embed::{clean_positive, Forecast, TimeSeries};
use crate::error::{Error, Result};

/// Contents of a series CSV: optional `date`, required `value`, and any
/// other columns as exogenous channels. Empty `value` cells are missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesFile {
    pub dates: Option<Vec<String>>,
    pub values: Vec<Option<f64>>,
    pub exogenous: Vec<(String, Vec<f64>)>,
}

impl SeriesFile {
    pub fn from_series(series: &TimeSeries) -> Self {
        SeriesFile {
            dates: series.timestamps.clone(),
            values: series.values.iter().map(|&v| Some(v)).collect(),
            exogenous: series
                .exogenous
                .iter()
                .map(|c| (c.name.clone(), c.values.clone()))
                .collect(),
        }
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// Converts to a series. Missing values are an error unless
    /// `fill_positive` is set, in which case they (and non-positive values)
    /// are filled by log-linear interpolation.
    pub fn to_series(&self, fill_positive: bool) -> Result<TimeSeries> {
        let values = if fill_positive {
            clean_positive(&self.values)?
        } else {
            if let Some(i) = self.missing_rows().first() {
                return Err(Error::Parse(format!("row {}: missing `value`", i + 2)));
            }
            self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
        };
        let mut series = TimeSeries::new(values);
        for (name, values) in &self.exogenous {
            series = series.with_channel(name.clone(), values.clone())?;
        }
        series.timestamps = self.dates.clone();
        Ok(series)
    }
}

fn valid_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 10 || b[4] != b'-' || b[7] != b'-' || (b.len() > 10 && b[10] != b'T' && b[10] != b' ') {
        return false;
    }
    let num = |r: std::ops::Range<usize>| s.get(r).and_then(|x| x.parse::<u32>().ok());
    matches!(
        (num(0..4), num(5..7), num(8..10)),
        (Some(_), Some(1..=12), Some(1..=31))
    )
}

/// Reads a series CSV. Row numbers in errors count the header as row 1.
pub fn read_series(path: &Path) -> Result<SeriesFile> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let value_col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Parse("row 1: no `value` column".into()))?;
    let date_col = headers.iter().position(|h| h == "date");
    let exog_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != value_col && Some(i) != date_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut out = SeriesFile {
        dates: date_col.map(|_| Vec::new()),
        values: Vec::new(),
        exogenous: exog_cols.iter().map(|(_, h)| (h.clone(), Vec::new())).collect(),
    };
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let number = |col: usize, name: &str| -> Result<Option<f64>> {
            let cell = record.get(col).unwrap_or("");
            if cell.is_empty() {
                return Ok(None);
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::Parse(format!("row {row}: bad `{name}` value `{cell}`"))),
            }
        };
        out.values.push(number(value_col, "value")?);
        for (k, (col, name)) in exog_cols.iter().enumerate() {
            let v = number(*col, name)?
                .ok_or_else(|| Error::Parse(format!("row {row}: missing `{name}`")))?;
            out.exogenous[k].1.push(v);
        }
        if let (Some(col), Some(dates)) = (date_col, out.dates.as_mut()) {
            let d = record.get(col).unwrap_or("");
            if !valid_date(d) {
                return Err(Error::Parse(format!("row {row}: bad date `{d}`")));
            }
            if dates.last().is_some_and(|prev: &String| prev.as_str() >= d) {
                return Err(Error::Parse(format!("row {row}: dates not ascending")));
            }
            dates.push(d.to_string());
        }
    }
    if out.values.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

pub fn write_series(path: &Path, file: &SeriesFile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = Vec::new();
    if file.dates.is_some() {
        header.push("date".to_string());
    }
    header.push("value".to_string());
    header.extend(file.exogenous.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for (i, v) in file.values.iter().enumerate() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(d) = &file.dates {
            rec.push(d[i].clone());
        }
        rec.push(v.map(|x| x.to_string()).unwrap_or_default());
        rec.extend(file.exogenous.iter().map(|(_, c)| c[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes forecasts as CSV with columns `t,transformed,level`; `level` is
/// empty when no pipeline was used.
pub fn write_forecasts<W: Write>(out: W, forecasts: &[Forecast]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "transformed", "level"])?;
    for f in forecasts {
        w.write_record([
            f.t.to_string(),
            f.transformed.to_string(),
            f.level.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_dates_values_and_channels() {
        let (_d, p) = write("date,value,x\n2020-03-01,1.5,0.25\n2020-03-02,,0.5\n2020-03-03,3,-1e-3\n");
        let f = read_series(&p).unwrap();
        assert_eq!(f.dates.as_ref().unwrap().len(), 3);
        assert_eq!(f.values, vec![Some(1.5), None, Some(3.0)]);
        assert_eq!(f.exogenous, vec![("x".to_string(), vec![0.25, 0.5, -0.001])]);
        assert!(f.to_series(false).is_err());
        let s = f.to_series(true).unwrap();
        assert!((s.values[1] - (1.5f64 * 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.channel("x").unwrap().len(), 3);
    }

    #[test]
    fn errors_carry_row_numbers() {
        let (_d, p) = write("date,x\n2020-01-01,1\n");
        assert!(read_series(&p).unwrap_err().to_string().contains("row 1"));
        let (_d, p) = write("value\n1\n2\nabc\n");
        assert!(read_series(&p).unwrap_err().to_string().contains("row 4"));
        let (_d, p) = write("date,value\n2020-01-02,1\n2020-01-01,2\n");
        assert!(read_series(&p).unwrap_err().to_string().contains("row 3"));
        let (_d, p) = write("date,value\n2020-13-02,1\n");
        assert!(read_series(&p).unwrap_err().to_string().contains("row 2"));
        let (_d, p) = write("value,x\n1,\n");
        assert!(read_series(&p).unwrap_err().to_string().contains("row 2"));
    }

    #[test]
    fn write_read_round_trip() {
        let file = SeriesFile {
            dates: None,
            values: vec![Some(0.1), Some(-2.5e-17), None, Some(123456.789)],
            exogenous: vec![("z".into(), vec![1.0 / 3.0, 2.0, 3.0, 4.0])],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_series(&p, &file).unwrap();
        assert_eq!(read_series(&p).unwrap(), file);
    }

    #[test]
    fn forecast_csv() {
        let mut buf = Vec::new();
        write_forecasts(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,transformed,level\n");
        let mut buf = Vec::new();
        write_forecasts(&mut buf, &[Forecast { t: 4, transformed: 0.5, level: None }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,transformed,level\n4,0.5,\n");
    }
}
