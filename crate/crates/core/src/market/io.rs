use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use super::{align_meta, AssetMeta, PricePanel};
use crate::error::{Error, Result};

const DATE_FMT: &str = "%Y-%m-%d";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn required_column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| parse_err(path, 1, format!("missing column '{name}'")))
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} '{field}'")))
}

type Cells = HashMap<(NaiveDate, String), (f64, Option<f64>)>;

fn read_long(path: &Path, value_col: &str, with_volume: bool) -> Result<Cells> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let di = required_column(path, &headers, "date")?;
    let ai = required_column(path, &headers, "asset_id")?;
    let vi = required_column(path, &headers, value_col)?;
    let voli = if with_volume { column(&headers, "volume") } else { None };
    let mut cells = Cells::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(pos) => parse_err(path, pos.line() as usize, e.to_string()),
            None => Error::csv(path, e),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&rec[di], DATE_FMT)
            .map_err(|_| parse_err(path, line, format!("bad date '{}'", &rec[di])))?;
        let asset = rec[ai].to_string();
        if asset.is_empty() {
            return Err(parse_err(path, line, "empty asset_id"));
        }
        let value = parse_f64(path, line, &rec[vi], value_col)?;
        let volume = match voli {
            Some(i) if !rec[i].is_empty() => Some(parse_f64(path, line, &rec[i], "volume")?),
            _ => None,
        };
        if cells.insert((date, asset.clone()), (value, volume)).is_some() {
            return Err(Error::Duplicate { asset, date });
        }
    }
    Ok(cells)
}

/// Reads `asset_id,country,sector`.
pub fn read_meta(path: &Path) -> Result<Vec<AssetMeta>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let ai = required_column(path, &headers, "asset_id")?;
    let ci = required_column(path, &headers, "country")?;
    let si = required_column(path, &headers, "sector")?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let asset_id = rec[ai].to_string();
        if !seen.insert(asset_id.clone()) {
            return Err(parse_err(path, line, format!("duplicate meta record for '{asset_id}'")));
        }
        let country = rec[ci]
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        let sector = rec[si]
            .parse()
            .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        out.push(AssetMeta {
            asset_id,
            country,
            sector,
        });
    }
    Ok(out)
}

/// Loads long-format prices (and optionally a separate volume file) plus metadata.
///
/// The panel covers the union of all dates seen. Assets are ordered by
/// country, then sector, then id. Missing cells are `NaN`.
pub fn load_prices(
    price_path: &Path,
    volume_path: Option<&Path>,
    meta_path: &Path,
) -> Result<(PricePanel, Vec<AssetMeta>)> {
    let prices = read_long(price_path, "close", true)?;
    let volumes = match volume_path {
        Some(p) => Some(read_long(p, "volume", false)?),
        None => None,
    };
    let meta = read_meta(meta_path)?;

    let mut dates = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for (d, a) in prices.keys() {
        dates.insert(*d);
        ids.insert(a.clone());
    }
    let ids: Vec<String> = ids.into_iter().collect();
    let mut aligned = align_meta(&ids, &meta)?;
    aligned.sort_by(|a, b| (a.country, a.sector, &a.asset_id).cmp(&(b.country, b.sector, &b.asset_id)));
    let assets: Vec<String> = aligned.iter().map(|m| m.asset_id.clone()).collect();
    let dates: Vec<NaiveDate> = dates.into_iter().collect();

    let col: HashMap<&str, usize> = assets.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let row: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut pm = Array2::from_elem((dates.len(), assets.len()), f64::NAN);
    let mut vm = Array2::from_elem((dates.len(), assets.len()), f64::NAN);
    for ((d, a), (p, v)) in &prices {
        if !(*p > 0.0 && p.is_finite()) {
            return Err(Error::Validation {
                asset: a.clone(),
                date: *d,
                message: format!("price {p} is not strictly positive"),
            });
        }
        let (t, j) = (row[d], col[a.as_str()]);
        pm[[t, j]] = *p;
        if let Some(v) = v {
            vm[[t, j]] = *v;
        }
    }
    if let Some(vols) = volumes {
        for ((d, a), (v, _)) in &vols {
            if let (Some(&t), Some(&j)) = (row.get(d), col.get(a.as_str())) {
                vm[[t, j]] = *v;
            }
        }
    }
    for ((t, j), v) in vm.indexed_iter() {
        if !v.is_nan() && *v < 0.0 {
            return Err(Error::Validation {
                asset: assets[j].clone(),
                date: dates[t],
                message: format!("negative volume {v}"),
            });
        }
    }
    let panel = PricePanel::new(dates, assets, pm, vm)?;
    Ok((panel, aligned))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub(crate) fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// Writes `date,asset_id,close,volume`, one row per present price.
pub fn write_prices(path: &Path, panel: &PricePanel) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "date,asset_id,close,volume").map_err(io)?;
    for (t, d) in panel.dates.iter().enumerate() {
        for (j, a) in panel.assets.iter().enumerate() {
            let p = panel.prices[[t, j]];
            if p.is_nan() {
                continue;
            }
            writeln!(
                w,
                "{},{},{},{}",
                d.format(DATE_FMT),
                a,
                p,
                fmt_cell(panel.volumes[[t, j]])
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn write_meta(path: &Path, meta: &[AssetMeta]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "asset_id,country,sector").map_err(io)?;
    for m in meta {
        writeln!(w, "{},{},{}", m.asset_id, m.country.code(), m.sector.name()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub(crate) fn write_wide(path: &Path, dates: &[NaiveDate], assets: &[String], values: &Array2<f64>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "date").map_err(io)?;
    for a in assets {
        write!(w, ",{a}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (t, d) in dates.iter().enumerate() {
        write!(w, "{}", d.format(DATE_FMT)).map_err(io)?;
        for j in 0..assets.len() {
            write!(w, ",{}", fmt_cell(values[[t, j]])).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub(crate) fn read_wide(path: &Path) -> Result<(Vec<NaiveDate>, Vec<String>, Array2<f64>)> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.get(0).map(|h| h.eq_ignore_ascii_case("date")) != Some(true) {
        return Err(parse_err(path, 1, "first column must be 'date'"));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut flat = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        dates.push(
            NaiveDate::parse_from_str(&rec[0], DATE_FMT)
                .map_err(|_| parse_err(path, line, format!("bad date '{}'", &rec[0])))?,
        );
        for field in rec.iter().skip(1) {
            flat.push(if field.is_empty() {
                f64::NAN
            } else {
                parse_f64(path, line, field, "value")?
            });
        }
    }
    let values =
        Array2::from_shape_vec((dates.len(), assets.len()), flat).map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok((dates, assets, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    const META: &str = "asset_id,country,sector\nA,USA,Energy\nB,GER,Financials\nC,JPN,IT\n";

    fn prices_3x5() -> String {
        let mut s = String::from("date,asset_id,close,volume\n");
        for d in 1..=5 {
            for a in ["A", "B", "C"] {
                s.push_str(&format!("2020-01-0{d},{a},{}.5,100\n", 10 + d));
            }
        }
        s
    }

    #[test]
    fn loads_well_formed_panel() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "p.csv", &prices_3x5());
        let m = write(dir.path(), "m.csv", META);
        let (panel, meta) = load_prices(&p, None, &m).unwrap();
        assert_eq!(panel.prices.dim(), (5, 3));
        assert_eq!(meta.len(), 3);
        // vocabulary order: JPN, USA, GER
        assert_eq!(panel.assets, vec!["C", "A", "B"]);
        assert_eq!(panel.volumes[[0, 0]], 100.0);
    }

    #[test]
    fn negative_price_names_asset_and_date() {
        let dir = tempfile::tempdir().unwrap();
        let body = prices_3x5().replace("2020-01-03,B,13.5", "2020-01-03,B,-4.2");
        let p = write(dir.path(), "p.csv", &body);
        let m = write(dir.path(), "m.csv", META);
        match load_prices(&p, None, &m) {
            Err(Error::Validation { asset, date, .. }) => {
                assert_eq!(asset, "B");
                assert_eq!(date, NaiveDate::from_ymd_opt(2020, 1, 3).unwrap());
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn orphan_asset_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{}2020-01-01,Z,1.0,5\n", prices_3x5());
        let p = write(dir.path(), "p.csv", &body);
        let m = write(dir.path(), "m.csv", META);
        match load_prices(&p, None, &m) {
            Err(Error::MissingMeta(ids)) => assert_eq!(ids, vec!["Z".to_string()]),
            other => panic!("expected missing meta, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = "date,asset_id,close\n2020-01-01,A,1.0\n2020-01-02,A,abc\n";
        let p = write(dir.path(), "p.csv", body);
        let m = write(dir.path(), "m.csv", META);
        match load_prices(&p, None, &m) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = "date,asset_id,close\n2020-01-01,A,1.0\n2020-01-01,A,2.0\n";
        let p = write(dir.path(), "p.csv", body);
        let m = write(dir.path(), "m.csv", META);
        assert!(matches!(load_prices(&p, None, &m), Err(Error::Duplicate { .. })));
    }

    #[test]
    fn separate_volume_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.csv",
            "date,asset_id,close\n2020-01-01,A,1.0\n2020-01-02,A,1.1\n",
        );
        let v = write(dir.path(), "v.csv", "date,asset_id,volume\n2020-01-02,A,0\n");
        let m = write(dir.path(), "m.csv", META);
        let (panel, _) = load_prices(&p, Some(&v), &m).unwrap();
        assert!(panel.volumes[[0, 0]].is_nan());
        assert_eq!(panel.volumes[[1, 0]], 0.0);
    }

    #[test]
    fn wide_roundtrip_keeps_missing() {
        let dir = tempfile::tempdir().unwrap();
        let dates = vec![
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
        ];
        let assets = vec!["x".to_string(), "y".to_string()];
        let vals = ndarray::array![[0.1, f64::NAN], [-0.25, 1e-17]];
        let path = dir.path().join("w.csv");
        write_wide(&path, &dates, &assets, &vals).unwrap();
        let (d2, a2, v2) = read_wide(&path).unwrap();
        assert_eq!(d2, dates);
        assert_eq!(a2, assets);
        assert_eq!(v2[[0, 0]], 0.1);
        assert!(v2[[0, 1]].is_nan());
        assert_eq!(v2[[1, 1]], 1e-17);
    }
}
