//! Reading and writing matrices and tilings.
//!
//! * Triplets CSV: header `row,col,value`, 0-based indices, values 0 or 1.
//!   An optional `# rows=R cols=C` comment fixes the dimensions; otherwise
//!   they are the largest indices plus one.
//! * MovieLens ratings: tab-separated `user item rating [timestamp]` with
//!   1-based ids. Ratings at or above the threshold become observed ones
//!   and the rest observed zeros; ids are remapped densely in sorted order.
//! * Tilings: `U.csv` and `V.csv`, dense 0/1 with header
//!   `tile_0,...,tile_{k-1}` and one line per row (or column).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::binmat::ObservedBinaryMatrix;
use crate::error::{Error, Result};
use crate::tbmc::{Tiling, TilingTile};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, e.to_string())
}

/// Dimensions from a `# rows=R cols=C` comment.
fn declared_dims(text: &str) -> Result<Option<(usize, usize)>> {
    for (n, line) in text.lines().enumerate() {
        let Some(body) = line.trim().strip_prefix('#') else {
            continue;
        };
        let (mut rows, mut cols) = (None, None);
        for part in body.split_whitespace() {
            let slot = match part.split_once('=') {
                Some(("rows", v)) => (&mut rows, v),
                Some(("cols", v)) => (&mut cols, v),
                _ => continue,
            };
            let value = slot.1.parse().map_err(|_| parse_err(n + 1, format!("bad dimension {part:?}")))?;
            *slot.0 = Some(value);
        }
        match (rows, cols) {
            (Some(r), Some(c)) => return Ok(Some((r, c))),
            (None, None) => continue,
            _ => return Err(parse_err(n + 1, "dimension comment needs both rows= and cols=")),
        }
    }
    Ok(None)
}

pub fn parse_triplets(text: &str) -> Result<ObservedBinaryMatrix> {
    let dims = declared_dims(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["row", "col", "value"] {
        let line = header.position().map_or(1, |p| p.line() as usize);
        return Err(parse_err(line, "expected header row,col,value"));
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let index = |k: usize, name: &str| -> Result<usize> {
            record[k]
                .parse()
                .map_err(|_| parse_err(line, format!("bad {name} index {:?}", &record[k])))
        };
        let (i, j) = (index(0, "row")?, index(1, "col")?);
        let bit = match &record[2] {
            "0" => false,
            "1" => true,
            v if v.parse::<i64>().is_ok() => {
                return Err(Error::ValueOutOfDomain {
                    line,
                    value: v.to_string(),
                })
            }
            v => return Err(parse_err(line, format!("bad value {v:?}"))),
        };
        cells.push((i, j, bit));
    }
    let (rows, cols) = dims.unwrap_or_else(|| {
        let r = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let c = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        (r, c)
    });
    ObservedBinaryMatrix::from_triplets(rows, cols, cells)
}

pub fn read_triplets_csv(path: impl AsRef<Path>) -> Result<ObservedBinaryMatrix> {
    parse_triplets(&fs::read_to_string(path)?)
}

pub fn format_triplets(m: &ObservedBinaryMatrix) -> String {
    let mut out = format!("# rows={} cols={}\nrow,col,value\n", m.n_rows(), m.n_cols());
    for (i, j, bit) in m.entries() {
        let _ = writeln!(out, "{i},{j},{}", u8::from(bit));
    }
    out
}

pub fn write_triplets_csv(m: &ObservedBinaryMatrix, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, format_triplets(m))?)
}

/// A binarised ratings file with the original ids of rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratings {
    pub matrix: ObservedBinaryMatrix,
    /// Original user id of each row.
    pub users: Vec<u64>,
    /// Original item id of each column.
    pub items: Vec<u64>,
}

pub const DEFAULT_THRESHOLD: f64 = 4.0;

pub fn parse_movielens(text: &str, threshold: f64) -> Result<Ratings> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut raw = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 3 {
            return Err(parse_err(line, "expected user, item and rating"));
        }
        let id = |k: usize| -> Result<u64> {
            record[k]
                .parse()
                .map_err(|_| parse_err(line, format!("bad id {:?}", &record[k])))
        };
        let rating: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad rating {:?}", &record[2])))?;
        raw.push((id(0)?, id(1)?, rating >= threshold));
    }
    let dense = |pick: fn(&(u64, u64, bool)) -> u64| {
        let mut ids: Vec<u64> = raw.iter().map(pick).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let users = dense(|r| r.0);
    let items = dense(|r| r.1);
    let index = |ids: &[u64], id: u64| ids.binary_search(&id).unwrap_or_default();
    let cells = raw
        .iter()
        .map(|&(u, i, bit)| (index(&users, u), index(&items, i), bit));
    let matrix = ObservedBinaryMatrix::from_triplets(users.len(), items.len(), cells)?;
    Ok(Ratings { matrix, users, items })
}

pub fn read_movielens(path: impl AsRef<Path>, threshold: f64) -> Result<Ratings> {
    parse_movielens(&fs::read_to_string(path)?, threshold)
}

/// Writes `index,id` lines for a dense id remapping.
pub fn write_id_map(ids: &[u64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("index,id\n");
    for (k, id) in ids.iter().enumerate() {
        let _ = writeln!(out, "{k},{id}");
    }
    Ok(fs::write(path, out)?)
}

fn format_factor(lines: usize, tiles: &[TilingTile], pick: fn(&TilingTile) -> &Vec<bool>) -> String {
    let header: Vec<String> = (0..tiles.len()).map(|t| format!("tile_{t}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..lines {
        let row: Vec<&str> = tiles.iter().map(|t| if pick(t)[i] { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a factor file into one bit vector per tile.
fn parse_factor(text: &str, name: &str) -> Result<Vec<Vec<bool>>> {
    let body = text.strip_suffix('\n').ok_or_else(|| parse_err(1, format!("{name} is empty")))?;
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or_default();
    let k = if header.is_empty() { 0 } else { header.split(',').count() };
    for (t, h) in header.split(',').enumerate().take(k) {
        if h != format!("tile_{t}") {
            return Err(parse_err(1, format!("{name}: expected tile_{t}, got {h:?}")));
        }
    }
    let mut columns = vec![Vec::new(); k];
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = if k == 0 { Vec::new() } else { line.split(',').collect() };
        if fields.len() != k || (k == 0 && !line.is_empty()) {
            return Err(parse_err(n + 2, format!("{name}: expected {k} fields")));
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            col.push(match f {
                "0" => false,
                "1" => true,
                v => {
                    return Err(Error::ValueOutOfDomain {
                        line: n + 2,
                        value: v.to_string(),
                    })
                }
            });
        }
    }
    Ok(columns)
}

fn count_rows(text: &str) -> usize {
    text.matches('\n').count().saturating_sub(1)
}

pub fn write_tiling(t: &Tiling, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("U.csv"), format_factor(t.n_rows(), t.tiles(), |x| &x.u))?;
    fs::write(dir.join("V.csv"), format_factor(t.n_cols(), t.tiles(), |x| &x.v))?;
    Ok(())
}

pub fn read_tiling(dir: impl AsRef<Path>) -> Result<Tiling> {
    let dir = dir.as_ref();
    let u_text = fs::read_to_string(dir.join("U.csv"))?;
    let v_text = fs::read_to_string(dir.join("V.csv"))?;
    let us = parse_factor(&u_text, "U.csv")?;
    let vs = parse_factor(&v_text, "V.csv")?;
    if us.len() != vs.len() {
        return Err(Error::DimensionMismatch(format!(
            "U.csv has {} tiles but V.csv has {}",
            us.len(),
            vs.len()
        )));
    }
    let tiles = us.into_iter().zip(vs).map(|(u, v)| TilingTile { u, v }).collect();
    Tiling::new(count_rows(&u_text), count_rows(&v_text), tiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_examples() {
        let m = parse_triplets("row,col,value\n0,0,1\n1,1,0\n").unwrap();
        assert_eq!((m.n_rows(), m.n_cols(), m.n_observed()), (2, 2, 2));
        assert_eq!(m.get(1, 1), Some(false));

        assert_eq!(
            parse_triplets("row,col,value\n0,0,3\n"),
            Err(Error::ValueOutOfDomain { line: 2, value: "3".into() })
        );

        let empty = parse_triplets("row,col,value\n").unwrap();
        assert_eq!((empty.n_rows(), empty.n_cols()), (0, 0));
        let sized = parse_triplets("# rows=3 cols=4\nrow,col,value\n").unwrap();
        assert_eq!((sized.n_rows(), sized.n_cols(), sized.n_observed()), (3, 4, 0));
    }

    #[test]
    fn triplet_errors() {
        assert!(matches!(parse_triplets("r,c,v\n0,0,1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_triplets("row,col,value\nx,0,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_triplets("row,col,value\n0,0,1\n0,0,0\n"), Err(Error::DuplicateEntry(0, 0))));
        assert!(matches!(
            parse_triplets("# rows=1 cols=1\nrow,col,value\n0,3,1\n"),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(parse_triplets("row,col,value\n0,0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_triplets("row,col,value\n0,0,yes\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn triplets_round_trip_and_order_insensitive() {
        let text = "row,col,value\n2,0,1\n0,1,0\n1,2,1\n0,0,1\n";
        let m = parse_triplets(text).unwrap();
        assert_eq!(parse_triplets(&format_triplets(&m)).unwrap(), m);
        let shuffled = "row,col,value\n0,0,1\n1,2,1\n0,1,0\n2,0,1\n";
        assert_eq!(parse_triplets(shuffled).unwrap(), m);
    }

    #[test]
    fn movielens_examples() {
        let r = parse_movielens("1\t5\t4\t881250949\n", DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.matrix.get(0, 0), Some(true));
        assert_eq!((r.users.clone(), r.items.clone()), (vec![1], vec![5]));

        let r = parse_movielens("1\t5\t3\t0\n2\t5\t5\t0\n", DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.matrix.get(0, 0), Some(false));
        assert_eq!(r.matrix.get(1, 0), Some(true));

        assert!(matches!(
            parse_movielens("1\t5\t4\t0\n1\t5\t2\t1\n", DEFAULT_THRESHOLD),
            Err(Error::DuplicateEntry(0, 0))
        ));
        assert!(matches!(parse_movielens("1\tfive\t4\t0\n", DEFAULT_THRESHOLD), Err(Error::Parse { .. })));

        // the three-level scale binarised at 3
        let r = parse_movielens("7\t9\t3\n7\t10\t2\n", 3.0).unwrap();
        assert_eq!(r.matrix.row(0), &[(0, true), (1, false)]);
    }

    #[test]
    fn movielens_ignores_line_order() {
        let a = parse_movielens("3\t1\t5\t0\n1\t2\t1\t0\n2\t1\t4\t0\n", 4.0).unwrap();
        let b = parse_movielens("2\t1\t4\t0\n3\t1\t5\t0\n1\t2\t1\t0\n", 4.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiling_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = Tiling::empty(3, 2);
        write_tiling(&empty, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("U.csv")).unwrap(), "\n\n\n\n");
        assert_eq!(read_tiling(dir.path()).unwrap(), empty);

        let full = Tiling::new(2, 2, vec![TilingTile { u: vec![true; 2], v: vec![true; 2] }]).unwrap();
        write_tiling(&full, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("U.csv")).unwrap(), "tile_0\n1\n1\n");
        assert_eq!(fs::read_to_string(dir.path().join("V.csv")).unwrap(), "tile_0\n1\n1\n");
        assert_eq!(read_tiling(dir.path()).unwrap(), full);

        fs::write(dir.path().join("V.csv"), "tile_0\n1\n2\n").unwrap();
        assert!(matches!(read_tiling(dir.path()), Err(Error::ValueOutOfDomain { line: 3, .. })));
        assert!(matches!(read_tiling(dir.path().join("missing")), Err(Error::Io(_))));
    }
}
