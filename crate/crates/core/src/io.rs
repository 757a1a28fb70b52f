//! CSV and JSON serialization. Every float is written with 17 significant
//! digits so values round-trip exactly.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `t,x` rows.
pub fn write_path_csv<W: Write>(out: W, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x"]).map_err(csv_err)?;
    for (t, x) in path.times().iter().zip(path.values()) {
        w.write_record([fmt_f64(*t), fmt_f64(*x)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,x,y` rows.
pub fn write_path2_csv<W: Write>(out: W, path: &Path<(f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y"]).map_err(csv_err)?;
    for (t, (x, y)) in path.times().iter().zip(path.values()) {
        w.write_record([fmt_f64(*t), fmt_f64(*x), fmt_f64(*y)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table with a header row.
pub fn write_table_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid(format!("row has {} fields, header has {}", r.len(), header.len())));
        }
        w.write_record(r.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,x` path. Extra columns are ignored; the header must start with `t,x`.
pub fn read_path_csv<R: Read>(input: R) -> Result<Path> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let head = r.headers().map_err(csv_err)?.clone();
    if head.len() < 2 || &head[0] != "t" || &head[1] != "x" {
        return Err(Error::Parse(format!("expected header t,x, got {}", head.iter().collect::<Vec<_>>().join(","))));
    }
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad number in column {}", i + 2, j + 1)))
        };
        ts.push(parse(0)?);
        xs.push(parse(1)?);
    }
    if ts.len() < 2 {
        return Err(Error::Parse("a path needs at least two rows".into()));
    }
    Path::new(ts, xs)
}

/// Pretty JSON formatter with 17-significant-digit floats.
struct Precise(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(out: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(out, Precise(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trip_is_exact() {
        let p = Path::uniform(1.0, 7, |t| (3.0 * t).sin() / 7.0);
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &p).unwrap();
        let q = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn header_is_checked() {
        assert!(read_path_csv("a,b\n0,1\n1,2\n".as_bytes()).is_err());
        assert!(read_path_csv("t,x\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn json_floats_have_17_digits() {
        let s = to_json_string(&serde_json::json!({"v": 0.1, "k": [1.0, f64::NAN]})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("null"));
    }
}
