//! JSON file formats.
//!
//! Matrices are arrays of rows; an entry is either a number or a `[re, im]`
//! pair. Every document carries `"format": 1`. Floats are written with 17
//! significant digits so output is bit-stable.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::game::{embed_classical, PayoffTable, QuantumGame, StrategyProfile};
use crate::linalg::HermitianMatrix;
use crate::strategies::StrategySignature;

pub const FORMAT: u64 = 1;

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
    parse_json(&text)
}

fn check_format(v: &Value) -> Result<()> {
    match v.get("format") {
        None => Ok(()),
        Some(f) if f.as_u64() == Some(FORMAT) => Ok(()),
        Some(f) => Err(parse_err(format!("unsupported format {f}"))),
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| parse_err(format!("missing field '{key}'")))
}

fn number(v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| parse_err(format!("expected a number, got {v}")))
}

fn entry(v: &Value) -> Result<Complex64> {
    match v {
        Value::Number(_) => Ok(Complex64::new(number(v)?, 0.0)),
        Value::Array(p) if p.len() == 2 => Ok(Complex64::new(number(&p[0])?, number(&p[1])?)),
        _ => Err(parse_err(format!("matrix entry must be a number or [re, im], got {v}"))),
    }
}

pub fn vector_from_json(v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| parse_err("expected an array of numbers"))?
        .iter()
        .map(number)
        .collect()
}

pub fn usize_list(v: &Value) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| parse_err("expected an array of integers"))?
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| parse_err(format!("expected a nonnegative integer, got {x}")))
        })
        .collect()
}

pub fn complex_matrix_from_json(v: &Value) -> Result<DMatrix<Complex64>> {
    let rows = v.as_array().ok_or_else(|| parse_err("matrix must be an array of rows"))?;
    let n_rows = rows.len();
    let mut entries = Vec::new();
    let mut n_cols = None;
    for row in rows {
        let row = row.as_array().ok_or_else(|| parse_err("matrix row must be an array"))?;
        if *n_cols.get_or_insert(row.len()) != row.len() {
            return Err(parse_err("ragged matrix rows"));
        }
        for e in row {
            entries.push(entry(e)?);
        }
    }
    Ok(DMatrix::from_row_slice(n_rows, n_cols.unwrap_or(0), &entries))
}

pub fn hermitian_from_json(v: &Value) -> Result<HermitianMatrix> {
    HermitianMatrix::new(complex_matrix_from_json(v)?)
}

/// Real entries are written as numbers, the rest as `[re, im]`.
pub fn matrix_to_json(m: &HermitianMatrix) -> Value {
    let a = m.matrix();
    Value::Array(
        (0..a.nrows())
            .map(|i| {
                Value::Array(
                    (0..a.ncols())
                        .map(|j| {
                            let z = a[(i, j)];
                            if z.im == 0.0 {
                                json!(z.re)
                            } else {
                                json!([z.re, z.im])
                            }
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn signature_from_json(v: &Value) -> Result<StrategySignature> {
    StrategySignature::new(usize_list(field(v, "in_dims")?)?, usize_list(field(v, "out_dims")?)?)
}

pub fn signature_to_json(s: &StrategySignature) -> Value {
    json!({ "in_dims": s.in_dims, "out_dims": s.out_dims })
}

fn flatten_table(v: &Value, shape: &mut Vec<usize>, depth: usize, out: &mut Vec<f64>) -> Result<()> {
    match v {
        Value::Array(items) => {
            if items.is_empty() {
                return Err(parse_err("empty payoff table axis"));
            }
            if shape.len() == depth {
                shape.push(items.len());
            } else if shape[depth] != items.len() {
                return Err(parse_err("ragged payoff table"));
            }
            items.iter().try_for_each(|x| flatten_table(x, shape, depth + 1, out))
        }
        _ => {
            if depth != shape.len() {
                return Err(parse_err("ragged payoff table"));
            }
            out.push(number(v)?);
            Ok(())
        }
    }
}

/// A nested array `t[a_1][a_2]…[a_m]`.
pub fn table_from_json(v: &Value) -> Result<PayoffTable> {
    let mut shape = Vec::new();
    let mut values = Vec::new();
    flatten_table(v, &mut shape, 0, &mut values)?;
    PayoffTable::new(shape, values)
}

/// Either `{"signatures": [...], "payoffs": [...]}` or a classical game
/// `{"tables": [...]}` with one nested payoff array per player.
pub fn game_from_json(v: &Value) -> Result<QuantumGame> {
    check_format(v)?;
    if let Some(tables) = v.get("tables") {
        let tables = tables
            .as_array()
            .ok_or_else(|| parse_err("'tables' must be an array"))?
            .iter()
            .map(table_from_json)
            .collect::<Result<Vec<_>>>()?;
        return embed_classical(&tables);
    }
    let sigs = field(v, "signatures")?
        .as_array()
        .ok_or_else(|| parse_err("'signatures' must be an array"))?
        .iter()
        .map(signature_from_json)
        .collect::<Result<Vec<_>>>()?;
    let payoffs = field(v, "payoffs")?
        .as_array()
        .ok_or_else(|| parse_err("'payoffs' must be an array"))?
        .iter()
        .map(hermitian_from_json)
        .collect::<Result<Vec<_>>>()?;
    QuantumGame::new(sigs, payoffs)
}

pub fn game_to_json(g: &QuantumGame) -> Value {
    json!({
        "format": FORMAT,
        "signatures": g.signatures().iter().map(signature_to_json).collect::<Vec<_>>(),
        "payoffs": g.payoffs().iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

/// `{"strategies": [Q_1, …]}`, validated against `game`.
pub fn profile_from_json(v: &Value, game: &QuantumGame) -> Result<StrategyProfile> {
    check_format(v)?;
    let mats = field(v, "strategies")?
        .as_array()
        .ok_or_else(|| parse_err("'strategies' must be an array"))?
        .iter()
        .map(hermitian_from_json)
        .collect::<Result<Vec<_>>>()?;
    if mats.len() != game.players() {
        return Err(Error::DimensionMismatch { expected: game.players(), actual: mats.len() });
    }
    for (m, s) in mats.iter().zip(game.signatures()) {
        if m.dim() != s.total_dim() {
            return Err(Error::DimensionMismatch { expected: s.total_dim(), actual: m.dim() });
        }
    }
    StrategyProfile::from_matrices(game.signatures(), mats)
}

pub fn profile_to_json(p: &StrategyProfile) -> Value {
    json!({
        "format": FORMAT,
        "strategies": p.strategies().iter().map(|s| matrix_to_json(s.matrix())).collect::<Vec<_>>(),
    })
}

/// Adds `"format": 1` to a serializable report.
pub fn report<T: Serialize>(body: &T) -> Value {
    let mut v = serde_json::to_value(body).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut v {
        map.insert("format".into(), json!(FORMAT));
    }
    v
}

struct FixedDigits<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
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
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with every float in `{:.16e}` form and a trailing newline.
pub fn to_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(serde_json::ser::PrettyFormatter::new()));
    v.serialize(&mut ser).expect("writing to a Vec cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
