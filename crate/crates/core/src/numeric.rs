//! Small numeric building blocks shared by every module.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Mean that depends only on the multiset of inputs, never on their order.
///
/// Values are sorted with `total_cmp` and folded with a running mean, so a
/// permutation of the input gives bit-identical output and a constant
/// sequence returns that constant exactly. Returns `NaN` for an empty slice.
pub fn order_free_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    running_mean(&sorted)
}

/// Running mean in slice order. Exact for constant sequences.
pub fn running_mean(values: &[f64]) -> f64 {
    let mut mean = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k == 0 {
            mean = *v;
        } else {
            mean += (v - mean) / (k as f64 + 1.0);
        }
    }
    if values.is_empty() {
        f64::NAN
    } else {
        mean
    }
}

/// Solves the symmetric system `a x = b` for small dense `a`.
///
/// The matrix is Jacobi-scaled to a unit diagonal, then reduced by Gaussian
/// elimination with partial pivoting. Returns `None` when a diagonal entry is
/// not strictly positive or a scaled pivot falls below `1e-10`.
pub fn solve_symmetric(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let d = a[i][i];
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        scale[i] = d.sqrt();
    }
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| a[i][j] / (scale[i] * scale[j])).collect();
            row.push(b[i] / scale[i]);
            row
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs())).unwrap_or(col);
        if m[pivot][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                let (upper, lower) = m.split_at_mut(row);
                for (t, s) in lower[0][col..=n].iter_mut().zip(&upper[col][col..=n]) {
                    *t -= factor * s;
                }
            }
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in i + 1..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Some(x.iter().zip(&scale).map(|(u, s)| u / s).collect())
}

/// Pretty JSON formatter that writes every float with 17 significant digits.
pub struct Sig17Formatter {
    inner: PrettyFormatter<'static>,
}

impl Sig17Formatter {
    pub fn new() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

impl Default for Sig17Formatter {
    fn default() -> Self {
        Self::new()
    }
}

impl Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter::new());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}
