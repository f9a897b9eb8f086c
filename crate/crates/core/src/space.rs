//! Mixed-radix index space, dense tables over it, and datasets of discrete rows.
//!
//! A `VariableSpec` declares n finite variables with cardinalities
//! `cards[0..n]`. Joint states are vectors `x` with `x[i] in 0..cards[i]`,
//! flattened so that `x[0]` is the fastest-varying digit:
//!
//! ```text
//! flat(x) = sum_i x[i] * stride(i),   stride(i) = cards[0] * ... * cards[i-1]
//! ```
//!
//! Everything downstream (tables, transforms, models) indexes states and
//! basis labels through this one convention.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format;

/// Cardinalities of a finite discrete variable set, with derived strides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpec {
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl VariableSpec {
    /// Build a spec from per-variable cardinalities. Every cardinality must be
    /// at least 2 and the joint size must fit in `usize`.
    pub fn new(cards: Vec<usize>) -> Result<Self> {
        if cards.is_empty() {
            return Err(Error::Domain("spec needs at least one variable".into()));
        }
        let mut strides = Vec::with_capacity(cards.len());
        let mut size: usize = 1;
        for (i, &c) in cards.iter().enumerate() {
            if c < 2 {
                return Err(Error::Domain(format!(
                    "variable {i} has cardinality {c}, need at least 2"
                )));
            }
            strides.push(size);
            size = size.checked_mul(c).ok_or_else(|| {
                Error::Capacity("joint space does not fit in usize".into())
            })?;
        }
        Ok(Self { cards, strides, size })
    }

    /// Convenience constructor for n binary variables.
    pub fn binary(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn n(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn card(&self, axis: usize) -> usize {
        self.cards[axis]
    }

    /// Number of joint states |X|.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Flat-index stride of one axis (product of the cardinalities below it).
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Flatten a digit vector. Errors if the arity or any digit is out of range.
    pub fn pack(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.n() {
            return Err(Error::Index(format!(
                "digit vector has length {}, spec has {} variables",
                digits.len(),
                self.n()
            )));
        }
        let mut flat = 0;
        for (i, &d) in digits.iter().enumerate() {
            if d >= self.cards[i] {
                return Err(Error::Index(format!(
                    "digit {d} out of range for variable {i} (cardinality {})",
                    self.cards[i]
                )));
            }
            flat += d * self.strides[i];
        }
        Ok(flat)
    }

    /// Invert `pack`. Errors if `flat` is outside the joint space.
    pub fn unpack(&self, flat: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.n()];
        self.unpack_into(flat, &mut out)?;
        Ok(out)
    }

    /// Allocation-free `unpack` for hot loops.
    pub fn unpack_into(&self, flat: usize, out: &mut [usize]) -> Result<()> {
        if flat >= self.size {
            return Err(Error::Index(format!(
                "flat index {flat} out of range for joint size {}",
                self.size
            )));
        }
        debug_assert_eq!(out.len(), self.n());
        let mut rest = flat;
        for (i, &c) in self.cards.iter().enumerate() {
            out[i] = rest % c;
            rest /= c;
        }
        Ok(())
    }
}

/// What a dense table's entries mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Nonnegative entries summing to 1.
    Distribution,
    /// Unconstrained reals (dual coordinates, penalties, log-densities).
    Coefficients,
}

/// A dense `f64` table with one entry per joint state, indexed by flat index.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTable {
    spec: VariableSpec,
    values: Vec<f64>,
    kind: TableKind,
}

impl DenseTable {
    /// Wrap values as a distribution. Validates length, nonnegativity, and
    /// normalization to within 1e-12.
    pub fn distribution(spec: VariableSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.size() {
            return Err(Error::Domain(format!(
                "table has {} entries, spec has {} states",
                values.len(),
                spec.size()
            )));
        }
        let mut sum = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::Numeric(format!(
                    "distribution entry {i} is {v}, must be nonnegative"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Numeric(format!(
                "distribution sums to {sum}, must be 1 within 1e-12"
            )));
        }
        Ok(Self { spec, values, kind: TableKind::Distribution })
    }

    /// Distribution constructor for internal callers that normalize
    /// explicitly and must not pay (or fail) the validation pass.
    pub(crate) fn distribution_unchecked(spec: VariableSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.size());
        Self { spec, values, kind: TableKind::Distribution }
    }

    /// Wrap values as unconstrained coefficients. Validates length only.
    pub fn coefficients(spec: VariableSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.size() {
            return Err(Error::Domain(format!(
                "table has {} entries, spec has {} states",
                values.len(),
                spec.size()
            )));
        }
        Ok(Self { spec, values, kind: TableKind::Coefficients })
    }

    /// The uniform distribution over the joint space.
    pub fn uniform(spec: VariableSpec) -> Self {
        let size = spec.size();
        Self {
            spec,
            values: vec![1.0 / size as f64; size],
            kind: TableKind::Distribution,
        }
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for in-place algorithms. Callers are responsible for
    /// restoring the declared kind's invariants before handing the table on.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }
}

/// N observed rows over a spec, stored flat (row-major).
#[derive(Debug, Clone)]
pub struct Dataset {
    spec: VariableSpec,
    flat_rows: Vec<u32>,
    n_rows: usize,
}

impl Dataset {
    /// Build from explicit rows, validating every digit against the spec.
    pub fn new(spec: VariableSpec, rows: &[Vec<usize>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Domain("dataset needs at least one row".into()));
        }
        let n = spec.n();
        let mut flat_rows = Vec::with_capacity(rows.len() * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain(format!(
                    "row {r} has {} entries, spec has {n} variables",
                    row.len()
                )));
            }
            for (i, &d) in row.iter().enumerate() {
                if d >= spec.card(i) {
                    return Err(Error::Index(format!(
                        "row {r} variable {i}: value {d} out of range (cardinality {})",
                        spec.card(i)
                    )));
                }
                flat_rows.push(d as u32);
            }
        }
        let n_rows = rows.len();
        Ok(Self { spec, flat_rows, n_rows })
    }

    /// Build from pre-flattened row storage (used by the samplers).
    pub(crate) fn from_flat(spec: VariableSpec, flat_rows: Vec<u32>) -> Result<Self> {
        let n = spec.n();
        if flat_rows.is_empty() || flat_rows.len() % n != 0 {
            return Err(Error::Domain(format!(
                "flat row storage of length {} is not a positive multiple of {n}",
                flat_rows.len()
            )));
        }
        let n_rows = flat_rows.len() / n;
        Ok(Self { spec, flat_rows, n_rows })
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn row(&self, r: usize) -> &[u32] {
        let n = self.spec.n();
        &self.flat_rows[r * n..(r + 1) * n]
    }

    /// Normalized histogram of the rows: counts accumulate as integers and are
    /// divided by N once, so the result is exact up to one rounding per entry.
    pub fn empirical_distribution(&self) -> DenseTable {
        let mut counts = vec![0u64; self.spec.size()];
        let n = self.spec.n();
        for r in 0..self.n_rows {
            let row = &self.flat_rows[r * n..(r + 1) * n];
            let mut flat = 0;
            for (i, &d) in row.iter().enumerate() {
                flat += d as usize * self.spec.stride(i);
            }
            counts[flat] += 1;
        }
        let inv_n = 1.0 / self.n_rows as f64;
        let values = counts.iter().map(|&c| c as f64 * inv_n).collect();
        DenseTable {
            spec: self.spec.clone(),
            values,
            kind: TableKind::Distribution,
        }
    }

    /// Write as comma-separated rows with a `# cards:` header.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "# cards: {}", format::join_usizes(self.spec.cards())).unwrap();
        let n = self.spec.n();
        for r in 0..self.n_rows {
            let row = &self.flat_rows[r * n..(r + 1) * n];
            for (i, &d) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{d}").unwrap();
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Read the format produced by [`Dataset::write_csv`].
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "empty file".into(),
        })?;
        let cards = format::parse_cards_header(header).ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected '# cards: c0,c1,...', got '{header}'"),
        })?;
        let spec = VariableSpec::new(cards)?;
        let n = spec.n();
        let mut flat_rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut count = 0;
            for field in line.split(',') {
                let d: usize = field.trim().parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("bad digit '{field}'"),
                })?;
                if count >= n || d >= spec.card(count) {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: idx + 1,
                        msg: "row does not match the declared cards".into(),
                    });
                }
                flat_rows.push(d as u32);
                count += 1;
            }
            if count != n {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("row has {count} entries, expected {n}"),
                });
            }
        }
        Self::from_flat(spec, flat_rows).map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "file contains no data rows".into(),
        })
    }
}
