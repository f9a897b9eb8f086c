//! Sparse log-linear model state with an incrementally maintained density.
//!
//! The model is p(x) = exp(l(x)) / Z with l(x) = sum_y theta_y Phi_y(x),
//! where each Phi_y is a product of local basis rows and theta is sparse
//! (label 0, the constant basis, carries no parameter). The state keeps the
//! normalized density as a dense table so that a single-parameter change is
//! an O(|X|) pointwise scale-and-renormalize rather than a full rebuild:
//! every entry is multiplied by exp(+-(theta' - theta)) according to the
//! sign of Phi_y there, then the table is divided by its new sum.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::basis::{bases_for, LocalBasis};
use crate::error::{Error, Result};
use crate::format;
use crate::numeric::KahanSum;
use crate::space::{DenseTable, VariableSpec};

/// Sparse parameter vector keyed by flat basis label. Zero values are never
/// stored and label 0 is structurally excluded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseTheta {
    entries: BTreeMap<usize, f64>,
}

impl SparseTheta {
    pub fn new() -> Self {
        Self::default()
    }

    /// Coefficient for a label; absent labels read as 0.
    pub fn get(&self, y: usize) -> f64 {
        self.entries.get(&y).copied().unwrap_or(0.0)
    }

    /// Set a coefficient; setting exactly 0 removes the entry.
    pub fn set(&mut self, y: usize, value: f64) {
        assert!(y != 0, "label 0 is the constant basis and carries no parameter");
        if value == 0.0 {
            self.entries.remove(&y);
        } else {
            self.entries.insert(y, value);
        }
    }

    /// Number of stored (nonzero) coefficients.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored labels in increasing order with their values.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&y, &v)| (y, v))
    }

    /// Stored labels in increasing order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }
}

/// Walk the joint space as contiguous runs on which Phi_y has constant sign.
///
/// Axes below the lowest nonzero digit of y contribute the all-ones row, so
/// they collapse into runs of length `stride(lowest support axis)`; the
/// callback receives `(start, len, sign)` for each run, in increasing order
/// of `start`, covering every flat index exactly once.
fn for_each_run<F: FnMut(usize, usize, f64)>(
    spec: &VariableSpec,
    bases: &[LocalBasis],
    y_digits: &[usize],
    f: &mut F,
) {
    let Some(m) = y_digits.iter().position(|&d| d != 0) else {
        f(0, spec.size(), 1.0);
        return;
    };
    let run_len = spec.stride(m);
    descend(spec, bases, y_digits, spec.n() - 1, m, run_len, 0, 1.0, f);
}

#[allow(clippy::too_many_arguments)]
fn descend<F: FnMut(usize, usize, f64)>(
    spec: &VariableSpec,
    bases: &[LocalBasis],
    y_digits: &[usize],
    axis: usize,
    lowest: usize,
    run_len: usize,
    base: usize,
    sign: f64,
    f: &mut F,
) {
    let card = spec.card(axis);
    if axis == lowest {
        let row = bases[axis].row(y_digits[axis]);
        for l in 0..card {
            f(base + l * run_len, run_len, sign * row[l]);
        }
        return;
    }
    let stride = spec.stride(axis);
    if y_digits[axis] == 0 {
        for l in 0..card {
            descend(spec, bases, y_digits, axis - 1, lowest, run_len, base + l * stride, sign, f);
        }
    } else {
        let row = bases[axis].row(y_digits[axis]);
        for l in 0..card {
            descend(
                spec, bases, y_digits, axis - 1, lowest, run_len,
                base + l * stride, sign * row[l], f,
            );
        }
    }
}

/// A sparse parameter vector together with its normalized density table.
#[derive(Debug, Clone)]
pub struct ModelState {
    spec: VariableSpec,
    bases: Vec<LocalBasis>,
    theta: SparseTheta,
    p: DenseTable,
}

impl ModelState {
    /// The empty model: no parameters, uniform density.
    pub fn new(spec: VariableSpec) -> Self {
        let p = DenseTable::uniform(spec.clone());
        let bases = bases_for(&spec);
        Self { spec, bases, theta: SparseTheta::new(), p }
    }

    /// Build a state from existing parameters, recomputing the density from
    /// scratch. Labels must be in range and nonzero; values must be finite.
    pub fn from_theta(spec: VariableSpec, theta: SparseTheta) -> Result<Self> {
        for (y, v) in theta.iter() {
            if y == 0 || y >= spec.size() {
                return Err(Error::Index(format!(
                    "label {y} out of range for joint size {}",
                    spec.size()
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numeric(format!("theta[{y}] = {v} is not finite")));
            }
        }
        let mut state = Self::new(spec);
        state.theta = theta;
        state.refresh_density();
        Ok(state)
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn bases(&self) -> &[LocalBasis] {
        &self.bases
    }

    pub fn theta(&self) -> &SparseTheta {
        &self.theta
    }

    /// Number of basis functions in use.
    pub fn basis_count(&self) -> usize {
        self.theta.len()
    }

    /// The maintained normalized density.
    pub fn density(&self) -> &DenseTable {
        &self.p
    }

    /// Log of the unnormalized density at one state: sum_y theta_y Phi_y(x).
    pub fn log_unnormalized(&self, x: usize) -> Result<f64> {
        let x_digits = self.spec.unpack(x)?;
        let mut y_digits = vec![0usize; self.spec.n()];
        let mut acc = 0.0;
        for (y, v) in self.theta.iter() {
            self.spec.unpack_into(y, &mut y_digits)?;
            let mut phi = 1.0;
            for i in 0..self.spec.n() {
                phi *= self.bases[i].entry(y_digits[i], x_digits[i]);
            }
            acc += v * phi;
        }
        Ok(acc)
    }

    /// Rebuild the density from the parameters alone: accumulate l(x) per
    /// stored label, subtract the maximum before exponentiating, normalize.
    pub fn recompute_density(&self) -> DenseTable {
        let size = self.spec.size();
        let mut l = vec![0.0f64; size];
        let mut y_digits = vec![0usize; self.spec.n()];
        for (y, v) in self.theta.iter() {
            self.spec
                .unpack_into(y, &mut y_digits)
                .expect("stored labels are validated");
            for_each_run(&self.spec, &self.bases, &y_digits, &mut |start, len, sign| {
                let t = if sign > 0.0 { v } else { -v };
                for e in &mut l[start..start + len] {
                    *e += t;
                }
            });
        }
        let max = l.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = KahanSum::default();
        for e in l.iter_mut() {
            *e = (*e - max).exp();
            sum.add(*e);
        }
        let inv = 1.0 / sum.value();
        for e in l.iter_mut() {
            *e *= inv;
        }
        DenseTable::distribution_unchecked(self.spec.clone(), l)
    }

    /// Replace the maintained density with a from-scratch rebuild, flushing
    /// accumulated floating-point drift from incremental updates.
    pub fn refresh_density(&mut self) {
        self.p = self.recompute_density();
    }

    /// Set theta_y to a new value and update the density in place.
    ///
    /// Multiplies each entry by exp(+-(new - old)) according to the sign of
    /// Phi_y, accumulating the new total in the same deterministic order, then
    /// renormalizes. Total cost is two passes over the table.
    pub fn apply_update(&mut self, y: usize, new_value: f64) -> Result<()> {
        if y == 0 {
            return Err(Error::Domain(
                "label 0 is the constant basis and cannot be updated".into(),
            ));
        }
        if y >= self.spec.size() {
            return Err(Error::Index(format!(
                "label {y} out of range for joint size {}",
                self.spec.size()
            )));
        }
        if !new_value.is_finite() {
            return Err(Error::Numeric(format!(
                "new value {new_value} for theta[{y}] is not finite"
            )));
        }
        let old = self.theta.get(y);
        let c_plus = (new_value - old).exp();
        let c_minus = 1.0 / c_plus;
        let y_digits = self.spec.unpack(y)?;

        let Self { spec, bases, p, .. } = self;
        let values = p.values_mut();
        let mut sum = KahanSum::default();
        for_each_run(spec, bases, &y_digits, &mut |start, len, sign| {
            let c = if sign > 0.0 { c_plus } else { c_minus };
            for v in &mut values[start..start + len] {
                *v *= c;
                sum.add(*v);
            }
        });
        let total = sum.value();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Numeric(format!(
                "density sum became {total} after updating theta[{y}]"
            )));
        }
        let inv = 1.0 / total;
        for v in values.iter_mut() {
            *v *= inv;
        }
        self.theta.set(y, new_value);
        Ok(())
    }

    /// Write as a `# cards:` header plus one `y_digits...,theta` line per
    /// stored coefficient, in increasing label order.
    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "# cards: {}", format::join_usizes(self.spec.cards())).unwrap();
        for (y, v) in self.theta.iter() {
            let digits = self.spec.unpack(y).expect("stored labels are validated");
            writeln!(out, "{},{}", format::join_usizes(&digits), format::float(v)).unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Read the format produced by [`ModelState::write_file`].
    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self> {
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
        let mut theta = SparseTheta::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = |msg: String| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg,
            };
            if fields.len() != n + 1 {
                return Err(bad(format!(
                    "expected {} digit fields plus a value, got {} fields",
                    n,
                    fields.len()
                )));
            }
            let mut digits = Vec::with_capacity(n);
            for f in &fields[..n] {
                digits.push(
                    f.trim()
                        .parse::<usize>()
                        .map_err(|_| bad(format!("bad digit '{f}'")))?,
                );
            }
            let value: f64 = fields[n]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad value '{}'", fields[n])))?;
            let y = spec.pack(&digits).map_err(|e| bad(e.to_string()))?;
            if y == 0 {
                return Err(bad("label 0 carries no parameter".into()));
            }
            if value == 0.0 || !value.is_finite() {
                return Err(bad(format!("value {value} must be finite and nonzero")));
            }
            theta.set(y, value);
        }
        Self::from_theta(spec, theta)
    }
}
