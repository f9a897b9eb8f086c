//! Per-variable local bases and the fast dual-coordinate transform.
//!
//! Each variable gets a square basis matrix over {-1,+1} whose row 0 is all
//! ones. Power-of-two cardinalities use the Walsh-Hadamard matrix from the
//! doubling recursion H_{2m} = [[H_m, H_m], [H_m, -H_m]]; other cardinalities
//! use the pattern
//!
//! ```text
//! phi_0(l) = 1,    phi_j(l) = +1 if j = l else -1   (j > 0)
//! ```
//!
//! A joint basis function is the product of one local row per variable, so
//! the dual coordinates of a table (its expansion coefficients, and for a
//! distribution p the expectations <Phi_y>_p) factor into one strided pass
//! per axis. That gives the full transform in O(|X| * sum_i |X_i|) scalar
//! operations, or O(|X| log |X|) on binary spaces.

use crate::error::{Error, Result};
use crate::space::{DenseTable, VariableSpec};

/// Below this cardinality the direct matrix product beats the recursive
/// in-place WHT, so the fast path only kicks in at 2^5 and above.
pub const WHT_MIN_CARD: usize = 32;

/// One variable's basis matrix (row-major, `card * card` entries of +-1).
#[derive(Debug, Clone)]
pub struct LocalBasis {
    card: usize,
    is_wht: bool,
    rows: Vec<f64>,
}

impl LocalBasis {
    pub fn new(card: usize) -> Result<Self> {
        if card < 2 {
            return Err(Error::Domain(format!(
                "local basis needs cardinality >= 2, got {card}"
            )));
        }
        let is_wht = card.is_power_of_two();
        let mut rows = vec![1.0; card * card];
        if is_wht {
            // Sylvester doubling: fill the top-left block and mirror outward.
            let mut m = 1;
            while m < card {
                for r in 0..m {
                    for c in 0..m {
                        let v = rows[r * card + c];
                        rows[r * card + (c + m)] = v;
                        rows[(r + m) * card + c] = v;
                        rows[(r + m) * card + (c + m)] = -v;
                    }
                }
                m *= 2;
            }
        } else {
            for j in 1..card {
                for l in 0..card {
                    rows[j * card + l] = if j == l { 1.0 } else { -1.0 };
                }
            }
        }
        Ok(Self { card, is_wht, rows })
    }

    pub fn card(&self) -> usize {
        self.card
    }

    pub fn is_wht(&self) -> bool {
        self.is_wht
    }

    /// Entry `phi_j(l)`.
    pub fn entry(&self, j: usize, l: usize) -> f64 {
        self.rows[j * self.card + l]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.card..(j + 1) * self.card]
    }
}

/// One `LocalBasis` per variable of a spec.
pub fn bases_for(spec: &VariableSpec) -> Vec<LocalBasis> {
    spec.cards()
        .iter()
        .map(|&c| LocalBasis::new(c).expect("spec guarantees cardinality >= 2"))
        .collect()
}

/// Dual coordinates of a dense table, indexed by flat basis label y.
#[derive(Debug, Clone)]
pub struct DualTable {
    spec: VariableSpec,
    values: Vec<f64>,
}

impl DualTable {
    /// An all-zero dual table, for use as a reusable transform destination.
    pub fn zeros(spec: VariableSpec) -> Self {
        let size = spec.size();
        Self { spec, values: vec![0.0; size] }
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize) -> f64 {
        self.values[y]
    }

    /// Mutable access for in-place post-processing (clamping, reuse as a
    /// transform destination).
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// In-place Walsh-Hadamard transform of a power-of-two-length slice.
pub fn fast_wht_inplace(seg: &mut [f64]) -> Result<()> {
    let m = seg.len();
    if !m.is_power_of_two() {
        return Err(Error::Domain(format!(
            "WHT needs a power-of-two length, got {m}"
        )));
    }
    let mut h = 1;
    while h < m {
        let mut start = 0;
        while start < m {
            for i in start..start + h {
                let a = seg[i];
                let b = seg[i + h];
                seg[i] = a + b;
                seg[i + h] = a - b;
            }
            start += h * 2;
        }
        h *= 2;
    }
    Ok(())
}

/// Apply one axis' basis matrix along that axis of `values`, in place.
///
/// `scratch` must have length >= the axis cardinality; it is used to stage
/// the strided fibers for the matrix product.
fn pass_inplace(
    values: &mut [f64],
    spec: &VariableSpec,
    axis: usize,
    basis: &LocalBasis,
    scratch: &mut [f64],
) {
    let card = spec.card(axis);
    let stride = spec.stride(axis);
    let block = stride * card;
    let size = values.len();

    if card == 2 {
        // The 2x2 product is exactly one butterfly per fiber.
        let mut base = 0;
        while base < size {
            for off in base..base + stride {
                let a = values[off];
                let b = values[off + stride];
                values[off] = a + b;
                values[off + stride] = a - b;
            }
            base += block;
        }
        return;
    }

    let use_wht = basis.is_wht() && card >= WHT_MIN_CARD;
    let mut base = 0;
    while base < size {
        for off in base..base + stride {
            let fiber = &mut scratch[..card];
            for l in 0..card {
                fiber[l] = values[off + l * stride];
            }
            if use_wht {
                fast_wht_inplace(fiber).expect("power-of-two cardinality");
                for (j, &v) in fiber.iter().enumerate() {
                    values[off + j * stride] = v;
                }
            } else {
                for j in 0..card {
                    let row = basis.row(j);
                    let mut acc = 0.0;
                    for l in 0..card {
                        acc += row[l] * fiber[l];
                    }
                    values[off + j * stride] = acc;
                }
            }
        }
        base += block;
    }
}

fn check_bases(spec: &VariableSpec, bases: &[LocalBasis]) -> Result<()> {
    if bases.len() != spec.n() {
        return Err(Error::Domain(format!(
            "{} bases supplied for {} variables",
            bases.len(),
            spec.n()
        )));
    }
    for (i, b) in bases.iter().enumerate() {
        if b.card() != spec.card(i) {
            return Err(Error::Domain(format!(
                "basis {i} has cardinality {}, spec has {}",
                b.card(),
                spec.card(i)
            )));
        }
    }
    Ok(())
}

/// Apply one axis' pass to a table, returning the transformed table.
pub fn local_transform_pass(
    table: &DenseTable,
    axis: usize,
    basis: &LocalBasis,
) -> Result<DenseTable> {
    let spec = table.spec();
    if axis >= spec.n() {
        return Err(Error::Index(format!(
            "axis {axis} out of range for {} variables",
            spec.n()
        )));
    }
    if basis.card() != spec.card(axis) {
        return Err(Error::Domain(format!(
            "basis cardinality {} does not match axis cardinality {}",
            basis.card(),
            spec.card(axis)
        )));
    }
    let mut out = DenseTable::coefficients(spec.clone(), table.values().to_vec())?;
    let mut scratch = vec![0.0; basis.card()];
    pass_inplace(out.values_mut(), spec, axis, basis, &mut scratch);
    Ok(out)
}

/// Full dual transform: all axis passes applied to a copy of the input.
pub fn dual_transform(table: &DenseTable, bases: &[LocalBasis]) -> Result<DualTable> {
    let mut out = DualTable::zeros(table.spec().clone());
    dual_transform_into(table, bases, &mut out)?;
    Ok(out)
}

/// Dual transform into a caller-owned destination, avoiding the allocation.
pub fn dual_transform_into(
    table: &DenseTable,
    bases: &[LocalBasis],
    out: &mut DualTable,
) -> Result<()> {
    let spec = table.spec();
    check_bases(spec, bases)?;
    if out.spec != *spec {
        return Err(Error::Domain("destination spec does not match input".into()));
    }
    out.values.copy_from_slice(table.values());
    let max_card = spec.cards().iter().copied().max().unwrap();
    let mut scratch = vec![0.0; max_card];
    for axis in 0..spec.n() {
        pass_inplace(&mut out.values, spec, axis, &bases[axis], &mut scratch);
    }
    Ok(())
}

/// Direct-sum oracle for one dual coordinate: sum_x table(x) * Phi_y(x).
///
/// Quadratic over the whole table when called for every y; kept as the
/// reference the fast transform is tested against.
pub fn brute_force_dual(table: &DenseTable, y: usize) -> Result<f64> {
    let spec = table.spec();
    if y >= spec.size() {
        return Err(Error::Index(format!(
            "label {y} out of range for joint size {}",
            spec.size()
        )));
    }
    let bases = bases_for(spec);
    let y_digits = spec.unpack(y)?;
    let n = spec.n();
    let mut digits = vec![0usize; n];
    let mut acc = 0.0;
    for (flat, &v) in table.values().iter().enumerate() {
        let mut phi = 1.0;
        for i in 0..n {
            phi *= bases[i].entry(y_digits[i], digits[i]);
        }
        acc += v * phi;
        // Odometer increment keeps the digit vector in sync with `flat + 1`.
        if flat + 1 < spec.size() {
            for d in digits.iter_mut().zip(spec.cards()) {
                *d.0 += 1;
                if *d.0 < *d.1 {
                    break;
                }
                *d.0 = 0;
            }
        }
    }
    Ok(acc)
}
