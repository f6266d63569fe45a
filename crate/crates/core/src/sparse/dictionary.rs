use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::Mode;

/// Learned atoms for one class; columns have unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDictionary {
    pub atoms: DMatrix<f64>,
    pub class_id: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRange {
    pub class_id: Mode,
    pub start: usize,
    pub end: usize,
}

impl ClassRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, j: usize) -> bool {
        (self.start..self.end).contains(&j)
    }
}

/// Per-class dictionaries concatenated column-wise. Serialized as row/column
/// counts, the row-major atom matrix and the class ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StackedRepr", into = "StackedRepr")]
pub struct StackedDictionary {
    pub atoms: DMatrix<f64>,
    pub class_ranges: Vec<ClassRange>,
}

impl StackedDictionary {
    pub fn stack(parts: &[ClassDictionary]) -> Result<Self> {
        let rows = parts
            .first()
            .map(|p| p.atoms.nrows())
            .ok_or_else(|| Error::input("sparse", "no class dictionaries to stack"))?;
        if parts.iter().any(|p| p.atoms.nrows() != rows) {
            return Err(Error::input("sparse", "class dictionaries differ in row count"));
        }
        let total: usize = parts.iter().map(|p| p.atoms.ncols()).sum();
        let mut atoms = DMatrix::zeros(rows, total);
        let mut class_ranges = Vec::with_capacity(parts.len());
        let mut start = 0;
        for p in parts {
            let k = p.atoms.ncols();
            atoms.columns_mut(start, k).copy_from(&p.atoms);
            class_ranges.push(ClassRange {
                class_id: p.class_id,
                start,
                end: start + k,
            });
            start += k;
        }
        let stacked = Self {
            atoms,
            class_ranges,
        };
        stacked.validate()?;
        Ok(stacked)
    }

    /// Checks that the ranges tile the columns in order.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for r in &self.class_ranges {
            if r.start != next || r.end < r.start {
                return Err(Error::input("sparse", "class ranges do not partition the columns"));
            }
            next = r.end;
        }
        if next != self.atoms.ncols() {
            return Err(Error::input("sparse", "class ranges do not cover every column"));
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<Mode> {
        self.class_ranges.iter().map(|r| r.class_id).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct StackedRepr {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
    class_ranges: Vec<ClassRange>,
}

impl From<StackedDictionary> for StackedRepr {
    fn from(d: StackedDictionary) -> Self {
        let (rows, cols) = d.atoms.shape();
        let data = d.atoms.transpose().as_slice().to_vec();
        Self {
            rows,
            cols,
            data,
            class_ranges: d.class_ranges,
        }
    }
}

impl TryFrom<StackedRepr> for StackedDictionary {
    type Error = Error;

    fn try_from(r: StackedRepr) -> Result<Self> {
        if r.data.len() != r.rows * r.cols {
            return Err(Error::input("sparse", "dictionary data length does not match shape"));
        }
        let d = StackedDictionary {
            atoms: DMatrix::from_row_slice(r.rows, r.cols, &r.data),
            class_ranges: r.class_ranges,
        };
        d.validate()?;
        Ok(d)
    }
}
