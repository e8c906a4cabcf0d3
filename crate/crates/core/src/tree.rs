//! Finite homogeneous measure trees and step functions on their leaves.
//!
//! A tree with branching `m` and depth `D` partitions a probability space
//! into `m^D` equal leaves; the cell at (level, index) has measure m^{-level}
//! exactly. Step functions are constant on leaves, so every quantity the
//! crate needs — averages over cells, maximal functions, level sets — is
//! determined by finitely many numbers, and set measures reduce to integer
//! leaf counts over the common denominator m^D.
//!
//! The maximal operator is evaluated in one bottom-up pass (cell sums) and
//! one top-down pass (running maximum of ancestor averages), O(#nodes).

use std::io::{BufRead, Write};
use std::ops::Range;

use crate::error::{Error, Result};

/// Hard cap on leaf count so a full set of level arrays stays in memory.
pub const MAX_LEAVES: u64 = 1 << 24;

/// Compensated (Neumaier) accumulator: error-free transformation of each
/// addition, so sums of n terms carry O(eps) relative error instead of
/// O(n*eps).
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Compensated::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// x^r with exact fast paths for the small integer exponents that dominate
/// the workload.
pub(crate) fn pow_r(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else if r == 2.0 {
        x * x
    } else if r.fract() == 0.0 && r.abs() <= 64.0 {
        x.powi(r as i32)
    } else {
        x.powf(r)
    }
}

/// A homogeneous m-adic tree: branching m >= 2, depth D >= 0, probability
/// measure m^{-level} per cell. The type is a value; all structure is
/// arithmetic on (level, index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MadicTree {
    m: u32,
    depth: u32,
}

impl MadicTree {
    pub fn new(m: u32, depth: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("branching m must be >= 2, got {m}")));
        }
        let leaves = (m as u64)
            .checked_pow(depth)
            .filter(|&n| n <= MAX_LEAVES)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "m^depth = {m}^{depth} exceeds the leaf cap {MAX_LEAVES}"
                ))
            })?;
        let _ = leaves;
        Ok(Self { m, depth })
    }

    pub fn branching(&self) -> u32 {
        self.m
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> u64 {
        (self.m as u64).pow(self.depth)
    }

    pub fn cells_at(&self, level: u32) -> u64 {
        assert!(level <= self.depth);
        (self.m as u64).pow(level)
    }

    /// Leaves covered by the cell (level, index).
    pub fn leaf_span(&self, level: u32, index: u64) -> Range<u64> {
        assert!(level <= self.depth && index < self.cells_at(level));
        let width = (self.m as u64).pow(self.depth - level);
        index * width..(index + 1) * width
    }

    /// m^{-level}.
    pub fn cell_measure(&self, level: u32) -> f64 {
        (self.m as f64).powi(-(level as i32))
    }

    pub fn leaf_measure(&self) -> f64 {
        self.cell_measure(self.depth)
    }
}

/// A nonnegative function constant on the leaves of a tree, stored as a flat
/// dense array in leaf (level-order) index order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    tree: MadicTree,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(tree: MadicTree, values: Vec<f64>) -> Result<Self> {
        if values.len() as u64 != tree.leaf_count() {
            return Err(Error::Domain(format!(
                "expected {} leaf values, got {}",
                tree.leaf_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "leaf values must be finite and >= 0, found {bad}"
            )));
        }
        Ok(Self { tree, values })
    }

    pub fn constant(tree: MadicTree, c: f64) -> Result<Self> {
        Self::new(tree, vec![c; tree.leaf_count() as usize])
    }

    pub fn tree(&self) -> MadicTree {
        self.tree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// ∫ phi^r dmu for r >= 1, by compensated accumulation over the leaves.
    pub fn integrate(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::Domain(format!("moment order must be >= 1, got {r}")));
        }
        let sum = compensated_sum(self.values.iter().map(|&v| pow_r(v, r)));
        Ok(sum / self.tree.leaf_count() as f64)
    }

    /// Average of phi over the cell (level, index).
    pub fn cell_average(&self, level: u32, index: u64) -> f64 {
        let span = self.tree.leaf_span(level, index);
        let sum = compensated_sum(self.values[span.start as usize..span.end as usize].iter().copied());
        sum * level_factor(self.tree, level)
    }

    /// The maximal function: at each leaf, the largest average of phi over
    /// the ancestor cells of that leaf (the leaf itself and the whole space
    /// included).
    pub fn maximal_operator(&self) -> StepFunction {
        let m = self.tree.m as usize;
        let d = self.tree.depth as usize;

        // bottom-up cell sums; slot k holds level D-k
        let mut levels: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        levels.push(self.values.clone());
        for _ in 0..d {
            let child = levels.last().unwrap();
            let mut parent = vec![0.0; child.len() / m];
            for (i, slot) in parent.iter_mut().enumerate() {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += child[i * m + c];
                }
                *slot = acc;
            }
            levels.push(parent);
        }

        // top-down: running max of ancestor averages
        let mut carry = vec![levels[d][0] * level_factor(self.tree, 0)];
        for level in 1..=d {
            let sums = &levels[d - level];
            let factor = level_factor(self.tree, level as u32);
            let mut next = vec![0.0; sums.len()];
            for (i, slot) in next.iter_mut().enumerate() {
                *slot = (sums[i] * factor).max(carry[i / m]);
            }
            carry = next;
        }

        StepFunction {
            tree: self.tree,
            values: carry,
        }
    }

    /// Number of leaves with value >= lambda (closed level set).
    pub fn level_set_count(&self, lambda: f64) -> u64 {
        self.values.iter().filter(|&&v| v >= lambda).count() as u64
    }

    /// mu{ phi >= lambda }; exact as (leaf count)/m^D before the final
    /// division.
    pub fn level_set_measure(&self, lambda: f64) -> f64 {
        self.level_set_count(lambda) as f64 / self.tree.leaf_count() as f64
    }

    /// Line-oriented text format: header `m D`, then one leaf value per line
    /// in leaf order. Values print in shortest round-trip form so a reread
    /// reproduces them bit for bit.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.tree.m, self.tree.depth)?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn to_text_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("text format is ASCII")
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<StepFunction> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty step-function file".into()))??;
        let mut parts = header.split_whitespace();
        let m: u32 = parse_field(parts.next(), "branching m")?;
        let depth: u32 = parse_field(parts.next(), "depth D")?;
        if parts.next().is_some() {
            return Err(Error::Parse(format!("malformed header line: {header:?}")));
        }
        let tree = MadicTree::new(m, depth)?;
        let mut values = Vec::with_capacity(tree.leaf_count() as usize);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad leaf value {t:?}: {e}")))?,
            );
        }
        StepFunction::new(tree, values)
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let s = field.ok_or_else(|| Error::Parse(format!("missing {what} in header")))?;
    s.parse()
        .map_err(|e| Error::Parse(format!("bad {what} {s:?}: {e}")))
}

/// Conversion from a cell sum at `level` to the cell average: m^{level - D}.
fn level_factor(tree: MadicTree, level: u32) -> f64 {
    (tree.m as f64).powi(level as i32 - tree.depth as i32)
}
