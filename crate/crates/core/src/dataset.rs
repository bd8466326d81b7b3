//! Binary datasets and the sufficient statistics that drive the scores.
//!
//! A dataset is an immutable n x d matrix of {0,1} observations with a
//! mandatory header of unique column names. For a node and a parent set,
//! the sufficient statistics are, per parent configuration, the number of
//! matching rows and the number of those rows where the node equals one.
//! Parent configurations are indexed by the integer formed from the parent
//! values in increasing-index order, lowest index in the least significant
//! bit; cached scores and serialized reports rely on this encoding.

use std::io::Write;
use std::path::Path;

use crate::bits::{NodeSet, MAX_NODES};
use crate::error::{Error, Result};
use crate::rng::fnv1a64;

/// An immutable n x d matrix of binary observations.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    names: Vec<String>,
    cells: Vec<u8>, // row-major
    n: usize,
    d: usize,
    fingerprint: u64,
}

impl BinaryDataset {
    /// Build a dataset from rows, validating shape, names, and cell values.
    pub fn new(names: Vec<String>, rows: Vec<Vec<u8>>) -> Result<Self> {
        validate_names(&names)?;
        let d = names.len();
        if rows.is_empty() {
            return Err(Error::NoObservations);
        }
        let mut cells = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: d,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::NonBinaryCell {
                        row: i + 1,
                        column: names[j].clone(),
                        value: v.to_string(),
                    });
                }
                cells.push(v);
            }
        }
        Ok(Self::assemble(names, cells, rows.len(), d))
    }

    fn assemble(names: Vec<String>, cells: Vec<u8>, n: usize, d: usize) -> Self {
        let fingerprint = fingerprint_of(&names, &cells, n, d);
        BinaryDataset {
            names,
            cells,
            n,
            d,
            fingerprint,
        }
    }

    /// Load a dataset from a CSV file: UTF-8, comma-separated, mandatory
    /// header row, cells literally "0" or "1" with surrounding whitespace
    /// tolerated.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(file);

        let names: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        validate_names(&names)?;
        let d = names.len();

        let mut cells = Vec::new();
        let mut n = 0usize;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: d,
                    found: record.len(),
                });
            }
            for (j, field) in record.iter().enumerate() {
                let v = match field.trim() {
                    "0" => 0u8,
                    "1" => 1u8,
                    other => {
                        return Err(Error::NonBinaryCell {
                            row: i + 1,
                            column: names[j].clone(),
                            value: other.to_string(),
                        })
                    }
                };
                cells.push(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::NoObservations);
        }
        Ok(Self::assemble(names, cells, n, d))
    }

    /// Write the dataset in the same CSV format accepted by [`load_csv`].
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{}", self.names.join(","))?;
        for i in 0..self.n {
            let row: Vec<&str> = (0..self.d)
                .map(|j| if self.value(i, j) == 1 { "1" } else { "0" })
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.d + col]
    }

    pub fn column_sum(&self, col: usize) -> u64 {
        (0..self.n).map(|i| self.value(i, col) as u64).sum()
    }

    /// The same observations under new column names.
    pub fn renamed(&self, names: &[String]) -> Result<Self> {
        validate_names(names)?;
        if names.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: names.len(),
            });
        }
        Ok(Self::assemble(
            names.to_vec(),
            self.cells.clone(),
            self.n,
            self.d,
        ))
    }

    /// Stable 64-bit fingerprint of dimensions, names and cells; score
    /// caches use it to reject stale lookups.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

impl std::fmt::Debug for BinaryDataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryDataset({} x {})", self.n, self.d)
    }
}

fn validate_names(names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::InvalidConfig("header has no columns".into()));
    }
    if names.len() > MAX_NODES {
        return Err(Error::TooManyNodes {
            d: names.len(),
            max: MAX_NODES,
        });
    }
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::EmptyColumnName { column: j + 1 });
        }
        if names[..j].contains(name) {
            return Err(Error::DuplicateColumn { name: name.clone() });
        }
    }
    Ok(())
}

fn fingerprint_of(names: &[String], cells: &[u8], n: usize, d: usize) -> u64 {
    let header = n
        .to_le_bytes()
        .into_iter()
        .chain(d.to_le_bytes())
        .chain(names.iter().flat_map(|s| {
            s.as_bytes()
                .iter()
                .copied()
                .chain(std::iter::once(0u8))
                .collect::<Vec<_>>()
        }));
    fnv1a64(header.chain(cells.iter().copied()))
}

/// An assignment of values to an ordered parent set: the conditioning event
/// of one Bernoulli parameter.
///
/// Bit `t` of `assignment` holds the value of the t-th smallest parent
/// index, so `assignment` equals the configuration index used by
/// [`SufficientStats::table`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParentConfig {
    parents: NodeSet,
    assignment: u32,
}

impl ParentConfig {
    pub fn new(parents: NodeSet, assignment: u32) -> Result<Self> {
        let size = parents.len();
        if size < 32 && assignment >= (1 << size) {
            return Err(Error::InvalidConfig(format!(
                "assignment {assignment:#b} out of range for {size} parents"
            )));
        }
        Ok(ParentConfig {
            parents,
            assignment,
        })
    }

    /// The empty conditioning event (marginal of a node).
    pub fn unconditional() -> Self {
        ParentConfig {
            parents: NodeSet::EMPTY,
            assignment: 0,
        }
    }

    /// Build from parallel slices of parent indices and their values.
    pub fn from_values(parents: &[usize], values: &[u8]) -> Result<Self> {
        if parents.len() != values.len() {
            return Err(Error::InvalidConfig(format!(
                "{} parent indices but {} assigned values",
                parents.len(),
                values.len()
            )));
        }
        let set = NodeSet::from_indices(parents);
        if set.len() != parents.len() {
            return Err(Error::InvalidConfig(
                "duplicate parent index in conditioning event".into(),
            ));
        }
        // Values arrive aligned with `parents`; re-align to ascending index.
        let mut assignment = 0u32;
        for (t, member) in set.iter().enumerate() {
            let pos = parents.iter().position(|&p| p == member).unwrap();
            match values[pos] {
                0 => {}
                1 => assignment |= 1 << t,
                v => {
                    return Err(Error::InvalidConfig(format!(
                        "conditioning value {v} is not binary"
                    )))
                }
            }
        }
        Ok(ParentConfig {
            parents: set,
            assignment,
        })
    }

    pub fn parents(&self) -> NodeSet {
        self.parents
    }

    /// The configuration index into a sufficient-statistics table.
    pub fn index(&self) -> usize {
        self.assignment as usize
    }

    /// Does `row` of `data` match this conditioning event?
    pub fn matches(&self, data: &BinaryDataset, row: usize) -> bool {
        config_index(data, row, self.parents) == self.assignment
    }
}

/// Counts for one parent configuration: rows matching it, and ones among them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellCounts {
    /// n_j: rows matching the configuration.
    pub count: u64,
    /// z_j: rows among them with the node equal to one.
    pub ones: u64,
}

/// Per-configuration counts for one (node, parent set) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SufficientStats {
    pub node: usize,
    pub parents: NodeSet,
    /// Indexed by configuration; length `2^|parents|`.
    pub table: Vec<CellCounts>,
}

/// Configuration index of `row` under `parents`: parent values packed in
/// increasing-index order, lowest index least significant.
fn config_index(data: &BinaryDataset, row: usize, parents: NodeSet) -> u32 {
    let mut idx = 0u32;
    for (t, p) in parents.iter().enumerate() {
        idx |= (data.value(row, p) as u32) << t;
    }
    idx
}

/// Exact counts per parent configuration, in a single pass over the rows.
pub fn sufficient_stats(
    data: &BinaryDataset,
    node: usize,
    parents: NodeSet,
) -> Result<SufficientStats> {
    let d = data.d();
    if node >= d {
        return Err(Error::IndexOutOfRange { index: node, d });
    }
    if let Some(bad) = parents.iter().find(|&p| p >= d) {
        return Err(Error::IndexOutOfRange { index: bad, d });
    }
    if parents.contains(node) {
        return Err(Error::NodeInParentSet { node });
    }
    let mut table = vec![CellCounts::default(); 1usize << parents.len()];
    for row in 0..data.n() {
        let idx = config_index(data, row, parents) as usize;
        table[idx].count += 1;
        table[idx].ones += data.value(row, node) as u64;
    }
    Ok(SufficientStats {
        node,
        parents,
        table,
    })
}

/// Counts (n_j, z_j) of a single conditioning event for `node`.
pub fn event_counts(
    data: &BinaryDataset,
    node: usize,
    config: &ParentConfig,
) -> Result<CellCounts> {
    let stats = sufficient_stats(data, node, config.parents())?;
    Ok(stats.table[config.index()])
}
