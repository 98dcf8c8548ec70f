//! Circulant tables and the expanded QC-RA parity-check structure.
//!
//! A QC-RA code has parity-check matrix `H = [H1 | A]` where `H1` is an
//! `M x K` sparse matrix built from 360-column circulant groups and `A` is the
//! `M x M` lower-bidiagonal accumulator. A [`CirculantTable`] lists, for every
//! group, the row indices of the group's first column; the remaining 359
//! columns follow the DVB-S2 address rule `(x + j*q) mod M` with `q = M/360`.
//!
//! Table text format:
//!
//! ```text
//! # comment
//! N 1440 RATE 1/2
//! 3
//! 7
//! ```
//!
//! The header is followed by exactly `K/360` group lines of space-separated
//! decimal row indices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use sha2::{Digest, Sha256};

use crate::error::TableError;

/// Number of columns in one circulant group.
pub const GROUP_SIZE: usize = 360;

const BUILTIN_R1_10: &str = include_str!("../data/r1_10.txt");

/// Compact description of `H1`: first-column row indices per 360-column group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CirculantTable {
    n: usize,
    rate_num: usize,
    rate_den: usize,
    groups: Vec<Vec<usize>>,
}

impl CirculantTable {
    /// Builds a table from its parts, validating every invariant.
    ///
    /// Errors carry the 1-based group number in their `line` field.
    pub fn new(
        n: usize,
        rate_num: usize,
        rate_den: usize,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self, TableError> {
        let (k, m) = dimensions(n, rate_num, rate_den)?;
        let lines: Vec<usize> = (1..=groups.len()).collect();
        validate_groups(k, m, &groups, &lines)?;
        Ok(CirculantTable {
            n,
            rate_num,
            rate_den,
            groups,
        })
    }

    /// Parses the table text format.
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut header: Option<(usize, usize, usize, usize)> = None;
        let mut groups = Vec::new();
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match header {
                None => header = Some(parse_header(line, line_no)?),
                Some(_) => {
                    let group = line
                        .split_whitespace()
                        .map(|tok| {
                            tok.parse::<usize>().map_err(|_| TableError::Parse {
                                line: line_no,
                                message: format!("invalid row index {tok:?}"),
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    groups.push(group);
                    lines.push(line_no);
                }
            }
        }
        let (n, rate_num, rate_den, _) = header.ok_or_else(|| TableError::Parse {
            line: 0,
            message: "missing header line `N <int> RATE <num>/<den>`".into(),
        })?;
        let (k, m) = dimensions(n, rate_num, rate_den)?;
        validate_groups(k, m, &groups, &lines)?;
        Ok(CirculantTable {
            n,
            rate_num,
            rate_den,
            groups,
        })
    }

    /// The rate-1/10 table for the normal 64800-bit frame.
    pub fn builtin_rate_one_tenth() -> Self {
        Self::parse(BUILTIN_R1_10).expect("embedded table is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.n * self.rate_num / self.rate_den
    }

    pub fn m(&self) -> usize {
        self.n - self.k()
    }

    /// Address step between consecutive columns of a group, `q = M/360`.
    pub fn expansion_step(&self) -> usize {
        self.m() / GROUP_SIZE
    }

    pub fn rate(&self) -> Ratio<usize> {
        Ratio::new(self.rate_num, self.rate_den)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Canonical text form; parses back to an identical table.
    pub fn to_text(&self) -> String {
        let mut out = format!("N {} RATE {}/{}\n", self.n, self.rate_num, self.rate_den);
        for g in &self.groups {
            let line: Vec<String> = g.iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Expands the table into the full sparse `H1`.
    pub fn expand(&self) -> QcRaCode {
        let k = self.k();
        let m = self.m();
        let q = self.expansion_step();
        let mut col_start = Vec::with_capacity(k + 1);
        let mut col_rows = Vec::new();
        col_start.push(0u32);
        for group in &self.groups {
            for j in 0..GROUP_SIZE {
                let start = col_rows.len();
                col_rows.extend(group.iter().map(|&x| ((x + j * q) % m) as u32));
                col_rows[start..].sort_unstable();
                col_start.push(col_rows.len() as u32);
            }
        }
        QcRaCode::from_columns(
            k,
            m,
            Some(q),
            col_start,
            col_rows,
            self.hash(),
            self.groups.iter().map(Vec::len).collect(),
        )
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize, usize, usize), TableError> {
    let bad = |message: &str| TableError::Parse {
        line: line_no,
        message: message.to_string(),
    };
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "N" || toks[2] != "RATE" {
        return Err(bad("expected header `N <int> RATE <num>/<den>`"));
    }
    let n: usize = toks[1].parse().map_err(|_| bad("invalid codeword length"))?;
    let (num, den) = toks[3]
        .split_once('/')
        .ok_or_else(|| bad("rate must be written as <num>/<den>"))?;
    let num: usize = num.parse().map_err(|_| bad("invalid rate numerator"))?;
    let den: usize = den.parse().map_err(|_| bad("invalid rate denominator"))?;
    if n == 0 || num == 0 || den == 0 || num >= den {
        return Err(bad("need N > 0 and 0 < rate < 1"));
    }
    Ok((n, num, den, line_no))
}

fn dimensions(n: usize, num: usize, den: usize) -> Result<(usize, usize), TableError> {
    if n == 0 || num == 0 || den == 0 || num >= den {
        return Err(TableError::Structure("need N > 0 and 0 < rate < 1".into()));
    }
    if (n * num) % den != 0 {
        return Err(TableError::Structure(format!(
            "N*R = {n}*{num}/{den} is not an integer"
        )));
    }
    let k = n * num / den;
    let m = n - k;
    if k % GROUP_SIZE != 0 {
        return Err(TableError::Structure(format!(
            "K = {k} is not a multiple of {GROUP_SIZE}"
        )));
    }
    if m % GROUP_SIZE != 0 {
        return Err(TableError::Structure(format!(
            "M = {m} is not a multiple of {GROUP_SIZE}"
        )));
    }
    Ok((k, m))
}

fn validate_groups(
    k: usize,
    m: usize,
    groups: &[Vec<usize>],
    lines: &[usize],
) -> Result<(), TableError> {
    for (group, &line) in groups.iter().zip(lines) {
        if group.is_empty() {
            return Err(TableError::Parse {
                line,
                message: "empty group".into(),
            });
        }
        let mut seen = std::collections::HashSet::with_capacity(group.len());
        for &index in group {
            if index >= m {
                return Err(TableError::Range { line, index, m });
            }
            if !seen.insert(index) {
                return Err(TableError::Duplicate { line, index });
            }
        }
    }
    let expected = k / GROUP_SIZE;
    if groups.len() != expected {
        return Err(TableError::Structure(format!(
            "expected K/{GROUP_SIZE} = {expected} group lines, found {}",
            groups.len()
        )));
    }
    Ok(())
}

/// The dual-diagonal accumulator `A`. Row `i` has ones in parity columns
/// `i - 1` and `i`; row 0 only in column 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccumulatorView {
    m: usize,
}

impl AccumulatorView {
    pub fn new(m: usize) -> Self {
        AccumulatorView { m }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Parity-column indices of row `i`, ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = usize> {
        assert!(i < self.m, "accumulator row {i} out of range");
        let first = if i == 0 { 0 } else { i - 1 };
        first..=i
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.row(i).count()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        row < self.m && col < self.m && (col == row || col + 1 == row)
    }
}

/// A fully expanded RA code with parity-check matrix `[H1 | A]`.
///
/// `H1` is stored both row-major and column-major. Codeword layout is
/// `[message (K) | parity (M)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QcRaCode {
    k: usize,
    m: usize,
    q: Option<usize>,
    row_start: Vec<u32>,
    row_cols: Vec<u32>,
    col_start: Vec<u32>,
    col_rows: Vec<u32>,
    group_weights: Vec<usize>,
    source_hash: String,
}

impl QcRaCode {
    fn from_columns(
        k: usize,
        m: usize,
        q: Option<usize>,
        col_start: Vec<u32>,
        col_rows: Vec<u32>,
        source_hash: String,
        group_weights: Vec<usize>,
    ) -> Self {
        let mut row_count = vec![0u32; m + 1];
        for &r in &col_rows {
            row_count[r as usize + 1] += 1;
        }
        for i in 0..m {
            row_count[i + 1] += row_count[i];
        }
        let row_start = row_count.clone();
        let mut fill = row_count;
        let mut row_cols = vec![0u32; col_rows.len()];
        for col in 0..k {
            for &r in &col_rows[col_start[col] as usize..col_start[col + 1] as usize] {
                let slot = &mut fill[r as usize];
                row_cols[*slot as usize] = col as u32;
                *slot += 1;
            }
        }
        QcRaCode {
            k,
            m,
            q,
            row_start,
            row_cols,
            col_start,
            col_rows,
            group_weights,
            source_hash,
        }
    }

    /// Builds a general (not quasi-cyclic) RA code from explicit `H1` rows.
    ///
    /// Each row lists the message columns with a one. Repeated column indices
    /// within a row are rejected.
    pub fn from_h1_rows(k: usize, rows: &[Vec<usize>]) -> Result<Self, TableError> {
        let m = rows.len();
        if k == 0 || m == 0 {
            return Err(TableError::Structure("need K > 0 and M > 0".into()));
        }
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); k];
        for (i, row) in rows.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for &c in row {
                if c >= k {
                    return Err(TableError::Range {
                        line: i + 1,
                        index: c,
                        m: k,
                    });
                }
                if !seen.insert(c) {
                    return Err(TableError::Duplicate { line: i + 1, index: c });
                }
                cols[c].push(i as u32);
            }
        }
        let mut col_start = vec![0u32];
        let mut col_rows = Vec::new();
        for c in &cols {
            col_rows.extend_from_slice(c);
            col_start.push(col_rows.len() as u32);
        }
        let mut hasher = Sha256::new();
        let mut text = format!("RA K {k} M {m}\n");
        for row in rows {
            let _ = writeln!(text, "{row:?}");
        }
        hasher.update(text.as_bytes());
        Ok(Self::from_columns(
            k,
            m,
            None,
            col_start,
            col_rows,
            hex::encode(hasher.finalize()),
            Vec::new(),
        ))
    }

    pub fn n(&self) -> usize {
        self.k + self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `q = M/360` for quasi-cyclic codes, `None` for codes built from rows.
    pub fn expansion_step(&self) -> Option<usize> {
        self.q
    }

    pub fn rate(&self) -> Ratio<usize> {
        Ratio::new(self.k, self.n())
    }

    /// Message columns with a one in row `i` of `H1`, ascending.
    pub fn h1_row(&self, i: usize) -> &[u32] {
        &self.row_cols[self.row_start[i] as usize..self.row_start[i + 1] as usize]
    }

    /// Rows with a one in message column `j` of `H1`, ascending.
    pub fn h1_col(&self, j: usize) -> &[u32] {
        &self.col_rows[self.col_start[j] as usize..self.col_start[j + 1] as usize]
    }

    pub fn column_weight(&self, j: usize) -> usize {
        self.h1_col(j).len()
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.h1_row(i).len()
    }

    /// Number of ones in `H1`.
    pub fn h1_ones(&self) -> usize {
        self.row_cols.len()
    }

    pub fn accumulator(&self) -> AccumulatorView {
        AccumulatorView::new(self.m)
    }

    /// List lengths of the source table, one per group (empty for row-built codes).
    pub fn group_weights(&self) -> &[usize] {
        &self.group_weights
    }

    /// Message-column weight histogram: weight -> number of columns.
    pub fn column_weight_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for j in 0..self.k {
            *hist.entry(self.column_weight(j)).or_insert(0) += 1;
        }
        hist
    }

    /// `H1` row-weight histogram: weight -> number of rows.
    pub fn row_weight_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for i in 0..self.m {
            *hist.entry(self.row_weight(i)).or_insert(0) += 1;
        }
        hist
    }

    /// Fraction of ones in the full `[H1 | A]`.
    pub fn density(&self) -> f64 {
        let ones = self.h1_ones() + 2 * self.m - 1;
        ones as f64 / (self.m as f64 * self.n() as f64)
    }

    /// Hash of the table (or row list) this code was built from.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    /// Columns of row `i` of the full `[H1 | A]`, ascending.
    pub fn full_row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let k = self.k;
        self.h1_row(i)
            .iter()
            .map(|&c| c as usize)
            .chain(self.accumulator().row(i).map(move |p| k + p))
    }

    /// Recovers a circulant table from the expanded structure by reading
    /// column 0 of every group. Only defined for quasi-cyclic codes.
    pub fn to_table(&self) -> Option<CirculantTable> {
        self.q?;
        let n = self.n();
        let g = num_integer_gcd(self.k, n);
        let groups = (0..self.k / GROUP_SIZE)
            .map(|grp| {
                self.h1_col(grp * GROUP_SIZE)
                    .iter()
                    .map(|&r| r as usize)
                    .collect()
            })
            .collect();
        CirculantTable::new(n, self.k / g, n / g, groups).ok()
    }
}

fn num_integer_gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
