//! CSV ingestion and the real-data preprocessing pipeline: outlier
//! filtering on the domain identifier, min-max scaling, binning into
//! domains, and random splitting of the target domain.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::design::DomainSample;
use crate::error::{DvcmError, Result};
use crate::stats::mean_sd;

/// Numeric table with columns ordered `(u, x..., y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: DMatrix<f64>,
    pub n: usize,
}

impl RawTable {
    pub fn new(headers: Vec<String>, rows: DMatrix<f64>) -> Result<Self> {
        if headers.len() != rows.ncols() || headers.len() < 3 {
            return Err(DvcmError::argument(
                "table needs a u column, at least one covariate and a response",
            ));
        }
        if let Some(v) = rows.iter().find(|v| !v.is_finite()) {
            return Err(DvcmError::argument(format!("table holds a non-finite value {v}")));
        }
        Ok(RawTable { n: rows.nrows(), headers, rows })
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.rows.ncols() - 2
    }

    pub fn u(&self) -> Vec<f64> {
        self.rows.column(0).iter().copied().collect()
    }

    pub fn x(&self) -> DMatrix<f64> {
        self.rows.columns(1, self.p()).into_owned()
    }

    pub fn y(&self) -> DVector<f64> {
        self.rows.column(self.rows.ncols() - 1).into_owned()
    }

    /// Rows where `mask` is true.
    pub fn filter_rows(&self, mask: &[bool]) -> Result<RawTable> {
        if mask.len() != self.n {
            return Err(DvcmError::argument("mask length differs from the row count"));
        }
        let keep: Vec<usize> = (0..self.n).filter(|&i| mask[i]).collect();
        let rows = self.rows.select_rows(&keep);
        Ok(RawTable {
            headers: self.headers.clone(),
            n: keep.len(),
            rows,
        })
    }

    /// Same table with the identifier column replaced.
    pub fn with_u(&self, u: &[f64]) -> Result<RawTable> {
        if u.len() != self.n {
            return Err(DvcmError::argument("identifier length differs from the row count"));
        }
        let mut rows = self.rows.clone();
        for (i, &v) in u.iter().enumerate() {
            rows[(i, 0)] = v;
        }
        Ok(RawTable {
            headers: self.headers.clone(),
            rows,
            n: self.n,
        })
    }
}

/// A linear combination of columns and a constant, such as `age - education - 6`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(f64, String)>,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse()
                    .map_err(|_| DvcmError::argument(format!("bad number `{s}` in expression `{text}`")))?;
                out.push(Token::Num(v));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(DvcmError::argument(format!(
                    "unexpected character `{other}` in expression `{text}`"
                )))
            }
        }
    }
    Ok(out)
}

impl LinearExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let bad = || DvcmError::argument(format!("cannot parse identifier expression `{text}`"));
        let mut terms = Vec::new();
        let mut constant = 0.0;
        let mut i = 0;
        let mut first = true;
        while i < tokens.len() {
            let mut sign = 1.0;
            match tokens[i] {
                Token::Plus => i += 1,
                Token::Minus => {
                    sign = -1.0;
                    i += 1;
                }
                _ if first => {}
                _ => return Err(bad()),
            }
            first = false;
            match tokens.get(i) {
                Some(Token::Num(v)) => {
                    if let (Some(Token::Star), Some(Token::Ident(name))) = (tokens.get(i + 1), tokens.get(i + 2)) {
                        terms.push((sign * v, name.clone()));
                        i += 3;
                    } else {
                        constant += sign * v;
                        i += 1;
                    }
                }
                Some(Token::Ident(name)) => {
                    terms.push((sign, name.clone()));
                    i += 1;
                }
                _ => return Err(bad()),
            }
        }
        if terms.is_empty() && tokens.is_empty() {
            return Err(bad());
        }
        Ok(LinearExpr { terms, constant })
    }
}

/// Reads a CSV file. `u_column` is a column name or a linear expression of columns.
pub fn load_csv(
    path: &Path,
    u_column: &str,
    x_columns: &[String],
    y_column: &str,
    add_intercept: bool,
) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    read_csv(file, u_column, x_columns, y_column, add_intercept)
}

pub fn read_csv<R: Read>(
    reader: R,
    u_column: &str,
    x_columns: &[String],
    y_column: &str,
    add_intercept: bool,
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DvcmError::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let index_of = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DvcmError::Schema(name.to_string()))
    };
    let u_expr = if header.iter().any(|h| h == u_column) {
        LinearExpr {
            terms: vec![(1.0, u_column.to_string())],
            constant: 0.0,
        }
    } else {
        LinearExpr::parse(u_column)?
    };
    let u_terms: Vec<(f64, usize)> = u_expr
        .terms
        .iter()
        .map(|(c, name)| Ok((*c, index_of(name)?)))
        .collect::<Result<_>>()?;
    let x_idx: Vec<usize> = x_columns.iter().map(|c| index_of(c)).collect::<Result<_>>()?;
    let y_idx = index_of(y_column)?;

    let width = 2 + x_idx.len() + usize::from(add_intercept);
    let mut data = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| DvcmError::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: String::new(),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(n + 2, |p| p.line() as usize);
        let cell = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DvcmError::Parse {
                    row: line,
                    column: header[j].clone(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        let mut u = u_expr.constant;
        for &(c, j) in &u_terms {
            u += c * cell(j)?;
        }
        data.push(u);
        if add_intercept {
            data.push(1.0);
        }
        for &j in &x_idx {
            data.push(cell(j)?);
        }
        data.push(cell(y_idx)?);
        n += 1;
    }
    if n == 0 {
        return Err(DvcmError::argument("data file holds no rows"));
    }
    let mut headers = vec![u_column.to_string()];
    if add_intercept {
        headers.push("intercept".into());
    }
    headers.extend(x_columns.iter().cloned());
    headers.push(y_column.to_string());
    RawTable::new(headers, DMatrix::from_row_slice(n, width, &data))
}

/// Keeps values within `k` sample standard deviations of the mean.
pub fn sigma_filter(values: &[f64], k: f64) -> Result<Vec<bool>> {
    if values.len() < 2 {
        return Err(DvcmError::argument("outlier filter needs at least two values"));
    }
    if !(k >= 0.0) {
        return Err(DvcmError::argument(format!("filter width must be non-negative, got {k}")));
    }
    let (mean, sd) = mean_sd(values);
    if sd == 0.0 {
        return Ok(vec![true; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean).abs() <= k * sd).collect())
}

/// `(v - min) / (max - min)`.
pub fn minmax_scale(values: &[f64]) -> Result<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(hi > lo) {
        return Err(DvcmError::DegenerateScale(
            "identifier is constant; min-max scaling is undefined".into(),
        ));
    }
    let range = hi - lo;
    Ok(values.iter().map(|v| (v - lo) / range).collect())
}

/// Observations grouped into domains by binned identifier.
#[derive(Debug, Clone)]
pub struct BinnedPanel {
    /// One domain per occupied bin, in bin order, at the bin midpoint.
    pub domains: Vec<DomainSample>,
    /// Bin index of each domain.
    pub bins: Vec<usize>,
    pub bin_edges: Vec<f64>,
    /// Scaled identifiers before binning.
    pub u_raw: Vec<f64>,
}

/// Index of the bin holding `u`: `[e0, e1], (e1, e2], ...`.
pub fn bin_index(u: f64, edges: &[f64]) -> Option<usize> {
    let last = edges.len() - 1;
    if !(u >= edges[0]) || u > edges[last] {
        return None;
    }
    (0..last).find(|&j| u <= edges[j + 1])
}

pub fn bin_midpoint(j: usize, n_bins: usize) -> f64 {
    (j as f64 + 0.5) / n_bins as f64
}

pub fn bin_domains(table: &RawTable, n_bins: usize) -> Result<BinnedPanel> {
    if n_bins < 2 {
        return Err(DvcmError::argument(format!("need at least two bins, got {n_bins}")));
    }
    if table.n == 0 {
        return Err(DvcmError::argument("cannot bin an empty table"));
    }
    let edges: Vec<f64> = (0..=n_bins).map(|j| j as f64 / n_bins as f64).collect();
    let u = table.u();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &v) in u.iter().enumerate() {
        let j = bin_index(v, &edges).ok_or_else(|| {
            DvcmError::Domain(format!("scaled identifier {v} at row {i} lies outside [0, 1]"))
        })?;
        members[j].push(i);
    }
    let x = table.x();
    let y = table.y();
    let mut domains = Vec::new();
    let mut bins = Vec::new();
    for (j, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        domains.push(DomainSample::new(
            bin_midpoint(j, n_bins),
            x.select_rows(rows),
            y.select_rows(rows),
        )?);
        bins.push(j);
    }
    Ok(BinnedPanel {
        domains,
        bins,
        bin_edges: edges,
        u_raw: u,
    })
}

impl BinnedPanel {
    pub fn n_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// Splits off the domain at `u0` as the target; the rest are sources.
    pub fn split_target_domain(&self, u0: f64) -> Result<(DomainSample, Vec<DomainSample>)> {
        let pos = self
            .domains
            .iter()
            .position(|d| (d.u - u0).abs() < 1e-9)
            .ok_or_else(|| {
                let mids: Vec<String> = self.domains.iter().map(|d| format!("{}", d.u)).collect();
                DvcmError::argument(format!(
                    "no occupied bin at u0={u0}; occupied midpoints are [{}]",
                    mids.join(", ")
                ))
            })?;
        let target = self.domains[pos].clone();
        let sources = self
            .domains
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != pos)
            .map(|(_, d)| d.clone())
            .collect();
        Ok((target, sources))
    }

    /// Writes `bin,midpoint,count` rows.
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin,midpoint,count")?;
        for (d, &j) in self.domains.iter().zip(&self.bins) {
            writeln!(out, "{j},{},{}", d.u, d.n())?;
        }
        Ok(())
    }
}

/// Part sizes for `n` rows: floors of the exact shares, remainder to the earliest parts.
pub fn split_sizes(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(DvcmError::argument("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DvcmError::argument(format!("split fractions sum to {total}, not 1")));
    }
    if n < fractions.len() {
        return Err(DvcmError::argument(format!(
            "cannot split {n} rows into {} parts",
            fractions.len()
        )));
    }
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| ((n as f64 * f) + 1e-9).floor() as usize)
        .collect();
    let mut left = n - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut() {
        if left == 0 {
            break;
        }
        *s += 1;
        left -= 1;
    }
    if sizes.contains(&0) {
        return Err(DvcmError::argument(format!("split of {n} rows leaves an empty part")));
    }
    Ok(sizes)
}

/// Disjoint random partition of `target` by the given fractions.
pub fn split_target<R: Rng + ?Sized>(
    target: &DomainSample,
    fractions: &[f64],
    rng: &mut R,
) -> Result<Vec<DomainSample>> {
    let sizes = split_sizes(target.n(), fractions)?;
    let mut order: Vec<usize> = (0..target.n()).collect();
    order.shuffle(rng);
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        let mut idx = order[start..start + s].to_vec();
        idx.sort_unstable();
        parts.push(target.select_rows(&idx));
        start += s;
    }
    Ok(parts)
}
