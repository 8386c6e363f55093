//! Sparse SDPA (`.dat-s`) reading and writing.
//!
//! SDPA states `sum_i y_i F_i - F_0 >= 0`, so its `F_0` is our `-F_0`.
//! Two comment lines carry what the format cannot: `*offset <v>` for a
//! constant objective term and `*equalities <block>` marking a diagonal block
//! that encodes equality rows as paired inequalities.

use std::fmt::Write;

use super::{BlockKind, EqRow, NumericSdp, SdpBlock};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExportOptions {
    /// Omit the marker comments, for readers that reject unknown comments.
    pub strict: bool,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the problem; equality rows become a trailing diagonal block with
/// rows `a.y - b >= 0` and `b - a.y >= 0`.
pub fn export_sdpa(p: &NumericSdp, opts: &ExportOptions) -> String {
    let mut s = String::new();
    let has_eq = !p.equalities.is_empty();
    let nblocks = p.blocks.len() + usize::from(has_eq);
    if !opts.strict {
        if p.offset != 0.0 {
            let _ = writeln!(s, "*offset {}", num(p.offset));
        }
        if has_eq {
            let _ = writeln!(s, "*equalities {nblocks}");
        }
    }
    let _ = writeln!(s, "{}", p.nvars);
    let _ = writeln!(s, "{nblocks}");
    let mut sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| match b.kind() {
            BlockKind::Dense => b.size().to_string(),
            BlockKind::Diagonal => format!("-{}", b.size()),
        })
        .collect();
    if has_eq {
        sizes.push(format!("-{}", 2 * p.equalities.len()));
    }
    let _ = writeln!(s, "{}", sizes.join(" "));
    let c: Vec<String> = p.c.iter().map(|&v| num(v)).collect();
    let _ = writeln!(s, "{}", c.join(" "));
    let mut lines: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (k, b) in p.blocks.iter().enumerate() {
        for (m, i, j, v) in b.entries() {
            lines.push((m, k + 1, i + 1, j + 1, if m == 0 { -v } else { v }));
        }
    }
    if has_eq {
        let blk = nblocks;
        for (r, e) in p.equalities.iter().enumerate() {
            let (i1, i2) = (2 * r + 1, 2 * r + 2);
            if e.rhs != 0.0 {
                lines.push((0, blk, i1, i1, e.rhs));
                lines.push((0, blk, i2, i2, -e.rhs));
            }
            for &(v, a) in &e.coeffs {
                lines.push((v + 1, blk, i1, i1, a));
                lines.push((v + 1, blk, i2, i2, -a));
            }
        }
    }
    lines.sort_by_key(|l| (l.0, l.1, l.2, l.3));
    for (m, k, i, j, v) in lines {
        let _ = writeln!(s, "{m} {k} {i} {j} {}", num(v));
    }
    s
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || ",(){}".contains(c))
        .filter(|t| !t.is_empty())
        .collect()
}

fn parse_f64(t: &str, line: usize) -> Result<f64> {
    let v: f64 = t
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid number `{t}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{t}`")));
    }
    Ok(v)
}

fn parse_usize(t: &str, line: usize, what: &str) -> Result<usize> {
    t.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{t}`")))
}

/// Upper bound on declared sizes, to keep malformed headers from allocating.
const MAX_DECLARED: usize = 1 << 24;

pub fn import_sdpa(text: &str) -> Result<NumericSdp> {
    let mut offset = 0.0;
    let mut eq_block: Option<usize> = None;
    let mut header: Vec<(usize, String)> = Vec::new();
    let mut body: Vec<(usize, &str)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('*') {
            let t: Vec<&str> = rest.split_whitespace().collect();
            match t.as_slice() {
                ["offset", v] => offset = parse_f64(v, ln)?,
                ["equalities", b] => eq_block = Some(parse_usize(b, ln, "block number")?),
                _ => {}
            }
            continue;
        }
        if line.is_empty() || line.starts_with('"') {
            continue;
        }
        if header.len() < 4 {
            header.push((ln, line.to_string()));
        } else {
            body.push((ln, line));
        }
    }
    if header.len() < 4 {
        return Err(Error::parse(text.lines().count().max(1), "truncated header"));
    }
    let (l1, h1) = &header[0];
    let nvars = parse_usize(tokens(h1).first().ok_or_else(|| Error::parse(*l1, "missing variable count"))?, *l1, "variable count")?;
    let (l2, h2) = &header[1];
    let nblocks = parse_usize(tokens(h2).first().ok_or_else(|| Error::parse(*l2, "missing block count"))?, *l2, "block count")?;
    if nvars > MAX_DECLARED || nblocks > MAX_DECLARED {
        return Err(Error::parse(*l1, "declared size too large"));
    }
    let (l3, h3) = &header[2];
    let sizes: Vec<i64> = tokens(h3)
        .iter()
        .map(|t| t.parse::<i64>().map_err(|_| Error::parse(*l3, format!("invalid block size `{t}`"))))
        .collect::<Result<_>>()?;
    if sizes.len() < nblocks {
        return Err(Error::parse(*l3, format!("expected {nblocks} block sizes, found {}", sizes.len())));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for &sz in &sizes[..nblocks] {
        let n = sz.unsigned_abs() as usize;
        if sz == 0 || n > MAX_DECLARED {
            return Err(Error::parse(*l3, format!("invalid block size {sz}")));
        }
        blocks.push(SdpBlock::new(n, if sz < 0 { BlockKind::Diagonal } else { BlockKind::Dense }));
    }
    let (l4, h4) = &header[3];
    let c: Vec<f64> = tokens(h4).iter().map(|t| parse_f64(t, *l4)).collect::<Result<_>>()?;
    if c.len() < nvars {
        return Err(Error::parse(*l4, format!("expected {nvars} objective entries, found {}", c.len())));
    }
    let c = c[..nvars].to_vec();

    for (ln, line) in body {
        let t = tokens(line);
        if t.len() < 5 {
            return Err(Error::parse(ln, "expected `matno blkno i j value`"));
        }
        let m = parse_usize(t[0], ln, "matrix number")?;
        let k = parse_usize(t[1], ln, "block number")?;
        let i = parse_usize(t[2], ln, "row")?;
        let j = parse_usize(t[3], ln, "column")?;
        let v = parse_f64(t[4], ln)?;
        if m > nvars {
            return Err(Error::parse(ln, format!("matrix number {m} exceeds {nvars}")));
        }
        if k == 0 || k > nblocks || i == 0 || j == 0 {
            return Err(Error::parse(ln, "indices are 1-based and within range"));
        }
        let v = if m == 0 { -v } else { v };
        blocks[k - 1]
            .add(m, i - 1, j - 1, v)
            .map_err(|e| Error::parse(ln, e.to_string()))?;
    }

    let mut p = NumericSdp {
        nvars,
        c,
        offset,
        blocks,
        equalities: Vec::new(),
    };
    if let Some(k) = eq_block {
        if k == 0 || k != p.blocks.len() {
            return Err(Error::parse(1, "equality marker must name the last block"));
        }
        let b = p.blocks.pop().expect("checked");
        p.equalities = decode_equalities(&b)?;
    }
    Ok(p)
}

fn decode_equalities(b: &SdpBlock) -> Result<Vec<EqRow>> {
    if b.kind() != BlockKind::Diagonal || !b.size().is_multiple_of(2) {
        return Err(Error::parse(1, "equality block must be diagonal with paired rows"));
    }
    let rows = b.size() / 2;
    let mut coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
    let mut rhs = vec![0.0; rows];
    let mut mirror: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
    for (m, i, _, v) in b.entries() {
        let (r, upper) = (i / 2, i % 2 == 0);
        // Entries are stored as our F; row 2r holds a.y - b, row 2r+1 its negation.
        match (m, upper) {
            (0, true) => rhs[r] = -v,
            (0, false) => mirror[r].push((0, -v)),
            (_, true) => coeffs[r].push((m - 1, v)),
            (_, false) => mirror[r].push((m, -v)),
        }
    }
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut expect: Vec<(usize, f64)> = coeffs[r].iter().map(|&(v, a)| (v + 1, a)).collect();
        if rhs[r] != 0.0 {
            expect.push((0, -rhs[r]));
        }
        expect.sort_by_key(|e| e.0);
        let mut got = mirror[r].clone();
        got.sort_by_key(|e| e.0);
        if expect != got {
            return Err(Error::parse(1, format!("equality row {} is not a mirrored pair", r + 1)));
        }
        out.push(EqRow::new(coeffs[r].iter().copied(), rhs[r]));
    }
    Ok(out)
}
