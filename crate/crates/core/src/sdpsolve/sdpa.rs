//! SDPA sparse-format (`.dat-s`) export and a matching reader.
//!
//! The exported file states our maximization as the SDPA dual: block
//! variables `Y = diag(X_1, ..., X_k, diag(v+, v-))` with one diagonal
//! block splitting every free scalar into a difference of nonnegatives,
//! `tr(F_0 Y)` equal to the maximized functional, and `tr(F_r Y) = b_r`
//! reproducing each equality row. Values are printed with 17 significant
//! digits so parsing the file recovers the exact doubles, and the emission
//! order is fixed, so equal relaxations produce byte-identical files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sosrelax::SdpProblem;

#[derive(Debug, Error, PartialEq)]
#[error("sdpa parse error at line {line}: {msg}")]
pub struct SdpaError {
    pub line: usize,
    pub msg: String,
}

/// One `matno blockno i j value` record, indices 1-based as in the file;
/// `matno` 0 is the objective matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpaEntry {
    pub matno: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Parsed skeleton of a sparse SDPA file.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaFile {
    pub num_constraints: usize,
    pub block_struct: Vec<i64>,
    pub rhs: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render the problem as a deterministic `.dat-s` document with a comment
/// header mapping blocks, free scalars, and rows to their recorded labels.
pub fn export_sdpa(sdp: &SdpProblem) -> String {
    let p = sdp.num_free;
    let lp_block = sdp.block_sizes.len() + 1;
    let mut out = String::new();

    let _ = writeln!(
        out,
        "* maximize tr(F0 Y): Y = diag(PSD blocks, [v+ v-]) with v = v+ - v-"
    );
    for (b, size) in sdp.block_sizes.iter().enumerate() {
        let label = sdp.block_labels.get(b).filter(|l| !l.is_empty());
        let _ = writeln!(
            out,
            "* block {}: {} (order {size})",
            b + 1,
            label.map_or("PSD block", |l| l.as_str())
        );
    }
    if p > 0 {
        let _ = writeln!(
            out,
            "* block {lp_block}: diagonal split of {p} free scalars (v+ positions 1..{p}, v- positions {}..{})",
            p + 1,
            2 * p
        );
    }
    for k in 0..p {
        let label = sdp.free_labels.get(k).filter(|l| !l.is_empty());
        let _ = writeln!(
            out,
            "* free {}: {}",
            k + 1,
            label.map_or_else(|| format!("v{}", k + 1), |l| l.clone())
        );
    }
    for (r, row) in sdp.rows.iter().enumerate() {
        if !row.label.is_empty() {
            let _ = writeln!(out, "* row {}: {}", r + 1, row.label);
        }
    }

    let _ = writeln!(out, "{}", sdp.rows.len());
    let nblocks = sdp.block_sizes.len() + usize::from(p > 0);
    let _ = writeln!(out, "{nblocks}");
    let mut bline: Vec<String> = sdp.block_sizes.iter().map(|s| s.to_string()).collect();
    if p > 0 {
        bline.push(format!("-{}", 2 * p));
    }
    let _ = writeln!(out, "{}", bline.join(" "));
    if !sdp.rows.is_empty() {
        let rhs_line: Vec<String> = sdp.rows.iter().map(|r| fmt_f64(r.rhs)).collect();
        let _ = writeln!(out, "{}", rhs_line.join(" "));
    }

    let emit = |matno: usize, block: usize, i: usize, j: usize, value: f64, out: &mut String| {
        if value != 0.0 {
            let _ = writeln!(out, "{matno} {block} {i} {j} {}", fmt_f64(value));
        }
    };
    for (k, &o) in sdp.objective.iter().enumerate() {
        emit(0, lp_block, k + 1, k + 1, o, &mut out);
        emit(0, lp_block, p + k + 1, p + k + 1, -o, &mut out);
    }
    for (r, row) in sdp.rows.iter().enumerate() {
        for e in &row.entries {
            emit(r + 1, e.block + 1, e.i + 1, e.j + 1, e.value, &mut out);
        }
        for &(k, c) in &row.free {
            emit(r + 1, lp_block, k + 1, k + 1, c, &mut out);
            emit(r + 1, lp_block, p + k + 1, p + k + 1, -c, &mut out);
        }
    }
    out
}

/// Read a sparse SDPA document back into its raw records. Comment lines
/// (`*` or `"`), commas, and brace decorations are tolerated as in the
/// reference reader.
pub fn parse_sdpa(src: &str) -> Result<SdpaFile, SdpaError> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('*') && !t.starts_with('"')
        });
    let mut next_tokens = |what: &str| -> Result<(usize, Vec<String>), SdpaError> {
        let (lineno, line) = lines.next().ok_or(SdpaError {
            line: 0,
            msg: format!("missing {what}"),
        })?;
        let cleaned: String = line
            .chars()
            .map(|c| {
                if matches!(c, ',' | '{' | '}' | '(' | ')') {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        Ok((
            lineno,
            cleaned.split_whitespace().map(str::to_string).collect(),
        ))
    };

    let (line, toks) = next_tokens("constraint count")?;
    let m: usize = toks.first().and_then(|t| t.parse().ok()).ok_or(SdpaError {
        line,
        msg: "cannot read the constraint count".into(),
    })?;
    let (line, toks) = next_tokens("block count")?;
    let nblocks: usize = toks.first().and_then(|t| t.parse().ok()).ok_or(SdpaError {
        line,
        msg: "cannot read the block count".into(),
    })?;
    let (line, toks) = next_tokens("block structure")?;
    if toks.len() < nblocks {
        return Err(SdpaError {
            line,
            msg: format!("expected {nblocks} block sizes, found {}", toks.len()),
        });
    }
    let mut block_struct = Vec::with_capacity(nblocks);
    for t in toks.iter().take(nblocks) {
        block_struct.push(t.parse::<i64>().map_err(|_| SdpaError {
            line,
            msg: format!("bad block size '{t}'"),
        })?);
    }
    let mut rhs = Vec::with_capacity(m);
    if m > 0 {
        let (line, toks) = next_tokens("right-hand side")?;
        if toks.len() < m {
            return Err(SdpaError {
                line,
                msg: format!("expected {m} right-hand values, found {}", toks.len()),
            });
        }
        for t in toks.iter().take(m) {
            rhs.push(t.parse::<f64>().map_err(|_| SdpaError {
                line,
                msg: format!("bad value '{t}'"),
            })?);
        }
    }

    let mut entries = Vec::new();
    for (lineno, raw) in lines {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpaError {
                line: lineno,
                msg: format!(
                    "expected 'matno block i j value', found {} fields",
                    toks.len()
                ),
            });
        }
        let nums: Result<Vec<usize>, _> = toks[..4].iter().map(|t| t.parse()).collect();
        let idx = nums.map_err(|_| SdpaError {
            line: lineno,
            msg: "bad entry indices".into(),
        })?;
        let value: f64 = toks[4].parse().map_err(|_| SdpaError {
            line: lineno,
            msg: format!("bad value '{}'", toks[4]),
        })?;
        if idx[0] > m {
            return Err(SdpaError {
                line: lineno,
                msg: format!("matrix number {} exceeds {m}", idx[0]),
            });
        }
        if idx[1] == 0 || idx[1] > nblocks {
            return Err(SdpaError {
                line: lineno,
                msg: format!("block number {} out of range", idx[1]),
            });
        }
        entries.push(SdpaEntry {
            matno: idx[0],
            block: idx[1],
            i: idx[2],
            j: idx[3],
            value,
        });
    }
    Ok(SdpaFile {
        num_constraints: m,
        block_struct,
        rhs,
        entries,
    })
}
