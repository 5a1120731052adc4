//! Matrix Market, coefficient, benchmark-config and CSV files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{BenchConfig, BenchFunction, BenchRow};
use crate::sparse::SparseMatrix;

/// Header of the benchmark CSV.
pub const CSV_HEADER: &str = "method,n,bandwidth,trial,time_seconds,sparsity,rel_error,certified_bound,N,q,b";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Reads a square `coordinate real|integer general|symmetric|skew-symmetric`
/// Matrix Market file. Duplicate entries are summed.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(BufReader::new(file), path)
}

/// Parses Matrix Market text; `source` only labels errors.
pub fn parse_matrix_market(reader: impl BufRead, source: &Path) -> Result<SparseMatrix> {
    let mut all = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        all.push((i + 1, line.map_err(|e| Error::io(source, e))?));
    }
    let last_line = all.len().max(1);
    let mut lines = all.into_iter();
    let (no, banner) = lines.next().ok_or_else(|| parse_err(source, 1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" {
        return Err(parse_err(source, no, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    if words[1] != "matrix" {
        return Err(parse_err(source, no, format!("unsupported object `{}`", words[1])));
    }
    if words[2] != "coordinate" {
        return Err(parse_err(source, no, format!("unsupported format `{}` (only coordinate)", words[2])));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(parse_err(source, no, format!("unsupported field `{}`", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(source, no, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, text)| {
        let t = text.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_no, size_line) = data
        .next()
        .ok_or_else(|| parse_err(source, last_line, "missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|w| w.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(source, size_no, format!("bad size line: {e}")))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(source, size_no, "size line needs `rows cols entries`"));
    };
    if rows != cols {
        return Err(parse_err(source, size_no, format!("matrix is {rows}x{cols}, not square")));
    }
    if rows == 0 {
        return Err(parse_err(source, size_no, "zero dimension"));
    }

    let mut trip = Vec::with_capacity(if symmetry == Symmetry::General { nnz } else { 2 * nnz });
    let mut count = 0;
    for (no, line) in data {
        if count == nnz {
            return Err(parse_err(source, no, format!("more than the declared {nnz} entries")));
        }
        let mut it = line.split_whitespace();
        let mut index = |what: &str| -> Result<usize> {
            let w = it.next().ok_or_else(|| parse_err(source, no, format!("missing {what} index")))?;
            let v: usize = w.parse().map_err(|_| parse_err(source, no, format!("bad {what} index `{w}`")))?;
            if v == 0 || v > rows {
                return Err(parse_err(source, no, format!("{what} index {v} outside 1..={rows}")));
            }
            Ok(v - 1)
        };
        let r = index("row")?;
        let c = index("column")?;
        let w = it.next().ok_or_else(|| parse_err(source, no, "missing value"))?;
        let v: f64 = w.parse().map_err(|_| parse_err(source, no, format!("bad value `{w}`")))?;
        if !v.is_finite() {
            return Err(parse_err(source, no, "non-finite value"));
        }
        if it.next().is_some() {
            return Err(parse_err(source, no, "trailing fields"));
        }
        trip.push((r, c, v));
        if r != c {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => trip.push((c, r, v)),
                Symmetry::SkewSymmetric => trip.push((c, r, -v)),
            }
        } else if symmetry == Symmetry::SkewSymmetric {
            return Err(parse_err(source, no, "diagonal entry in a skew-symmetric file"));
        }
        count += 1;
    }
    if count < nnz {
        return Err(parse_err(source, last_line, format!("expected {nnz} entries, found {count}")));
    }
    SparseMatrix::from_triplets(rows, trip)
}

/// Writes `coordinate real general`, entries in row-major order.
pub fn write_matrix_market(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    format_matrix_market(m, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn format_matrix_market(m: &SparseMatrix, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.dim(), m.dim(), m.nnz())?;
    for (r, c, v) in m.iter() {
        writeln!(out, "{} {} {:.16e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

/// One coefficient per line; blank lines and lines starting with `#` or `%`
/// are skipped.
pub fn read_coefficients(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coefficients(&text, path)
}

pub fn parse_coefficients(text: &str, source: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(source, i + 1, format!("bad coefficient `{t}`")))?;
        if !v.is_finite() {
            return Err(parse_err(source, i + 1, "non-finite coefficient"));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(parse_err(source, text.lines().count().max(1), "no coefficients"));
    }
    Ok(out)
}

fn parse_list(value: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            let hi: usize = hi.trim().parse().map_err(|_| format!("bad range `{part}`"))?;
            if lo > hi {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| format!("bad integer `{part}`"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// Flat `key = value` benchmark config; `#` starts a comment. Unset keys
/// keep their defaults.
///
/// Keys: `function` (exp, cos, poly), `sizes`, `bandwidths` (comma lists,
/// `a-b` ranges allowed), `trials`, `eps_tol`, `seed`, `scale_target`
/// (a number or `none`), `coeffs` (comma list of reals, for poly).
pub fn parse_bench_config(text: &str, source: &Path) -> Result<BenchConfig> {
    let mut cfg = BenchConfig::default();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let t = line.split('#').next().unwrap_or_default().trim();
        if t.is_empty() {
            continue;
        }
        let (key, value) = t
            .split_once('=')
            .ok_or_else(|| parse_err(source, no, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |m: String| parse_err(source, no, format!("{key}: {m}"));
        match key {
            "function" => cfg.function = value.parse::<BenchFunction>().map_err(|e| bad(e.to_string()))?,
            "sizes" => cfg.sizes = parse_list(value).map_err(bad)?,
            "bandwidths" => cfg.bandwidths = parse_list(value).map_err(bad)?,
            "trials" | "trials_per_bandwidth" => {
                cfg.trials_per_bandwidth = value.parse().map_err(|_| bad(format!("bad integer `{value}`")))?
            }
            "eps_tol" => cfg.eps_tol = value.parse().map_err(|_| bad(format!("bad number `{value}`")))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad(format!("bad integer `{value}`")))?,
            "scale_target" => {
                cfg.scale_target = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(format!("bad number `{value}`")))?)
                }
            }
            "coeffs" => {
                cfg.poly_coeffs = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(format!("bad coefficient list `{value}`")))?
            }
            other => return Err(parse_err(source, no, format!("unknown key `{other}`"))),
        }
    }
    cfg.validate().map_err(|e| parse_err(source, 0, e.to_string()))?;
    Ok(cfg)
}

pub fn read_bench_config(path: impl AsRef<Path>) -> Result<BenchConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bench_config(&text, path)
}

/// Writes benchmark rows under [`CSV_HEADER`].
pub fn format_csv(rows: &[BenchRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:e},{:e},{:e},{:e},{},{},{}",
            r.method,
            r.n,
            r.bandwidth,
            r.trial,
            r.time_seconds,
            r.sparsity,
            r.rel_error,
            r.certified_bound,
            r.terms,
            r.q,
            r.b
        )?;
    }
    Ok(())
}

pub fn write_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    format_csv(rows, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Placeholder path for in-memory parsing.
pub fn memory_source() -> PathBuf {
    PathBuf::from("<memory>")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SparseMatrix> {
        parse_matrix_market(text.as_bytes(), &memory_source())
    }

    #[test]
    fn general_file() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.5\n2 1 -2\n").unwrap();
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.get(1, 0), -2.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn symmetric_expands() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 1 3.0\n").unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn duplicates_summed_and_integer_field() {
        let m = parse("%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 1\n1 2 4\n").unwrap();
        assert_eq!(m.get(0, 1), 5.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("%%MatrixMarket matrix coordinate real general\n2 3 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(parse("%%MatrixMarket matrix array real general\n2 2\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate complex general\n1 1 0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let m = SparseMatrix::from_triplets(3, [(2, 0, 1.0 / 3.0), (0, 1, -1e-300), (1, 1, 7.0)]).unwrap();
        let mut buf = Vec::new();
        format_matrix_market(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n3 3 3\n1 2 "));
        assert_eq!(parse(&text).unwrap(), m);
    }

    #[test]
    fn coefficients() {
        let c = parse_coefficients("# header\n1\n\n0.5\n-2e-3\n", &memory_source()).unwrap();
        assert_eq!(c, [1.0, 0.5, -2e-3]);
        let e = parse_coefficients("1\nabc\n", &memory_source()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_coefficients("# nothing\n", &memory_source()).is_err());
    }

    #[test]
    fn bench_config() {
        let cfg = parse_bench_config(
            "function = cos\nsizes = 100, 200\nbandwidths = 1-3,5\ntrials=2\neps_tol=1e-12\nseed=9\nscale_target=none\n",
            &memory_source(),
        )
        .unwrap();
        assert_eq!(cfg.function, BenchFunction::Cos);
        assert_eq!(cfg.sizes, [100, 200]);
        assert_eq!(cfg.bandwidths, [1, 2, 3, 5]);
        assert_eq!(cfg.trials_per_bandwidth, 2);
        assert_eq!(cfg.eps_tol, 1e-12);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scale_target, None);
        let cfg = parse_bench_config("sizes = 50 # one size\ncoeffs = 1, 0.5\n", &memory_source()).unwrap();
        assert_eq!(cfg.sizes, [50]);
        assert_eq!(cfg.poly_coeffs, [1.0, 0.5]);
        let e = parse_bench_config("sizes = 10\nfoo = 1\n", &memory_source()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_bench_config("sizes = 4\nbandwidths = 4\n", &memory_source()).is_err());
    }

    #[test]
    fn csv_header_and_row() {
        let rows = vec![BenchRow {
            method: crate::harness::Method::Psscf,
            n: 10,
            bandwidth: 2,
            trial: 0,
            time_seconds: 0.5,
            sparsity: 0.25,
            nnz: 25,
            rel_error: 1e-13,
            abs_error: 1e-13,
            certified_bound: 2e-13,
            terms: 17,
            q: 4,
            b: 5,
            note: None,
        }];
        let mut buf = Vec::new();
        format_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("PSSCF,10,2,0,5e-1,2.5e-1,1e-13,2e-13,17,4,5"));
    }
}
