//! Line-oriented model config grammar.
//!
//! ```text
//! kind = matrix_table
//! dim = 2
//! entry.0.1 = 0.5 0.0 * gaussian(0.5, 0.16)
//! entry.1.1 = 0.0 -0.5
//! ```

use std::collections::BTreeMap;

use super::{Gaussian, HamiltonianModel, ModelError, TwoLevelPulseParams};
use crate::linalg::{CMatrix, C64};

/// One additive contribution `value · envelope(s)` to entry (row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct EntryTerm {
    pub row: usize,
    pub col: usize,
    pub value: C64,
    pub envelope: Option<Gaussian>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTable {
    pub dim: usize,
    pub terms: Vec<EntryTerm>,
}

impl MatrixTable {
    pub fn evaluate(&self, s: f64) -> CMatrix {
        self.assemble(|term| term.envelope.map_or(1.0, |g| g.value(s)))
    }

    pub fn derivative(&self, s: f64) -> CMatrix {
        self.assemble(|term| term.envelope.map_or(0.0, |g| g.derivative(s)))
    }

    fn assemble(&self, weight: impl Fn(&EntryTerm) -> f64) -> CMatrix {
        let mut entries = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        for term in &self.terms {
            entries[term.row * self.dim + term.col] += term.value * weight(term);
        }
        CMatrix::from_row_major(entries)
    }
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    value: &'a str,
    value_column: usize,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn split_lines(text: &str) -> Result<Vec<Line<'_>>, ModelError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(parse_err(number, col, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        if key.is_empty() {
            return Err(parse_err(number, eq + 1, "missing key before `=`"));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_column = eq + 2 + (after.len() - after.trim_start().len());
        out.push(Line {
            number,
            key,
            value,
            value_column,
        });
    }
    Ok(out)
}

fn parse_f64(line: &Line<'_>, token: &str, offset: usize) -> Result<f64, ModelError> {
    let v: f64 = token.parse().map_err(|_| {
        parse_err(
            line.number,
            line.value_column + offset,
            format!("`{token}` is not a decimal number"),
        )
    })?;
    if !v.is_finite() {
        return Err(parse_err(line.number, line.value_column + offset, "value must be finite"));
    }
    Ok(v)
}

/// Splits on whitespace while remembering each token's byte offset.
fn tokens(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(b)) => {
                out.push((b, &s[b..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(b) = start {
        out.push((b, &s[b..]));
    }
    out
}

fn parse_entry_value(line: &Line<'_>) -> Result<(C64, Option<Gaussian>), ModelError> {
    let (numbers, envelope_text) = match line.value.find('*') {
        Some(star) => (&line.value[..star], Some((star + 1, &line.value[star + 1..]))),
        None => (line.value, None),
    };
    let toks = tokens(numbers);
    if toks.len() != 2 {
        return Err(parse_err(
            line.number,
            line.value_column,
            "entry needs exactly `<re> <im>`",
        ));
    }
    let re = parse_f64(line, toks[0].1, toks[0].0)?;
    let im = parse_f64(line, toks[1].1, toks[1].0)?;

    let envelope = match envelope_text {
        None => None,
        Some((offset, text)) => {
            let lead = text.len() - text.trim_start().len();
            let body = text.trim();
            let col = offset + lead;
            let inner = body
                .strip_prefix("gaussian")
                .map(str::trim_start)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| {
                    parse_err(
                        line.number,
                        line.value_column + col,
                        "expected `gaussian(<s0>,<sigma>)`",
                    )
                })?;
            let inner_offset = col + body.find('(').unwrap_or(0) + 1;
            let parts: Vec<&str> = inner.split(',').collect();
            if parts.len() != 2 {
                return Err(parse_err(
                    line.number,
                    line.value_column + inner_offset,
                    "gaussian takes two arguments",
                ));
            }
            let center = parse_f64(line, parts[0].trim(), inner_offset)?;
            let sigma = parse_f64(line, parts[1].trim(), inner_offset + parts[0].len() + 1)?;
            if sigma <= 0.0 {
                return Err(parse_err(
                    line.number,
                    line.value_column + inner_offset,
                    "gaussian sigma must be > 0",
                ));
            }
            Some(Gaussian { center, sigma })
        }
    };
    Ok((C64::new(re, im), envelope))
}

fn parse_index(line: &Line<'_>, text: &str, dim: usize) -> Result<usize, ModelError> {
    let i: usize = text
        .parse()
        .map_err(|_| parse_err(line.number, 1, format!("bad entry index `{text}`")))?;
    if i >= dim {
        return Err(parse_err(
            line.number,
            1,
            format!("entry index {i} out of range for dim {dim}"),
        ));
    }
    Ok(i)
}

/// Builds a model from config text. Dissipativity is not checked here.
pub fn parse_model(text: &str) -> Result<HamiltonianModel, ModelError> {
    let lines = split_lines(text)?;
    let mut scalars: BTreeMap<&str, &Line<'_>> = BTreeMap::new();
    let mut entries: Vec<&Line<'_>> = Vec::new();
    for line in &lines {
        if line.key.starts_with("entry.") {
            entries.push(line);
            continue;
        }
        match line.key {
            "kind" | "dim" | "gamma" | "w0" | "s0" | "sigma" => {
                if scalars.insert(line.key, line).is_some() {
                    return Err(parse_err(line.number, 1, format!("duplicate key `{}`", line.key)));
                }
            }
            other => return Err(parse_err(line.number, 1, format!("unknown key `{other}`"))),
        }
    }

    let last_line = lines.last().map_or(1, |l| l.number);
    let kind = scalars
        .get("kind")
        .ok_or_else(|| parse_err(last_line, 1, "missing required key `kind`"))?;
    let dim_line = scalars
        .get("dim")
        .ok_or_else(|| parse_err(last_line, 1, "missing required key `dim`"))?;
    let dim: usize = dim_line
        .value
        .parse()
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| {
            parse_err(
                dim_line.number,
                dim_line.value_column,
                "dim must be a positive integer",
            )
        })?;

    match kind.value {
        "two_level_pulse" => {
            if let Some(e) = entries.first() {
                return Err(parse_err(e.number, 1, "entry keys are not valid for two_level_pulse"));
            }
            if dim != 2 {
                return Err(parse_err(
                    dim_line.number,
                    dim_line.value_column,
                    "two_level_pulse requires dim = 2",
                ));
            }
            let get = |key: &str| -> Result<f64, ModelError> {
                let line = scalars
                    .get(key)
                    .ok_or_else(|| parse_err(last_line, 1, format!("missing required key `{key}`")))?;
                parse_f64(line, line.value, 0)
            };
            let params = TwoLevelPulseParams {
                gamma: get("gamma")?,
                w0: get("w0")?,
                s0: get("s0")?,
                sigma: get("sigma")?,
            };
            HamiltonianModel::two_level_pulse(params)
        }
        "matrix_table" => {
            for key in ["gamma", "w0", "s0", "sigma"] {
                if let Some(line) = scalars.get(key) {
                    return Err(parse_err(
                        line.number,
                        1,
                        format!("key `{key}` is not valid for matrix_table"),
                    ));
                }
            }
            let mut terms = Vec::with_capacity(entries.len());
            for line in entries {
                let idx: Vec<&str> = line.key["entry.".len()..].split('.').collect();
                if idx.len() != 2 {
                    return Err(parse_err(line.number, 1, "entry key must be `entry.<i>.<j>`"));
                }
                let row = parse_index(line, idx[0], dim)?;
                let col = parse_index(line, idx[1], dim)?;
                let (value, envelope) = parse_entry_value(line)?;
                terms.push(EntryTerm {
                    row,
                    col,
                    value,
                    envelope,
                });
            }
            Ok(HamiltonianModel::matrix_table(MatrixTable { dim, terms }))
        }
        other => Err(ModelError::UnknownModelKind(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    #[test]
    fn two_level_round_trip() {
        let text = "# pulse model\nkind = two_level_pulse\ndim = 2\ngamma = 1\nw0 = 1\ns0 = 0.5\nsigma = 0.16\n";
        let m = parse_model(text).unwrap();
        let reference = HamiltonianModel::two_level_pulse(TwoLevelPulseParams::default()).unwrap();
        for s in [0.0, 0.25, 0.5, 0.9] {
            assert_eq!(m.evaluate(s), reference.evaluate(s));
            assert_eq!(m.derivative(s), reference.derivative(s));
        }
    }

    #[test]
    fn matrix_table_with_gaussian_and_repeated_terms() {
        let text = "kind = matrix_table\ndim = 2\n\
                    entry.0.1 = 0.5 0 * gaussian(0.5, 0.16)\n\
                    entry.1.0 = 0.5 0 * gaussian(0.5,0.16)\n\
                    entry.1.1 = 0.2 0   # Hermitian part\n\
                    entry.1.1 = 0 -0.5  # decay\n";
        let m = parse_model(text).unwrap();
        let h = m.evaluate(0.5);
        assert_eq!(h[(0, 1)], C64::new(0.5, 0.0));
        assert_eq!(h[(1, 1)], C64::new(0.2, -0.5));
        assert_eq!(h[(0, 0)], ZERO);
        let d = m.derivative(0.5).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        m.check_dissipative().unwrap();
    }

    #[test]
    fn gain_is_rejected() {
        let text = "kind = matrix_table\ndim = 2\nentry.0.1 = 0.3 0\nentry.1.0 = 0.3 0\nentry.1.1 = 0 0.5\n";
        let m = parse_model(text).unwrap();
        match m.check_dissipative() {
            Err(ModelError::DissipativityViolation { value, .. }) => assert!((value - 0.5).abs() < 1e-12),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_model("kind = matrix_table\ndim = 2\nfoo = 1\n").unwrap_err();
        assert_eq!(
            err,
            ModelError::Parse {
                line: 3,
                column: 1,
                message: "unknown key `foo`".into()
            }
        );
    }

    #[test]
    fn bad_number_reports_column() {
        let err = parse_model("kind = matrix_table\ndim = 2\nentry.0.0 = 1.0 abc\n").unwrap_err();
        match err {
            ModelError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 17);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_kind() {
        let err = parse_model("kind = three_level\ndim = 3\n").unwrap_err();
        assert_eq!(err, ModelError::UnknownModelKind("three_level".into()));
    }

    #[test]
    fn missing_equals_and_out_of_range_index() {
        assert!(matches!(
            parse_model("kind matrix_table\n"),
            Err(ModelError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_model("kind = matrix_table\ndim = 2\nentry.2.0 = 1 0\n"),
            Err(ModelError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_model("kind = two_level_pulse\ndim = 2\ngamma = 1\nw0 = 1\ns0 = 0.5\n"),
            Err(ModelError::Parse { .. })
        ));
    }
}
