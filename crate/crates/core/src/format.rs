//! Shared helpers for the plain-text file formats.
//!
//! All formats are line-oriented: `#`-prefixed key/value headers followed by
//! comma-separated records. Floats are written with 17 significant digits so
//! that every `f64` round-trips bit-exactly.

pub(crate) fn join_usizes(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Format a float with enough digits to round-trip exactly.
pub(crate) fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parse a `# key: value` header line with the given key; returns the value.
pub(crate) fn parse_header<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix(key)?;
    let rest = rest.trim_start().strip_prefix(':')?;
    Some(rest.trim())
}

/// Parse `# cards: c0,c1,...` into the cardinality list.
pub(crate) fn parse_cards_header(line: &str) -> Option<Vec<usize>> {
    let value = parse_header(line, "cards")?;
    parse_usize_list(value)
}

pub(crate) fn parse_usize_list(value: &str) -> Option<Vec<usize>> {
    if value.is_empty() {
        return Some(Vec::new());
    }
    value
        .split(',')
        .map(|f| f.trim().parse::<usize>().ok())
        .collect()
}
