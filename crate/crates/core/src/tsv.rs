//! `<id>\t<payload>` line files shared by annotation, hypothesis and
//! reference inputs.

use std::fs;
use std::io;
use std::path::Path;

/// Reads `(id, payload)` pairs, skipping blank lines. A line without a tab
/// is an error.
pub fn read_pairs(path: &Path) -> io::Result<Vec<(String, String)>> {
    parse_pairs(&fs::read_to_string(path)?).map_err(|(line, msg)| {
        io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{}:{line}: {msg}", path.display()),
        )
    })
}

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let (id, payload) = line
            .split_once('\t')
            .ok_or_else(|| (i + 1, "expected <id>\\t<text>".to_string()))?;
        out.push((id.to_string(), payload.to_string()));
    }
    Ok(out)
}

pub fn write_pairs<'a, I>(path: &Path, pairs: I) -> io::Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut out = String::new();
    for (id, payload) in pairs {
        out.push_str(id);
        out.push('\t');
        out.push_str(payload);
        out.push('\n');
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let p = parse_pairs("a\tX Y\n\nb\t天氣\r\n").unwrap();
        assert_eq!(p, vec![("a".into(), "X Y".into()), ("b".into(), "天氣".into())]);
        assert_eq!(parse_pairs("a\tb\nno-tab\n").unwrap_err().0, 2);
    }
}
