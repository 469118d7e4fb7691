//! `metric<TAB>value` reports.

use crate::error::{Error, Result};

/// One line per metric, values at 6 decimal places.
pub fn format_metrics(metrics: &[(String, f64)]) -> String {
    metrics.iter().map(|(k, v)| format!("{k}\t{v:.6}\n")).collect()
}

pub fn parse_metrics(text: &str) -> Result<Vec<(String, f64)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let err = |reason: &str| Error::Parse {
                line: n + 1,
                reason: reason.into(),
            };
            let (k, v) = l.split_once('\t').ok_or_else(|| err("expected metric<TAB>value"))?;
            Ok((k.to_string(), v.parse().map_err(|_| err("value is not a number"))?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_roundtrip() {
        let m = vec![("recall@3".to_string(), 0.5), ("map".to_string(), 1.0 / 3.0)];
        let text = format_metrics(&m);
        assert_eq!(text, "recall@3\t0.500000\nmap\t0.333333\n");
        let back = parse_metrics(&text).unwrap();
        assert_eq!(back[0], m[0]);
        assert!(parse_metrics("x 1\n").is_err());
    }
}
