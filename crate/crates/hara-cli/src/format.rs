//! Number formatting and table output.

/// `v` with `digits` significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros removed.
pub fn sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // round first so the exponent reflects the printed mantissa
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub enum Format {
    Csv,
    Table,
}

/// Renders rows either as CSV or as a right-aligned text table.
pub fn render(format: &Format, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
        }
        Format::Table => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
            for r in rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&line(header.to_vec()));
            out.push('\n');
            for r in rows {
                out.push_str(&line(r.iter().map(String::as_str).collect()));
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(1.0, 12), "1");
        assert_eq!(sig(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(sig(-1234.5, 12), "-1234.5");
        assert_eq!(sig(1.5e-7, 12), "1.5e-7");
        assert_eq!(sig(9.9999999999999e11, 12), "1e12");
        assert_eq!(sig(123456.0, 3), "1.23e5");
        assert_eq!(sig(0.000123, 12), "0.000123");
        assert_eq!(sig(0.0, 12), "0");
    }

    #[test]
    fn csv_and_table() {
        let rows = vec![vec!["1".to_string(), "22".to_string()]];
        assert_eq!(render(&Format::Csv, &["a", "b"], &rows), "a,b\n1,22\n");
        assert_eq!(render(&Format::Table, &["a", "b"], &rows), "a   b\n1  22\n");
    }
}
