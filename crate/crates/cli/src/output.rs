//! CSV rendering and the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// `printf("%.17g")`: 17 significant digits, trailing zeros stripped, exponent form
/// outside `[1e-4, 1e17)`. Round-trips every finite `f64`.
pub fn g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{v:.*}", (16 - exp) as usize);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV text with a header row; every cell is a number.
pub fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&v| g17(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `quantity,value` report.
pub fn report(rows: &[(&str, f64)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (name, value) in rows {
        let _ = writeln!(out, "{name},{}", g17(*value));
    }
    out
}

/// Files produced by a run. Nothing touches the disk until [`Outputs::commit`], so a
/// run that fails leaves no partial output behind.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Creates `dir` if needed and writes every file into it.
    pub fn commit(&self, dir: &Path) -> CliResult<()> {
        let io = |path: PathBuf| move |source| CliError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(io(path.clone()))?;
        }
        log::info!("wrote {} files to {}", self.files.len(), dir.display());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_g17() {
        assert_eq!(g17(0.1), "0.10000000000000001");
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(-2.5), "-2.5");
        assert_eq!(g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(g17(1e17), "1e+17");
        assert_eq!(g17(123456789.0), "123456789");
        assert_eq!(g17(6.25e-20), "6.2500000000000004e-20");
        assert_eq!(g17(0.0001), "0.0001");
        assert_eq!(g17(-0.0), "-0");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let text = csv(&["x", "y"], [[1.0, 0.5], [2.0, 0.25]]);
        assert_eq!(text, "x,y\n1,0.5\n2,0.25\n");
    }

    proptest! {
        #[test]
        fn g17_round_trips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            prop_assert_eq!(g17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
