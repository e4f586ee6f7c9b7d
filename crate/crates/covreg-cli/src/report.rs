//! Artifact emission: every numeric value is serialized with 17 significant
//! digits so that reruns are byte-comparable.

use std::io::{self, Write};

/// 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

/// Shorter rendering for stdout tables.
pub fn fmt_display(v: f64) -> String {
    format!("{v:.4}")
}

pub fn fmt_display_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), fmt_display)
}

/// serde_json formatter that pins floats to 17 significant digits.
pub struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.7e}")
    }
}

/// Serialize as JSON with the pinned float format and a trailing newline.
pub fn to_json_pinned<T: serde::Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    out.push(b'\n');
    Ok(out)
}

/// `# key = value` comment header lines from a resolved configuration.
pub fn config_header(entries: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s
}
