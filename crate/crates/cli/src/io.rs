//! Sample files, density arguments and output formatting.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use logconcave::{Density, Error, NamedDensity, PiecewiseLogLinearDensity};

/// Reads newline-separated decimal floats; blank lines and `#` comments are
/// skipped. `None` reads stdin.
pub fn read_sample(path: Option<&Path>) -> Result<Vec<f64>, Error> {
    let mut text = String::new();
    match path {
        Some(p) => text = std::fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
        None => {
            std::io::stdin().read_to_string(&mut text).map_err(|e| Error::Parse(format!("stdin: {e}")))?;
        }
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse(format!("line {}: {line:?} is not a number", i + 1)))?;
        if !v.is_finite() {
            return Err(Error::InvalidSample(format!("line {}: {line:?} is not finite", i + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

/// A named density such as `laplace:0,1`, or the path of a density JSON file.
pub fn load_density(arg: &str) -> Result<Box<dyn Density>, Error> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{arg}: {e}")))?;
        let d: PiecewiseLogLinearDensity = serde_json::from_str(&text)?;
        return Ok(Box::new(d));
    }
    Ok(Box::new(arg.parse::<NamedDensity>()?))
}

/// 17 significant digits, `inf`/`-inf`/`nan` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub struct Output {
    path: Option<PathBuf>,
}

impl Output {
    pub fn new(path: Option<PathBuf>) -> Self {
        Output { path }
    }

    pub fn write(&self, text: &str) -> Result<(), Error> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| Error::Parse(format!("{}: {e}", p.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| Error::Parse(format!("stdout: {e}")))
            }
        }
    }
}
