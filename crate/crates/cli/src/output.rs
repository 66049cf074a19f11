//! Output directory handling and CSV writing.
//!
//! Floats are written as `{:.16e}` (17 significant digits) and missing values
//! as empty fields. Quoting is left to the `csv` writer.

use std::fs;
use std::path::{Path, PathBuf};

use floquet_lattice::C64;

use crate::error::CliError;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn render<I>(header: &[&str], rows: I) -> Result<Vec<u8>, csv::Error>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub struct OutputDir {
    path: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    /// Creates the directory, refusing to reuse a non-empty one unless `force`.
    pub fn prepare(path: &Path, force: bool) -> Result<Self, CliError> {
        if path.exists() {
            let mut entries = fs::read_dir(path).map_err(|e| CliError::io(path, e))?;
            if entries.next().is_some() && !force {
                return Err(CliError::Collision(path.to_path_buf()));
            }
        } else {
            fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let target = self.path.join(name);
        fs::write(&target, contents).map_err(|e| CliError::io(&target, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let bytes = render(header, rows).map_err(|e| CliError::io(self.path.join(name), e.into()))?;
        self.write(name, bytes)
    }
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "n", "re", "im", "abs2"];
pub const SUMMARY_HEADER: [&str; 3] = ["t", "norm", "P"];

/// One row per stored sample and site.
pub fn trajectory_rows<'a>(times: &'a [f64], states: &'a [Vec<C64>], labels: &'a [i64]) -> impl Iterator<Item = Vec<String>> + 'a {
    times.iter().zip(states).flat_map(move |(t, state)| {
        state
            .iter()
            .zip(labels)
            .map(move |(z, n)| vec![float(*t), n.to_string(), float(z.re), float(z.im), float(z.norm_sqr())])
    })
}

pub fn summary_rows<'a>(times: &'a [f64], norms: &'a [f64], leak: &'a [f64]) -> impl Iterator<Item = Vec<String>> + 'a {
    times
        .iter()
        .zip(norms)
        .zip(leak)
        .map(|((t, n), p)| vec![float(*t), float(*n), float(*p)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(float(2.4308), "2.4308000000000001e0");
        assert_eq!(float(-0.0), "-0.0000000000000000e0");
        assert_eq!(opt_float(None), "");
        let bytes = render(&["a", "b"], [vec!["x, \"y\"".to_string(), String::new()]]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,b\n\"x, \"\"y\"\"\",\n");
    }

    #[test]
    fn trajectory_layout() {
        let state = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.5)];
        let rows: Vec<_> = trajectory_rows(&[0.0, 1.0], &[state.clone(), state], &[-1, 1]).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3][1], "1");
        assert_eq!(rows[3][4], float(0.25));
    }

    #[test]
    fn collision_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::prepare(dir.path(), false).unwrap();
        out.csv("x.csv", &["a", "b"], [vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("x.csv")).unwrap(), "a,b\n1,2\n");
        assert!(matches!(OutputDir::prepare(dir.path(), false), Err(CliError::Collision(_))));
        assert!(OutputDir::prepare(dir.path(), true).is_ok());
        let nested = dir.path().join("new/sub");
        OutputDir::prepare(&nested, false).unwrap();
        assert!(nested.is_dir());
    }
}
