use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path as FsPath, PathBuf};

use clap::ValueEnum;
use cwsoc::io::{write_json, write_path2_csv, write_path_csv, write_table_csv};
use cwsoc::simulate::Path;
use cwsoc::Result;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One run directory: `out/<subcommand>/<label-or-timestamp>/`.
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    pub fn create(root: &FsPath, sub: &str, label: Option<&str>, format: Format) -> Result<Self> {
        let leaf = match label {
            Some(l) => l.to_string(),
            None => chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string(),
        };
        let dir = root.join(sub).join(leaf);
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, format })
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn echo(&self, text: &str) -> Result<()> {
        fs::write(self.dir.join("config.echo"), text)?;
        Ok(())
    }

    pub fn report<T: Serialize + ?Sized>(&self, value: &T) -> Result<()> {
        let mut f = self.file("report.json")?;
        write_json(&mut f, value)?;
        use std::io::Write;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn path(&self, stem: &str, p: &Path) -> Result<()> {
        match self.format {
            Format::Csv => write_path_csv(self.file(&format!("{stem}.csv"))?, p),
            Format::Json => write_json(self.file(&format!("{stem}.json"))?, &json!({ "t": p.times(), "x": p.values() })),
        }
    }

    pub fn path2(&self, stem: &str, p: &Path<(f64, f64)>) -> Result<()> {
        match self.format {
            Format::Csv => write_path2_csv(self.file(&format!("{stem}.csv"))?, p),
            Format::Json => {
                let (x, y): (Vec<f64>, Vec<f64>) = p.values().iter().copied().unzip();
                write_json(self.file(&format!("{stem}.json"))?, &json!({ "t": p.times(), "x": x, "y": y }))
            }
        }
    }

    pub fn table(&self, stem: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        match self.format {
            Format::Csv => write_table_csv(self.file(&format!("{stem}.csv"))?, header, rows),
            Format::Json => {
                let objs: Vec<serde_json::Map<String, serde_json::Value>> = rows
                    .iter()
                    .map(|r| header.iter().zip(r).map(|(h, v)| (h.to_string(), json!(v))).collect())
                    .collect();
                write_json(self.file(&format!("{stem}.json"))?, &objs)
            }
        }
    }
}
