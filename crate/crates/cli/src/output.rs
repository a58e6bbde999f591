use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fdmx::plots::{render_svg, FigureSpec, Theme};
use serde::Serialize;

use crate::error::CliError;

/// Output directory that remembers what it wrote, for the manifest.
pub struct RunDir {
    root: PathBuf,
    files: BTreeMap<String, usize>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    files: Vec<ManifestEntry<'a>>,
    warnings: &'a [String],
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Output { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf(), files: BTreeMap::new(), warnings: Vec::new() })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, content).map_err(|source| CliError::Output { path, source })?;
        self.files.insert(name.to_string(), content.len());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = fdmx::numeric::to_json_string(value).map_err(|e| CliError::Invariant(format!("{name}: {e}")))?;
        self.write(name, &text)
    }

    /// Writes `<stem>.svg` and its `<stem>.json` twin.
    pub fn write_figure(&mut self, stem: &str, spec: &FigureSpec, theme: &Theme) -> Result<(), CliError> {
        let doc = render_svg(spec, theme);
        self.warnings.extend(doc.warnings.iter().map(|w| format!("{stem}.svg: {w}")));
        self.write(&format!("{stem}.svg"), &doc.content)?;
        let json = spec.to_json().map_err(|e| CliError::Invariant(format!("{stem}.json: {e}")))?;
        self.write(&format!("{stem}.json"), &json)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `manifest.json` listing every other file written.
    pub fn finish(mut self, command: &str) -> Result<usize, CliError> {
        let files = self.files.iter().map(|(path, &bytes)| ManifestEntry { path, bytes }).collect();
        let manifest = Manifest { command, files, warnings: &self.warnings };
        let text = fdmx::numeric::to_json_string(&manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
        self.write("manifest.json", &text)?;
        Ok(self.files.len())
    }
}
