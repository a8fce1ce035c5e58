use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use thiserror::Error;

use super::file::{parse_scheme, SchemeFileError};
use super::Scheme;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown scheme {0:?}")]
    Unknown(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: SchemeFileError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const BUILTIN_FILES: [(&str, &str); 7] = [
    ("bwrrk33.toml", include_str!("../../schemes/bwrrk33.toml")),
    ("tsrkf84.toml", include_str!("../../schemes/tsrkf84.toml")),
    ("yrk135.toml", include_str!("../../schemes/yrk135.toml")),
    ("luscher33.toml", include_str!("../../schemes/luscher33.toml")),
    ("ralston3.toml", include_str!("../../schemes/ralston3.toml")),
    ("ralston4.toml", include_str!("../../schemes/ralston4.toml")),
    ("butcher65.toml", include_str!("../../schemes/butcher65.toml")),
];

static BUILTIN: LazyLock<Registry> = LazyLock::new(|| {
    let mut reg = Registry {
        schemes: BTreeMap::new(),
    };
    for (file, text) in BUILTIN_FILES {
        let scheme = parse_scheme(text)
            .unwrap_or_else(|e| panic!("built-in scheme file {file} is invalid: {e}"));
        reg.insert(scheme);
    }
    reg
});

/// Named coefficient schemes. Names are matched case-insensitively.
#[derive(Debug, Clone)]
pub struct Registry {
    schemes: BTreeMap<String, Scheme>,
}

impl Registry {
    /// The schemes shipped with the crate.
    pub fn builtin() -> &'static Registry {
        &BUILTIN
    }

    /// Built-ins plus every `*.toml` file in `dir`; files override built-ins
    /// of the same name.
    pub fn with_dir(dir: impl AsRef<Path>) -> Result<Registry, RegistryError> {
        let dir = dir.as_ref();
        let mut reg = BUILTIN.clone();
        let io = |source| RegistryError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            reg.insert(load_file(&path)?);
        }
        Ok(reg)
    }

    pub fn insert(&mut self, scheme: Scheme) {
        self.schemes.insert(scheme.name().to_ascii_uppercase(), scheme);
    }

    pub fn lookup(&self, name: &str) -> Result<&Scheme, RegistryError> {
        self.schemes
            .get(&name.to_ascii_uppercase())
            .ok_or_else(|| RegistryError::Unknown(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Scheme> {
        self.schemes.values()
    }

    /// Schemes stored in 2N form, in name order.
    pub fn two_n_schemes(&self) -> impl Iterator<Item = &Scheme> {
        self.iter().filter(|s| matches!(s, Scheme::TwoN(_)))
    }
}

/// Reads a single coefficient file.
pub fn load_file(path: &Path) -> Result<Scheme, RegistryError> {
    let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scheme(&text).map_err(|source| RegistryError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Looks `name` up in the built-in registry.
pub fn registry_lookup(name: &str) -> Result<Scheme, RegistryError> {
    Registry::builtin().lookup(name).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let names: Vec<&str> = Registry::builtin().iter().map(|s| s.name()).collect();
        assert_eq!(
            names,
            ["BUTCHER65", "BWRRK33", "LUSCHER33", "RALSTON3", "RALSTON4", "TSRKF84", "YRK135"]
        );
    }

    #[test]
    fn bwrrk33_entry() {
        let Scheme::TwoN(s) = registry_lookup("BWRRK33").unwrap() else {
            panic!("BWRRK33 should be stored in 2N form")
        };
        assert_eq!(s.stages(), 3);
        assert_eq!(s.declared_order(), 3);
        assert_eq!(s.a()[1], -0.637694471842202);
    }

    #[test]
    fn yrk135_entry() {
        let Scheme::TwoN(s) = registry_lookup("yrk135").unwrap() else {
            panic!("YRK135 should be stored in 2N form")
        };
        assert_eq!(s.stages(), 13);
        assert_eq!(s.declared_order(), 5);
        assert_eq!(s.b()[0], 0.069632640247059393);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(registry_lookup("NOSUCH"), Err(RegistryError::Unknown(_))));
    }
}
