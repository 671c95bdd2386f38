use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;

pub const DEFAULT_KN_PORT: u16 = 8002;

/// Service configuration, read from TOML. Relative paths resolve against the config
/// file's directory.
///
/// ```toml
/// port = 8002
/// knowledge_files = ["kn_part_1.jsonl", "kn_part_2.jsonl"]
/// bm25_index = "bm25.json"
/// text_index = "text.json"
/// image_index = "image.json"
/// image_table = "query_images.jsonl"
/// multimodal_index = "multimodal.json"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_host")]
    pub host: String,
    pub port: Option<u16>,
    #[serde(default)]
    pub knowledge_files: Vec<PathBuf>,
    pub bm25_index: Option<PathBuf>,
    pub text_index: Option<PathBuf>,
    pub image_index: Option<PathBuf>,
    /// Extra path → vector rows for query images that are not in the gallery.
    pub image_table: Option<PathBuf>,
    pub multimodal_index: Option<PathBuf>,
}

fn default_host() -> String {
    "127.0.0.1".into()
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let err = |message: String| ServiceError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut cfg: ServiceConfig = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative(base);
        }
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.knowledge_files.iter_mut().for_each(fix);
        for p in [
            &mut self.bm25_index,
            &mut self.text_index,
            &mut self.image_index,
            &mut self.image_table,
            &mut self.multimodal_index,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Applies `KN_PORT` and `KN_FILES` (colon-separated) on top of file values.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        if let Some(port) = lookup("KN_PORT") {
            let port = port
                .trim()
                .parse()
                .map_err(|_| ServiceError::Invalid(format!("KN_PORT is not a port number: `{port}`")))?;
            self.port = Some(port);
        }
        if let Some(files) = lookup("KN_FILES") {
            self.knowledge_files = files
                .split(':')
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .collect();
        }
        Ok(())
    }

    pub fn port(&self) -> u16 {
        self.port.unwrap_or(DEFAULT_KN_PORT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file_values() {
        let mut cfg = ServiceConfig {
            port: Some(9000),
            knowledge_files: vec!["a.jsonl".into()],
            ..Default::default()
        };
        cfg.apply_env(|k| match k {
            "KN_PORT" => Some("9002".into()),
            "KN_FILES" => Some("x/part_1.jsonl:y/part_2.jsonl".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.port(), 9002);
        assert_eq!(
            cfg.knowledge_files,
            [PathBuf::from("x/part_1.jsonl"), PathBuf::from("y/part_2.jsonl")]
        );
    }

    #[test]
    fn defaults_to_port_8002() {
        let mut cfg = ServiceConfig::default();
        cfg.apply_env(|_| None).unwrap();
        assert_eq!(cfg.port(), 8002);
        assert!(cfg.apply_env(|_| Some("nope".into())).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svc.toml");
        std::fs::write(&path, "knowledge_files = [\"kn.jsonl\"]\ntext_index = \"/abs/text.json\"\n").unwrap();
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.knowledge_files[0], dir.path().join("kn.jsonl"));
        assert_eq!(cfg.text_index.as_deref(), Some(Path::new("/abs/text.json")));
        assert_eq!(cfg.host, "127.0.0.1");
    }
}
