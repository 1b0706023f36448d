//! Configuration assembly: defaults, then the JSON config file, then
//! flags and `EVREWARD_*` environment variables.

use std::path::Path;
use std::sync::Arc;

use evidence_reward::backend::{HttpBackend, MockBackend, MockFixtures, Scorer, ScorerBackend};
use evidence_reward::{Domain, EngineConfig};
use serde_json::{json, Map, Value};

use crate::error::CliError;

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub domain: Option<Domain>,
    pub backend_url: Option<String>,
    pub bearer_token: Option<String>,
    pub mock: bool,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub group_size: Option<usize>,
    pub strict: bool,
}

impl Overrides {
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        let mut backend = Map::new();
        if let Some(d) = self.domain {
            root.insert("domain".into(), json!(d));
        }
        if let Some(url) = &self.backend_url {
            backend.insert("url".into(), json!(url));
            backend.insert("mock".into(), json!(false));
        }
        if let Some(t) = &self.bearer_token {
            backend.insert("bearer_token".into(), json!(t));
        }
        if self.mock {
            backend.insert("mock".into(), json!(true));
        }
        if let Some(s) = self.seed {
            root.insert("bootstrap".into(), json!({ "seed": s }));
        }
        if let Some(k) = self.k {
            root.insert("top_k".into(), json!(k));
        }
        if let Some(t) = self.tau {
            root.insert("tau".into(), json!(t));
        }
        if let Some(g) = self.group_size {
            root.insert("group_size".into(), json!(g));
        }
        if self.strict {
            root.insert("strict_parse".into(), json!(true));
        }
        if !backend.is_empty() {
            root.insert("backend".into(), Value::Object(backend));
        }
        Value::Object(root)
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<EngineConfig, CliError> {
    let base = match path {
        Some(p) => EngineConfig::from_json(&read_text(p)?)
            .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        None => EngineConfig::default(),
    };
    Ok(base.merged(&overrides.to_json())?)
}

/// The configured backend: the in-process mock, or the HTTP backend whose
/// manifest is fetched once up front.
pub fn build_backend(cfg: &EngineConfig) -> Result<Arc<dyn ScorerBackend>, CliError> {
    let b = &cfg.backend;
    if b.mock {
        let mut mock = MockBackend::new(b.mock_seed);
        if let Some(path) = &b.mock_fixtures {
            let text = read_text(Path::new(path))?;
            let fixtures: MockFixtures =
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("{path}: {e}")))?;
            mock = mock.with_fixtures(fixtures);
        }
        return Ok(Arc::new(mock));
    }
    match &b.url {
        Some(url) => {
            let http = HttpBackend::new(url)
                .with_bearer_token(b.bearer_token.clone())
                .with_manifest()
                .map_err(|e| CliError::Backend(e.to_string()))?;
            Ok(Arc::new(http))
        }
        None => Err(CliError::input("no backend configured: pass --mock or --backend-url")),
    }
}

pub fn build_scorer(cfg: &EngineConfig) -> Result<Scorer, CliError> {
    Ok(Scorer::new(build_backend(cfg)?).with_options(cfg.backend.client_options()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"tau": 0.7, "top_k": 5, "bootstrap": {{"resamples": 10}}}}"#).unwrap();
        let o = Overrides {
            k: Some(2),
            seed: Some(9),
            mock: true,
            ..Overrides::default()
        };
        let cfg = load_config(Some(f.path()), &o).unwrap();
        assert_eq!(cfg.tau, 0.7);
        assert_eq!(cfg.top_k, 2);
        assert_eq!(cfg.bootstrap.resamples, 10);
        assert_eq!(cfg.bootstrap.seed, 9);
        assert_eq!(cfg.group_size, 8);
        assert!(cfg.backend.mock);
    }

    #[test]
    fn unknown_keys_and_missing_backend() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"tua": 0.7}}"#).unwrap();
        assert_eq!(load_config(Some(f.path()), &Overrides::default()).unwrap_err().exit_code(), 2);
        let cfg = load_config(None, &Overrides::default()).unwrap();
        assert_eq!(build_scorer(&cfg).unwrap_err().exit_code(), 2);
    }
}
