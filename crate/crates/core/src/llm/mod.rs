//! Parser and response backends: deterministic rules, and a chat-completion
//! client for OpenAI-compatible services.

mod client;
mod rules;
mod understand;

pub use client::{
    Attempt, ChatClient, ChatMessage, HttpRequest, HttpResponse, HttpTransport, RemoteBackend, StubBackend,
    Transport, TransportError,
};
pub use rules::{rule_parse, RuleBackend};
pub use understand::{format_understand_line, parse_understand_line};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    #[default]
    Rules,
    Remote,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub mode: BackendMode,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    3
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            mode: BackendMode::Rules,
            endpoint: None,
            model: None,
            temperature: 0.0,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            api_key_env: default_key_env(),
        }
    }
}

impl BackendConfig {
    pub fn remote(endpoint: &str, model: &str) -> Self {
        Self {
            mode: BackendMode::Remote,
            endpoint: Some(endpoint.to_string()),
            model: Some(model.to_string()),
            ..Self::default()
        }
    }

    pub fn stub() -> Self {
        Self {
            mode: BackendMode::Stub,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Parameter(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Parameter("timeout must be positive".into()));
        }
        if self.mode == BackendMode::Remote {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(Error::Parameter("remote backend requires an endpoint".into()));
            }
            if self.model.as_deref().is_none_or(str::is_empty) {
                return Err(Error::Parameter("remote backend requires a model".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuItem {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Menu {
    pub items: Vec<MenuItem>,
}

/// Case-folded, trimmed form used for menu matching.
pub fn normalize(s: &str) -> String {
    s.trim().to_lowercase().replace('’', "'")
}

impl Menu {
    pub fn new(items: Vec<MenuItem>) -> Result<Self> {
        let menu = Self { items };
        menu.validate()?;
        Ok(menu)
    }

    pub fn from_names(names: &[&str]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| MenuItem {
                    name: n.to_string(),
                    description: String::new(),
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for item in &self.items {
            let key = normalize(&item.name);
            if key.is_empty() {
                return Err(Error::Parameter("menu item with empty name".into()));
            }
            if !seen.insert(key) {
                return Err(Error::Parameter(format!("duplicate menu item {:?}", item.name)));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        let key = normalize(name);
        self.items.iter().any(|i| normalize(&i.name) == key)
    }

    /// Spoken summary of the menu.
    pub fn description(&self) -> String {
        if self.items.is_empty() {
            return "I'm sorry, nothing is available right now.".into();
        }
        let names: Vec<&str> = self.names().collect();
        let list = match names.len() {
            1 => names[0].to_string(),
            n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
        };
        let mut s = format!("We have {list}.");
        for item in self.items.iter().filter(|i| !i.description.is_empty()) {
            s.push(' ');
            s.push_str(&item.description);
        }
        s
    }
}

impl Default for Menu {
    fn default() -> Self {
        let item = |name: &str, description: &str| MenuItem {
            name: name.into(),
            description: description.into(),
        };
        Self {
            items: vec![
                item("cola", "Our cola is ice cold."),
                item("orange juice", "The orange juice is freshly squeezed."),
                item("apple juice", "The apple juice is made from local apples."),
                item("green tea", "The green tea is served warm."),
                item("cookies", "The cookies are baked every morning."),
                item("potato chips", "The potato chips are lightly salted."),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        BackendConfig::default().validate().unwrap();
        assert!(BackendConfig { mode: BackendMode::Remote, ..Default::default() }.validate().is_err());
        BackendConfig::remote("http://localhost:1", "m").validate().unwrap();
        let hot = BackendConfig { temperature: 2.5, ..Default::default() };
        assert!(hot.validate().is_err());
    }

    #[test]
    fn menu_names_unique_after_normalization() {
        assert!(Menu::from_names(&["Cola", " cola "]).is_err());
        let menu = Menu::from_names(&["cola", "juice"]).unwrap();
        assert!(menu.contains("COLA"));
        assert_eq!(menu.description(), "We have cola and juice.");
    }
}
