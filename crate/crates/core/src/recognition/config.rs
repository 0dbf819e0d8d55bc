use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use crate::text_model::{EntityLabel, Source};

/// Which pattern detectors run. `numeric` switches on the closed-class rule
/// that tags stand-alone numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorSet {
    pub email: bool,
    pub phone: bool,
    pub date: bool,
    pub time: bool,
    pub address: bool,
    pub numeric: bool,
}

impl DetectorSet {
    pub fn all() -> Self {
        Self {
            email: true,
            phone: true,
            date: true,
            time: true,
            address: true,
            numeric: true,
        }
    }

    pub fn none() -> Self {
        Self {
            email: false,
            phone: false,
            date: false,
            time: false,
            address: false,
            numeric: false,
        }
    }

    /// Enables a detector by its configuration name.
    pub fn enable(&mut self, name: &str) -> Result<(), String> {
        let flag = match name {
            "email" => &mut self.email,
            "phone" => &mut self.phone,
            "date" => &mut self.date,
            "time" => &mut self.time,
            "address" => &mut self.address,
            "numeric" => &mut self.numeric,
            other => return Err(format!("unknown detector `{other}`")),
        };
        *flag = true;
        Ok(())
    }
}

impl Default for DetectorSet {
    fn default() -> Self {
        Self::all()
    }
}

/// Where a lexicon's terms come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermSource {
    File(PathBuf),
    Terms(Vec<String>),
    /// A small list shipped with the crate.
    Bundled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggerConfig {
    /// Shell command line that starts the sidecar.
    pub command: String,
    pub timeout: Duration,
    pub batch_size: usize,
    pub processes: usize,
}

impl TaggerConfig {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            timeout: Duration::from_secs(30),
            batch_size: 32,
            processes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerConfig {
    pub detectors: DetectorSet,
    pub gazetteers: BTreeMap<EntityLabel, Vec<TermSource>>,
    pub pronouns: TermSource,
    pub tagger: Option<TaggerConfig>,
    /// Candidates scoring below their source's floor are dropped.
    pub score_floor: BTreeMap<Source, f64>,
    /// Highest priority first.
    pub priority: [Source; 4],
    /// When the tagger fails, continue with the rule layers instead of
    /// failing. Off unless explicitly requested.
    pub rules_only_fallback: bool,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            detectors: DetectorSet::all(),
            gazetteers: BTreeMap::new(),
            pronouns: TermSource::Bundled,
            tagger: None,
            score_floor: BTreeMap::new(),
            priority: [
                Source::Regex,
                Source::Tagger,
                Source::Gazetteer,
                Source::ClosedClass,
            ],
            rules_only_fallback: false,
        }
    }
}

impl RecognizerConfig {
    /// Default configuration plus the bundled name, place, occupation and
    /// organisation lists.
    pub fn with_bundled_gazetteers() -> Self {
        let mut cfg = Self::default();
        for label in super::gazetteer::BUNDLED_LABELS {
            cfg.gazetteers.insert(label, vec![TermSource::Bundled]);
        }
        cfg
    }

    pub fn add_gazetteer(&mut self, label: EntityLabel, source: TermSource) -> &mut Self {
        self.gazetteers.entry(label).or_default().push(source);
        self
    }

    pub fn floor(&self, source: Source) -> f64 {
        self.score_floor.get(&source).copied().unwrap_or(0.0)
    }

    /// Position of `source` in the priority order; lower wins.
    pub fn rank(&self, source: Source) -> usize {
        self.priority
            .iter()
            .position(|&s| s == source)
            .unwrap_or(self.priority.len())
    }

    pub fn validate(&self) -> Result<(), String> {
        for source in Source::ALL {
            if !self.priority.contains(&source) {
                return Err(format!(
                    "priority order must be a permutation of all sources; `{source}` is missing"
                ));
            }
        }
        for (source, floor) in &self.score_floor {
            if !(0.0..=1.0).contains(floor) {
                return Err(format!("score floor for `{source}` must lie in [0, 1], got {floor}"));
            }
        }
        for label in self.gazetteers.keys() {
            if *label == EntityLabel::Outside {
                return Err("a gazetteer cannot produce NONE".into());
            }
        }
        if let Some(tagger) = &self.tagger {
            if tagger.command.trim().is_empty() {
                return Err("tagger command is empty".into());
            }
            if tagger.batch_size == 0 {
                return Err("tagger batch size must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_priority_is_regex_tagger_gazetteer_closed_class() {
        let cfg = RecognizerConfig::default();
        assert!(cfg.validate().is_ok());
        assert!(cfg.rank(Source::Regex) < cfg.rank(Source::Tagger));
        assert!(cfg.rank(Source::Tagger) < cfg.rank(Source::Gazetteer));
        assert!(cfg.rank(Source::Gazetteer) < cfg.rank(Source::ClosedClass));
    }

    #[test]
    fn rejects_non_permutation_and_bad_floor() {
        let cfg = RecognizerConfig {
            priority: [Source::Regex, Source::Regex, Source::Gazetteer, Source::ClosedClass],
            ..RecognizerConfig::default()
        };
        assert!(cfg.validate().is_err());

        let mut cfg = RecognizerConfig::default();
        cfg.score_floor.insert(Source::Tagger, 1.5);
        assert!(cfg.validate().is_err());
    }
}
