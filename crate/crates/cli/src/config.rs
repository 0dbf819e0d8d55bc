//! Run configuration: a TOML file whose values command-line flags override.
//! Relative paths in the file resolve against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use veil_core::recognition::{
    load_terms, DetectorSet, RecognizerConfig, TaggerConfig, TermSource, BUNDLED_LABELS,
};
use veil_core::text_model::{EntityLabel, Source};
use veil_core::{AnonymizationMode, ModeKind, PlaceholderStyle};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<ModeKind>,
    pub style: Option<PlaceholderStyle>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub case_sensitive: Option<bool>,
    pub numeric_indexed: Option<bool>,
    /// Keep going with rule layers when the tagger fails.
    pub fallback_to_rules: Option<bool>,
    pub threshold: Option<f64>,
    #[serde(default)]
    pub recognizer: RecognizerSection,
    pub tagger: Option<TaggerSection>,
    /// Label name to lexicon file for random substitution.
    #[serde(default)]
    pub substitution: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecognizerSection {
    pub detectors: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub bundled_gazetteers: bool,
    /// Label name to gazetteer files.
    #[serde(default)]
    pub gazetteers: BTreeMap<String, Vec<PathBuf>>,
    pub pronouns: Option<PathBuf>,
    /// Source name to minimum score.
    #[serde(default)]
    pub score_floor: BTreeMap<String, f64>,
    pub priority: Option<Vec<String>>,
}

impl Default for RecognizerSection {
    fn default() -> Self {
        Self {
            detectors: None,
            bundled_gazetteers: true,
            gazetteers: BTreeMap::new(),
            pronouns: None,
            score_floor: BTreeMap::new(),
            priority: None,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaggerSection {
    pub command: String,
    pub timeout_secs: Option<f64>,
    pub batch_size: Option<usize>,
    pub processes: Option<usize>,
}

/// Settings shared by every command, after merging file and flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<ModeKind>,
    pub style: Option<PlaceholderStyle>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub rules_only: bool,
    pub fallback: bool,
    pub tagger_cmd: Option<String>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub mode: ModeKind,
    pub style: PlaceholderStyle,
    pub seed: u64,
    pub jobs: usize,
    pub case_sensitive: bool,
    pub numeric_indexed: bool,
    pub threshold: Option<f64>,
    pub recognizer: RecognizerConfig,
    pub substitution: BTreeMap<EntityLabel, PathBuf>,
}

impl Settings {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let (file, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                let file: FileConfig =
                    toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        Self::merge(file, &base, flags)
    }

    fn merge(file: FileConfig, base: &Path, flags: &Overrides) -> Result<Self> {
        let resolve = |p: &Path| -> Result<PathBuf> {
            let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            if !full.exists() {
                bail!("configured path {} does not exist", full.display());
            }
            Ok(full)
        };

        let mut recognizer = if file.recognizer.bundled_gazetteers {
            RecognizerConfig::with_bundled_gazetteers()
        } else {
            RecognizerConfig::default()
        };
        if let Some(names) = &file.recognizer.detectors {
            let mut set = DetectorSet::none();
            for name in names {
                set.enable(name).map_err(anyhow::Error::msg)?;
            }
            recognizer.detectors = set;
        }
        for (label, paths) in &file.recognizer.gazetteers {
            let label = parse_label(label)?;
            for p in paths {
                recognizer.add_gazetteer(label, TermSource::File(resolve(p)?));
            }
        }
        if let Some(p) = &file.recognizer.pronouns {
            recognizer.pronouns = TermSource::File(resolve(p)?);
        }
        for (source, floor) in &file.recognizer.score_floor {
            let source: Source = source.parse().map_err(anyhow::Error::msg)?;
            recognizer.score_floor.insert(source, *floor);
        }
        if let Some(order) = &file.recognizer.priority {
            let parsed: Vec<Source> = order
                .iter()
                .map(|s| s.parse::<Source>().map_err(anyhow::Error::msg))
                .collect::<Result<_>>()?;
            recognizer.priority = parsed
                .try_into()
                .map_err(|_| anyhow::anyhow!("priority must list exactly four sources"))?;
        }

        let mut tagger = file.tagger.map(|t| {
            let mut cfg = TaggerConfig::new(t.command);
            if let Some(secs) = t.timeout_secs {
                cfg.timeout = Duration::from_secs_f64(secs);
            }
            if let Some(n) = t.batch_size {
                cfg.batch_size = n;
            }
            if let Some(n) = t.processes {
                cfg.processes = n;
            }
            cfg
        });
        if let Some(cmd) = &flags.tagger_cmd {
            match &mut tagger {
                Some(t) => t.command = cmd.clone(),
                None => tagger = Some(TaggerConfig::new(cmd.clone())),
            }
        }
        if flags.rules_only {
            tagger = None;
        }
        recognizer.tagger = tagger;
        recognizer.rules_only_fallback = flags.fallback || file.fallback_to_rules.unwrap_or(false);
        recognizer.validate().map_err(anyhow::Error::msg)?;

        let mut substitution = BTreeMap::new();
        for (label, p) in &file.substitution {
            substitution.insert(parse_label(label)?, resolve(p)?);
        }

        let jobs = flags.jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            bail!("jobs must be at least 1");
        }
        let threshold = flags.threshold.or(file.threshold);
        if let Some(t) = threshold {
            if !(0.0..=1.0).contains(&t) {
                bail!("threshold must lie in [0, 1], got {t}");
            }
        }
        Ok(Self {
            mode: flags.mode.or(file.mode).unwrap_or(ModeKind::Tagging),
            style: flags.style.or(file.style).unwrap_or_default(),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            jobs,
            case_sensitive: file.case_sensitive.unwrap_or(false),
            numeric_indexed: file.numeric_indexed.unwrap_or(true),
            threshold,
            recognizer,
            substitution,
        })
    }

    /// Mode for the document at `position` in the input. Substitution seeds
    /// differ per document but depend only on the run seed and position.
    pub fn mode_for(&self, lexicons: &BTreeMap<EntityLabel, Vec<String>>, position: usize) -> AnonymizationMode {
        let mut mode = match self.mode {
            ModeKind::Tagging => AnonymizationMode::tagging(),
            ModeKind::Suppression => AnonymizationMode::suppression(),
            ModeKind::RandomSubstitution => {
                let seed = self.seed ^ (position as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                AnonymizationMode::random_substitution(seed, lexicons.clone())
            }
        };
        mode.style = self.style;
        mode.case_sensitive = self.case_sensitive;
        mode.numeric_indexed = self.numeric_indexed;
        mode
    }

    /// Substitution lexicons: configured files, else the bundled lists.
    pub fn lexicons(&self) -> Result<BTreeMap<EntityLabel, Vec<String>>> {
        let mut out = BTreeMap::new();
        if self.mode != ModeKind::RandomSubstitution {
            return Ok(out);
        }
        for label in BUNDLED_LABELS.into_iter().chain([EntityLabel::Pronoun]) {
            out.insert(label, load_terms(&TermSource::Bundled, label)?);
        }
        for (label, path) in &self.substitution {
            out.insert(*label, load_terms(&TermSource::File(path.clone()), *label)?);
        }
        Ok(out)
    }
}

fn parse_label(name: &str) -> Result<EntityLabel> {
    name.parse::<EntityLabel>().map_err(|e| anyhow::anyhow!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merged(toml_text: &str, flags: &Overrides) -> Result<Settings> {
        let file: FileConfig = toml::from_str(toml_text)?;
        Settings::merge(file, Path::new("."), flags)
    }

    #[test]
    fn flags_override_file() {
        let flags = Overrides {
            seed: Some(9),
            style: Some(PlaceholderStyle::Uppercase),
            ..Default::default()
        };
        let s = merged("mode = \"suppression\"\nseed = 3\njobs = 4\n", &flags).unwrap();
        assert_eq!(s.mode, ModeKind::Suppression);
        assert_eq!(s.seed, 9);
        assert_eq!(s.jobs, 4);
        assert_eq!(s.style, PlaceholderStyle::Uppercase);
    }

    #[test]
    fn rules_only_drops_configured_tagger() {
        let text = "[tagger]\ncommand = \"my-tagger\"\n";
        assert!(merged(text, &Overrides::default()).unwrap().recognizer.tagger.is_some());
        let flags = Overrides {
            rules_only: true,
            ..Default::default()
        };
        assert!(merged(text, &flags).unwrap().recognizer.tagger.is_none());
    }

    #[test]
    fn rejects_unknown_keys_and_missing_paths() {
        assert!(merged("colour = 1\n", &Overrides::default()).is_err());
        assert!(merged("[recognizer]\npronouns = \"nope/absent.txt\"\n", &Overrides::default()).is_err());
        assert!(merged("[recognizer]\ndetectors = [\"fax\"]\n", &Overrides::default()).is_err());
    }

    #[test]
    fn detector_list_replaces_defaults() {
        let s = merged("[recognizer]\ndetectors = [\"email\"]\n", &Overrides::default()).unwrap();
        assert!(s.recognizer.detectors.email);
        assert!(!s.recognizer.detectors.numeric);
    }
}
