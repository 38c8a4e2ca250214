//! Run settings: built-in defaults, then a `key = value` config file, then
//! command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lrme::pipeline::{SpaceConfig, DEFAULT_K, DEFAULT_T};
use lrme::solver::DEFAULT_MAX_M;
use lrme::{Mode, Transform};
use serde::Deserialize;

/// Contents of a config file. Every key is optional.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub transform: Option<String>,
    pub svd: Option<String>,
    pub mode: Option<String>,
    pub provider: Option<String>,
    pub seed: Option<u64>,
    pub pmi_window: Option<usize>,
    pub max_m: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        ConfigFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Where attributional similarities come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderBase {
    Pos,
    PmiIr,
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderSpec {
    pub base: ProviderBase,
    /// Add the part-of-speech similarity on top of `base`.
    pub plus_pos: bool,
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<ProviderSpec, String> {
        let (head, plus_pos) = match s.strip_suffix("+pos") {
            Some(head) if !head.is_empty() => (head, true),
            _ => (s, false),
        };
        let base = match head {
            "pos" => ProviderBase::Pos,
            "pmi-ir" => ProviderBase::PmiIr,
            _ => match head.strip_prefix("external:") {
                Some(path) if !path.is_empty() => ProviderBase::External(PathBuf::from(path)),
                _ => {
                    return Err(format!(
                        "unknown provider {s:?} (expected pos, pmi-ir or external:PATH, optionally followed by +pos)"
                    ))
                }
            },
        };
        Ok(ProviderSpec { base, plus_pos })
    }
}

/// `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let number = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad number {v:?} in {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values: Vec<usize> = match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (number(start)?, number(end)?, number(step)?);
            if step == 0 || end < start {
                return Err(format!("empty range {s:?}"));
            }
            (start..=end).step_by(step).collect()
        }
        [list] => list.split(',').map(number).collect::<Result<_, _>>()?,
        _ => return Err(format!("bad range {s:?} (expected start:end:step or a,b,c)")),
    };
    if values.contains(&0) {
        return Err(format!("range {s:?} contains 0"));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub corpus_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub k: usize,
    pub t: usize,
    pub transform: Transform,
    pub svd: bool,
    pub mode: Mode,
    pub provider: Option<ProviderSpec>,
    pub seed: u64,
    pub pmi_window: usize,
    pub max_m: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            corpus_dir: None,
            cache_dir: None,
            k: DEFAULT_K,
            t: DEFAULT_T,
            transform: Transform::Ppmic,
            svd: true,
            mode: Mode::Relational,
            provider: None,
            seed: 0,
            pmi_window: lrme::attributional::DEFAULT_PMI_WINDOW,
            max_m: DEFAULT_MAX_M,
        }
    }
}

fn parse_svd(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("svd must be on or off, got {other:?}")),
    }
}

impl Settings {
    pub fn apply_file(&mut self, file: ConfigFile) -> Result<(), String> {
        if file.corpus_dir.is_some() {
            self.corpus_dir = file.corpus_dir;
        }
        if file.cache_dir.is_some() {
            self.cache_dir = file.cache_dir;
        }
        self.k = file.k.unwrap_or(self.k);
        self.t = file.t.unwrap_or(self.t);
        if let Some(v) = file.transform {
            self.transform = v.parse().map_err(|e| format!("{e}"))?;
        }
        if let Some(v) = file.svd {
            self.svd = parse_svd(&v)?;
        }
        if let Some(v) = file.mode {
            self.mode = v.parse()?;
        }
        if let Some(v) = file.provider {
            self.provider = Some(v.parse()?);
        }
        self.seed = file.seed.unwrap_or(self.seed);
        self.pmi_window = file.pmi_window.unwrap_or(self.pmi_window);
        self.max_m = file.max_m.unwrap_or(self.max_m);
        self.check()
    }

    pub fn check(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.t == 0 {
            return Err("t must be at least 1".into());
        }
        if self.pmi_window == 0 {
            return Err("pmi window must be at least 1".into());
        }
        Ok(())
    }

    pub fn space(&self) -> SpaceConfig {
        SpaceConfig {
            t: self.t,
            k: self.svd.then_some(self.k),
            transform: self.transform,
        }
    }

    /// The provider to use, defaulting to part-of-speech similarity.
    pub fn provider_or_default(&self) -> ProviderSpec {
        self.provider.clone().unwrap_or(ProviderSpec {
            base: ProviderBase::Pos,
            plus_pos: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_baseline() {
        let s = Settings::default();
        assert_eq!((s.k, s.t, s.transform, s.svd, s.seed), (300, 20, Transform::Ppmic, true, 0));
        assert_eq!(s.space(), SpaceConfig::default());
    }

    #[test]
    fn file_overrides_defaults() {
        let file = ConfigFile::parse("k = 50\nsvd = \"off\"\nmode = \"hybrid-add\"\nprovider = \"pmi-ir+pos\"\nseed = 4\n").unwrap();
        let mut s = Settings::default();
        s.apply_file(file).unwrap();
        assert_eq!(s.k, 50);
        assert!(!s.svd);
        assert_eq!(s.mode, Mode::HybridAdd);
        assert_eq!(s.provider, Some(ProviderSpec { base: ProviderBase::PmiIr, plus_pos: true }));
        assert_eq!(s.seed, 4);
        assert_eq!(s.space().k, None);
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(ConfigFile::parse("colour = 3").is_err());
        let mut s = Settings::default();
        assert!(s.apply_file(ConfigFile::parse("svd = \"maybe\"").unwrap()).is_err());
        assert!(s.apply_file(ConfigFile::parse("t = 0").unwrap()).is_err());
    }

    #[test]
    fn provider_specs() {
        assert_eq!("pos".parse::<ProviderSpec>().unwrap().base, ProviderBase::Pos);
        let ext: ProviderSpec = "external:/tmp/hso.tsv+pos".parse().unwrap();
        assert_eq!(ext.base, ProviderBase::External("/tmp/hso.tsv".into()));
        assert!(ext.plus_pos);
        assert!("wordnet".parse::<ProviderSpec>().is_err());
        assert!("external:".parse::<ProviderSpec>().is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("50:400:50").unwrap().len(), 8);
        assert_eq!(parse_range("5:40:5").unwrap(), vec![5, 10, 15, 20, 25, 30, 35, 40]);
        assert_eq!(parse_range("10,20").unwrap(), vec![10, 20]);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("0:10:5").is_err());
        assert!(parse_range("5:1:1").is_err());
    }
}
