//! Run configuration, read from a TOML file.
//!
//! Every field has a default, so an empty file (or no file) gives the
//! standard run at `a = 2, b = 1, γ = 3`, seed 7.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qannulus::{BetaFunction, EventuallyConstant, WeightParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub params: ParamsSection,
    pub beta: BetaSection,
    pub sweep: SweepSection,
    pub decay: DecaySection,
    pub spectrum: SpectrumSection,
    pub kernels: KernelsSection,
    pub output: OutputSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            params: ParamsSection::default(),
            beta: BetaSection::default(),
            sweep: SweepSection::default(),
            decay: DecaySection::default(),
            spectrum: SpectrumSection::default(),
            kernels: KernelsSection::default(),
            output: OutputSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self { a: 2.0, b: 1.0, gamma: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaVariant {
    /// `β(l) = l + ½`.
    Canonical,
    /// `l + ½ + amplitude·sin(l)` on `|l| ≤ half_width`.
    Sine,
    /// `slope·l + offset(l)` with offsets read from `table`.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSection {
    pub variant: BetaVariant,
    pub amplitude: f64,
    pub half_width: i64,
    pub slope: f64,
    /// CSV with header `l,offset`; consecutive sites, the first and last
    /// offsets extend to the tails.
    pub table: Option<PathBuf>,
}

impl Default for BetaSection {
    fn default() -> Self {
        Self { variant: BetaVariant::Canonical, amplitude: 0.3, half_width: 8, slope: 1.0, table: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Largest `n` of the `q_n(l)` suite.
    pub n_max: i64,
    pub m_max: i64,
    pub j_max: i64,
    pub jn_n_max: i64,
    pub jn_j_max: i64,
    pub roundtrip_modes: i64,
    pub roundtrip_samples: usize,
    pub roundtrip_width: usize,
    pub identity_samples: usize,
    pub tolerance: f64,
    pub covariance_tolerance: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_max: 40,
            m_max: 20,
            j_max: 20,
            jn_n_max: 15,
            jn_j_max: 20,
            roundtrip_modes: 10,
            roundtrip_samples: 100,
            roundtrip_width: 12,
            identity_samples: 50,
            tolerance: 1e-10,
            covariance_tolerance: 1e-12,
        }
    }
}

/// Truncation window: `"auto"` or a fixed half width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSetting {
    Fixed(i64),
    Named(AutoWindow),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWindow {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub n_min: i64,
    pub n_max: i64,
    pub window: WindowSetting,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { n_min: -25, n_max: 25, window: WindowSetting::Named(AutoWindow::Auto) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Half widths of the site windows `[−W, W]`.
    pub windows: Vec<i64>,
    /// Modes `|n| ≤ modes`.
    pub modes: i64,
    /// Singular values compared across windows.
    pub top_k: usize,
    pub stabilization_tolerance: f64,
    pub dirac_tolerance: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { windows: vec![40, 60, 80], modes: 15, top_k: 50, stabilization_tolerance: 1e-3, dirac_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsSection {
    pub n_min: i64,
    pub n_max: i64,
    pub l_min: i64,
    pub l_max: i64,
}

impl Default for KernelsSection {
    fn default() -> Self {
        Self { n_min: -3, n_max: 3, l_min: -10, l_max: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("qannulus-out") }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::parse(&text, &base).with_context(|| format!("in {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        self.weight_params()?;
        let s = &self.sweep;
        for (name, v) in [
            ("sweep.n_max", s.n_max),
            ("sweep.m_max", s.m_max),
            ("sweep.j_max", s.j_max),
            ("sweep.jn_n_max", s.jn_n_max),
            ("sweep.jn_j_max", s.jn_j_max),
            ("sweep.roundtrip_modes", s.roundtrip_modes),
        ] {
            if v < 0 {
                bail!("config field {name} must be nonnegative, got {v}");
            }
        }
        if s.n_max < 1 {
            bail!("config field sweep.n_max must be at least 1, got {}", s.n_max);
        }
        if s.roundtrip_width == 0 {
            bail!("config field sweep.roundtrip_width must be positive");
        }
        for (name, v) in [("sweep.tolerance", s.tolerance), ("sweep.covariance_tolerance", s.covariance_tolerance)] {
            if !(v.is_finite() && v > 0.0) {
                bail!("config field {name} must be a positive number, got {v}");
            }
        }
        if let WindowSetting::Fixed(w) = self.decay.window {
            if w < 1 {
                bail!("config field decay.window must be \"auto\" or a positive half width, got {w}");
            }
        }
        if self.spectrum.windows.iter().any(|&w| w < 0) {
            bail!("config field spectrum.windows entries must be nonnegative");
        }
        if self.spectrum.modes < 0 {
            bail!("config field spectrum.modes must be nonnegative");
        }
        if self.kernels.l_min > self.kernels.l_max {
            bail!("config field kernels.l_min must not exceed kernels.l_max");
        }
        if self.beta.variant == BetaVariant::Table && self.beta.table.is_none() {
            bail!("config field beta.table is required for variant = \"table\"");
        }
        Ok(())
    }

    pub fn weight_params(&self) -> Result<WeightParams> {
        let p = &self.params;
        WeightParams::new(p.a, p.b, p.gamma).map_err(|e| anyhow::anyhow!("config section params: {e}"))
    }

    pub fn beta(&self) -> Result<BetaFunction> {
        let b = &self.beta;
        match b.variant {
            BetaVariant::Canonical => Ok(BetaFunction::canonical()),
            BetaVariant::Sine => qannulus::sample::sine_beta(b.amplitude, b.half_width)
                .map_err(|e| anyhow::anyhow!("config section beta: {e}")),
            BetaVariant::Table => {
                let rel = b.table.as_ref().expect("validated");
                let path = self.base_dir.join(rel);
                let text =
                    std::fs::read_to_string(&path).with_context(|| format!("reading beta table {}", path.display()))?;
                let table = parse_beta_table(&text).with_context(|| format!("in beta table {}", path.display()))?;
                BetaFunction::perturbed(b.slope, table).map_err(|e| anyhow::anyhow!("config section beta: {e}"))
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output.dir)
    }
}

/// Reads `l,offset` rows with a header; the sites must be consecutive.
pub fn parse_beta_table(text: &str) -> Result<EventuallyConstant<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, s)| !s.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "l,offset" => {}
        _ => bail!("beta table must start with the header `l,offset`"),
    }
    let mut start = None;
    let mut values = Vec::new();
    for (i, line) in lines {
        let mut parts = line.split(',').map(str::trim);
        let (Some(l), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            bail!("line {}: expected `l,offset`", i + 1);
        };
        let l: i64 = l.parse().with_context(|| format!("line {}: bad site `{l}`", i + 1))?;
        let v: f64 = v.parse().with_context(|| format!("line {}: bad offset `{v}`", i + 1))?;
        let expected = start.map(|s: i64| s + values.len() as i64).unwrap_or(l);
        if l != expected {
            bail!("line {}: sites must be consecutive, expected {expected}, got {l}", i + 1);
        }
        start.get_or_insert(l);
        values.push(v);
    }
    let start = start.ok_or_else(|| anyhow::anyhow!("beta table has no rows"))?;
    Ok(EventuallyConstant::from_core(start, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg = RunConfig::parse("", Path::new(".")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.params, ParamsSection::default());
        assert_eq!(cfg.decay.window, WindowSetting::Named(AutoWindow::Auto));
    }

    #[test]
    fn sections_parse() {
        let text = "seed = 3\n[params]\na = 2.5\nb = 1.0\ngamma = 4.0\n[decay]\nwindow = 64\n";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.params.gamma, 4.0);
        assert_eq!(cfg.decay.window, WindowSetting::Fixed(64));
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::parse("[params]\ngama = 3.0\n", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("gama"), "{err}");
        let err = RunConfig::parse("[params]\na = \"two\"\n", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("line 2") || err.contains('a'), "{err}");
        let err = RunConfig::parse("[params]\na = -1.0\n", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("params"), "{err}");
    }

    #[test]
    fn beta_table_format() {
        let t = parse_beta_table("l,offset\n-1,0.5\n0,0.7\n1,0.5\n").unwrap();
        assert_eq!(t.get(0), 0.7);
        assert_eq!(t.get(-9), 0.5);
        assert!(parse_beta_table("l,offset\n0,0.5\n2,0.5\n").is_err());
        assert!(parse_beta_table("x,y\n").is_err());
    }
}
