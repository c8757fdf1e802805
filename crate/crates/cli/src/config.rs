use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use quantlik::estimate::{FitConfig, FitMode, LineSearch, ModelTemplate};
use quantlik::quantizer::QuantizerSpec;
use quantlik::suite::SuiteConfig;
use quantlik::{Family, LocationScaleModel, NoiseModel, Quantizer, Scale};
use serde::{Deserialize, Serialize};

/// A value given inline or as a path to a file holding it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inline<T> {
    Path(PathBuf),
    Value(T),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Observation matrix rows, or a headerless CSV file of them.
    pub s: Inline<Vec<Vec<f64>>>,
    pub x: Vec<f64>,
    pub scale: Scale,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub mode: FitMode,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub scale0: Option<Scale>,
    #[serde(default)]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub step: Option<LineSearch>,
    #[serde(default)]
    pub scale_floor: Option<f64>,
}

/// The JSON run configuration shared by every command. Relative paths are
/// resolved against the configuration file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub noise: Option<Family>,
    #[serde(default)]
    pub quantizer: Option<Inline<QuantizerSpec>>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub suite: Option<SuiteConfig>,
    #[serde(skip)]
    pub base: PathBuf,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn quantizer(&self) -> Result<Quantizer> {
        let spec = match self.quantizer.as_ref().context("config has no quantizer")? {
            Inline::Value(v) => v.clone(),
            Inline::Path(p) => {
                let p = self.resolve(p);
                let text = fs::read_to_string(&p)
                    .with_context(|| format!("reading quantizer {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing quantizer {}", p.display()))?
            }
        };
        Ok(Quantizer::try_from(spec)?)
    }

    fn model_section(&self) -> Result<&ModelConfig> {
        self.model.as_ref().context("config has no model")
    }

    pub fn s_matrix(&self) -> Result<DMatrix<f64>> {
        let rows = match &self.model_section()?.s {
            Inline::Value(rows) => rows.clone(),
            Inline::Path(p) => read_matrix_csv(&self.resolve(p))?,
        };
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            bail!("observation matrix must be a nonempty rectangular array");
        }
        Ok(DMatrix::from_fn(n, m, |r, c| rows[r][c]))
    }

    pub fn model(&self) -> Result<LocationScaleModel> {
        let sec = self.model_section()?;
        Ok(LocationScaleModel::new(
            self.s_matrix()?,
            sec.x.clone(),
            sec.scale.clone(),
        )?)
    }

    pub fn noise(&self, n: usize) -> Result<NoiseModel> {
        let family = self.noise.context("config has no noise family")?;
        Ok(NoiseModel::new(family, n)?)
    }

    pub fn template(&self) -> Result<ModelTemplate> {
        let s = self.s_matrix()?;
        let noise = self.noise(s.nrows())?;
        Ok(ModelTemplate::new(s, noise, self.quantizer()?)?)
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        let sec = self.fit.as_ref().context("config has no fit section")?;
        let m = self.s_matrix()?.ncols();
        let scale0 = match &sec.scale0 {
            Some(s) => s.clone(),
            None => self.model_section()?.scale.clone(),
        };
        let mut cfg = FitConfig::new(
            sec.mode,
            sec.x0.clone().unwrap_or_else(|| vec![0.0; m]),
            scale0,
        );
        if let Some(v) = sec.grad_tol {
            cfg.grad_tol = v;
        }
        if let Some(v) = sec.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = sec.step {
            cfg.step = v;
        }
        if let Some(v) = sec.scale_floor {
            cfg.scale_floor = v;
        }
        Ok(cfg)
    }
}

fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading matrix {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}
