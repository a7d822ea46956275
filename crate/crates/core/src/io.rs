//! File formats: binary PPM images, metrics and dataset CSV, collapse
//! reports, TOML checkpoints and run manifests.

use crate::error::{Error, Result};
use crate::inr::{InrGenerator, InrHead};
use crate::net::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Module};
use crate::tensor::Tensor;
use crate::toydata::ToyDataset;
use crate::trainer::{CollapseReport, MetricsRow, Variant};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn format_err(context: &str, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{context}: {e}"))
}

/// `round((v + 1)·127.5)` clamped to a byte.
pub fn to_byte(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

pub fn from_byte(b: u8) -> f64 {
    b as f64 / 127.5 - 1.0
}

/// Binary P6 encoding of an `[H, W, 3]` image with values in `[-1, 1]`.
pub fn encode_ppm(img: &Tensor) -> Result<Vec<u8>> {
    let [h, w, 3] = *img.shape() else {
        return Err(Error::ShapeMismatch {
            context: "encode_ppm",
            expected: vec![0, 0, 3],
            actual: img.shape().to_vec(),
        });
    };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(img.data().iter().map(|&v| to_byte(v)));
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P6" {
        return Err(Error::Format(format!(
            "expected a P6 image, found {:?}",
            fields[0]
        )));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|e| format_err("PPM header", e));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported PPM maxval {maxval}")));
    }
    let n = h * w * 3;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Format("truncated PPM raster".into()))?;
    Tensor::from_vec(&[h, w, 3], raster.iter().map(|&b| from_byte(b)).collect())
}

pub fn write_ppm(path: &Path, img: &Tensor) -> Result<()> {
    Ok(std::fs::write(path, encode_ppm(img)?)?)
}

pub fn read_ppm(path: &Path) -> Result<Tensor> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err("metrics CSV", e))?;
    if rows.is_empty() {
        w.write_record(MetricsRow::CSV_HEADER.split(','))
            .map_err(|e| format_err("metrics CSV", e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| format_err("metrics CSV", e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format_err("metrics CSV", e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| format_err("metrics CSV", e)))
        .collect()
}

/// Three lines: `collapsed`, `step` and `peak`/`trough`.
pub fn format_collapse(report: &CollapseReport) -> String {
    let step = report
        .step
        .map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "collapsed: {}\nstep: {step}\npeak: {} trough: {}\n",
        report.collapsed, report.peak, report.trough
    )
}

/// `x0, …, x{d-1}, label` rows.
pub fn write_dataset_csv(path: &Path, dataset: &ToyDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err("dataset CSV", e))?;
    let d = dataset.dim();
    let header: Vec<String> = (0..d)
        .map(|i| format!("x{i}"))
        .chain(["label".into()])
        .collect();
    w.write_record(&header)
        .map_err(|e| format_err("dataset CSV", e))?;
    let samples = dataset.samples();
    for (i, &label) in dataset.labels().iter().enumerate() {
        let rec: Vec<String> = samples
            .row(i)
            .iter()
            .map(|v| v.to_string())
            .chain([label.to_string()])
            .collect();
        w.write_record(&rec)
            .map_err(|e| format_err("dataset CSV", e))?;
    }
    w.flush()?;
    Ok(())
}

/// Samples `[N, d]` and labels from a file written by [`write_dataset_csv`].
pub fn read_dataset_csv(path: &Path) -> Result<(Tensor, Vec<usize>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format_err("dataset CSV", e))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| format_err("dataset CSV", e))?;
        let n = rec.len();
        if n < 2 {
            return Err(Error::Format(
                "dataset rows need coordinates and a label".into(),
            ));
        }
        let xs = rec
            .iter()
            .take(n - 1)
            .map(|v| v.parse::<f64>().map_err(|e| format_err("dataset value", e)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(xs);
        labels.push(
            rec[n - 1]
                .parse::<usize>()
                .map_err(|e| format_err("dataset label", e))?,
        );
    }
    Ok((Tensor::from_rows(&rows)?, labels))
}

/// INR head and training resolution of an INR generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InrSpec {
    pub hidden: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Generator and discriminator architecture plus every parameter value.
///
/// Stored as TOML; floats are written in shortest round-trip form, so a
/// save/load cycle is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub library_version: String,
    pub variant: Variant,
    pub generator: GeneratorConfig,
    pub inr: Option<InrSpec>,
    pub discriminator: DiscriminatorConfig,
    pub params: Vec<StoredParam>,
}

/// A generator restored from a checkpoint.
#[derive(Debug, Clone)]
pub enum LoadedGenerator {
    Direct(Generator),
    Inr(InrGenerator),
}

fn store(module: &impl Module, out: &mut Vec<StoredParam>) {
    out.extend(module.params().into_iter().map(|p| StoredParam {
        name: p.name.clone(),
        shape: p.value.shape().to_vec(),
        values: p.value.data().to_vec(),
    }));
}

impl Checkpoint {
    pub fn from_direct(variant: Variant, g: &Generator, d: &Discriminator) -> Self {
        let mut params = Vec::new();
        store(g, &mut params);
        store(d, &mut params);
        Checkpoint {
            library_version: crate::VERSION.to_string(),
            variant,
            generator: g.config().clone(),
            inr: None,
            discriminator: d.config().clone(),
            params,
        }
    }

    pub fn from_inr(variant: Variant, g: &InrGenerator, d: &Discriminator) -> Self {
        let mut params = Vec::new();
        store(g, &mut params);
        store(d, &mut params);
        let (height, width) = g.resolution();
        Checkpoint {
            library_version: crate::VERSION.to_string(),
            variant,
            generator: g.backbone.config().clone(),
            inr: Some(InrSpec {
                hidden: g.head.mlp().layers()[0].out_dim(),
                height,
                width,
            }),
            discriminator: d.config().clone(),
            params,
        }
    }

    fn fill(&self, module: &mut impl Module) -> Result<()> {
        for p in module.params_mut() {
            let stored = self
                .params
                .iter()
                .find(|s| s.name == p.name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks parameter {}", p.name)))?;
            if stored.shape != p.value.shape() || stored.values.len() != p.value.len() {
                return Err(Error::Format(format!(
                    "parameter {} has shape {:?} in the checkpoint, expected {:?}",
                    p.name,
                    stored.shape,
                    p.value.shape()
                )));
            }
            p.value.data_mut().copy_from_slice(&stored.values);
        }
        Ok(())
    }

    pub fn generator(&self) -> Result<LoadedGenerator> {
        let mut rng = crate::rng_from_seed(0);
        let backbone = Generator::new(&mut rng, self.generator.clone())?;
        let mut g = match self.inr {
            None => LoadedGenerator::Direct(backbone),
            Some(spec) => {
                let crate::net::GeneratorHead::FeatureGrid { channels, .. } = self.generator.head
                else {
                    return Err(Error::Format(
                        "INR checkpoint without a feature-grid generator".into(),
                    ));
                };
                let head = InrHead::new(&mut rng, channels, spec.hidden)?;
                LoadedGenerator::Inr(InrGenerator::new(backbone, head, spec.height, spec.width)?)
            }
        };
        match &mut g {
            LoadedGenerator::Direct(m) => self.fill(m)?,
            LoadedGenerator::Inr(m) => self.fill(m)?,
        }
        Ok(g)
    }

    pub fn discriminator(&self) -> Result<Discriminator> {
        let mut d = Discriminator::new(&mut crate::rng_from_seed(0), self.discriminator.clone())?;
        self.fill(&mut d)?;
        Ok(d)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| format_err("checkpoint", e))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| format_err("checkpoint", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_toml()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Everything needed to reproduce one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub seed: u64,
    pub prng: String,
    pub library_version: String,
    pub wall_clock_seconds: f64,
    /// Fully resolved configuration as TOML text.
    pub config: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        arguments: Vec<String>,
        seed: u64,
        config: String,
        wall_clock_seconds: f64,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            arguments,
            seed,
            prng: crate::PRNG_NAME.to_string(),
            library_version: crate::VERSION.to_string(),
            wall_clock_seconds,
            config,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| format_err("manifest", e))?;
        Ok(std::fs::write(path, text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&std::fs::read_to_string(path)?).map_err(|e| format_err("manifest", e))
    }
}
