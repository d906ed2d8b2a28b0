//! On-disk synthetic datasets: PPM images, PGM masks and `manifest.json`.
//!
//! ```text
//! root/
//!   manifest.json
//!   c00-stripes/train/0000.ppm
//!   c00-stripes/test/0000.ppm
//!   c00-stripes/test/0000_mask.pgm
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use fcdd_core::synth::{gen_category, AnomalyKind, CategoryData, CategorySpec, Family, SplitCounts, TestSample};
use fcdd_core::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::pnm;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryEntry {
    pub id: u32,
    pub name: String,
    pub family: Value,
    pub palette: [[f64; 3]; 2],
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    TestNormal,
    TestAnomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub role: Role,
    pub category: u32,
    pub index: usize,
    pub mask: Option<String>,
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub seed: u64,
    pub image_size: usize,
    pub counts: Counts,
    pub categories: Vec<CategoryEntry>,
    pub entries: Vec<FileEntry>,
}

impl Manifest {
    pub fn category(&self, id: u32) -> Option<&CategoryEntry> {
        self.categories.iter().find(|c| c.id == id)
    }
}

fn family_json(f: &Family) -> Value {
    match *f {
        Family::Stripes { period, duty, orientation } => json!({
            "type": "stripes", "period": period, "duty": duty,
            "orientation": format!("{orientation:?}").to_lowercase(),
        }),
        Family::Checker { cell } => json!({ "type": "checker", "cell": cell }),
        Family::Blobs { count, radius } => json!({
            "type": "blobs", "count": [count.0, count.1], "radius": [radius.0, radius.1],
        }),
        Family::Cells { count, border } => json!({
            "type": "cells", "count": [count.0, count.1], "border": border,
        }),
        Family::Gradient { waves } => json!({ "type": "gradient", "waves": waves }),
    }
}

fn is_empty_dir(path: &Path) -> Result<bool> {
    match fs::read_dir(path) {
        Ok(mut it) => Ok(it.next().is_none()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(Error::io(path)(e)),
    }
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(Error::io(path))
}

/// Generates and writes the given categories under `root`.
///
/// A non-empty `root` is rejected unless `force` is set and it already holds
/// a dataset, in which case it is replaced.
pub fn write_dataset(
    root: &Path,
    categories: &[u32],
    seed: u64,
    counts: &Counts,
    image_size: usize,
    force: bool,
) -> Result<Manifest> {
    if !is_empty_dir(root)? {
        if !force {
            return Err(Error::Invalid(format!(
                "{} exists and is not empty; pass --force to overwrite",
                root.display()
            )));
        }
        if !root.join(MANIFEST).is_file() {
            return Err(Error::Invalid(format!(
                "refusing to overwrite {}: it does not contain a {}",
                root.display(),
                MANIFEST
            )));
        }
        fs::remove_dir_all(root).map_err(Error::io(root))?;
    }
    mkdir(root)?;
    let rng = Rng::new(seed);
    let split = SplitCounts { train: counts.train, test: counts.test };
    let mut cats = Vec::new();
    let mut entries = Vec::new();
    for &id in categories {
        let spec = CategorySpec { image_size, ..CategorySpec::builtin(id)? };
        let name = spec.name();
        let data = gen_category(&spec, &rng, split)?;
        mkdir(&root.join(&name).join("train"))?;
        mkdir(&root.join(&name).join("test"))?;
        for (i, img) in data.train.iter().enumerate() {
            let rel = format!("{name}/train/{i:04}.ppm");
            pnm::write_ppm(&root.join(&rel), img)?;
            entries.push(FileEntry { path: rel, role: Role::Train, category: id, index: i, mask: None, kind: None });
        }
        for (j, t) in data.test.iter().enumerate() {
            let rel = format!("{name}/test/{j:04}.ppm");
            let mask = format!("{name}/test/{j:04}_mask.pgm");
            pnm::write_ppm(&root.join(&rel), &t.image)?;
            pnm::write_pgm(&root.join(&mask), &t.mask)?;
            entries.push(FileEntry {
                path: rel,
                role: if t.kind.is_some() { Role::TestAnomalous } else { Role::TestNormal },
                category: id,
                index: j,
                mask: Some(mask),
                kind: t.kind.map(|k| k.name().to_string()),
            });
        }
        cats.push(CategoryEntry {
            id,
            name,
            family: family_json(&spec.family),
            palette: spec.palette,
            noise: spec.noise,
        });
    }
    let manifest =
        Manifest { format: FORMAT_VERSION, seed, image_size, counts: counts.clone(), categories: cats, entries };
    let path = root.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(Error::io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.format != FORMAT_VERSION {
        return Err(Error::format(&path, format!("unsupported manifest format {}", m.format)));
    }
    Ok(m)
}

/// Loads one category's images and masks as listed in the manifest.
pub fn load_category(root: &Path, manifest: &Manifest, id: u32) -> Result<CategoryData> {
    let entry = manifest
        .category(id)
        .ok_or_else(|| Error::Invalid(format!("category {id} is not in the dataset at {}", root.display())))?;
    let spec = CategorySpec { image_size: manifest.image_size, ..CategorySpec::builtin(id)? };
    if spec.name() != entry.name {
        return Err(Error::format(
            root.join(MANIFEST),
            format!("category {id} is named {}, expected {}", entry.name, spec.name()),
        ));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for e in manifest.entries.iter().filter(|e| e.category == id) {
        let img = pnm::read_ppm(&root.join(&e.path))?;
        match e.role {
            Role::Train => train.push(img),
            Role::TestNormal | Role::TestAnomalous => {
                let mask_rel =
                    e.mask.as_ref().ok_or_else(|| Error::format(PathBuf::from(&e.path), "test image without mask"))?;
                let mask_path = root.join(mask_rel);
                let mask = pnm::read_pgm(&mask_path)?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 });
                let kind = match &e.kind {
                    None => None,
                    Some(k) => Some(
                        AnomalyKind::from_name(k)
                            .ok_or_else(|| Error::format(root.join(MANIFEST), format!("unknown anomaly kind {k}")))?,
                    ),
                };
                if (e.role == Role::TestAnomalous) != kind.is_some() || (kind.is_some() && mask.sum() == 0.0) {
                    return Err(Error::format(mask_path, "role, kind and mask disagree"));
                }
                test.push(TestSample { image: img, mask, kind });
            }
        }
    }
    Ok(CategoryData { spec, train, test })
}
