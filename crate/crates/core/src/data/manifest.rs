//! On-disk datasets: a `manifest.tsv` of `pair_id	img1	img2	flo` records
//! with paths relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use super::ppm::{read_ppm, write_ppm};
use super::synth::SyntheticPair;
use super::{read_flo, write_flo, FlowField, Image};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairRecord {
    pub pair_id: String,
    pub image1: PathBuf,
    pub image2: PathBuf,
    pub flow: PathBuf,
}

impl PairRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.pair_id,
            self.image1.display(),
            self.image2.display(),
            self.flow.display()
        )
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let at = offset;
        offset += line.len() as u64;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::format(path, at, format!("expected 4 tab-separated fields, got `{line}`")));
        }
        out.push(PairRecord {
            pair_id: fields[0].to_string(),
            image1: fields[1].into(),
            image2: fields[2].into(),
            flow: fields[3].into(),
        });
    }
    Ok(out)
}

/// One loaded pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pair_id: String,
    pub image1: Image,
    pub image2: Image,
    pub flow: FlowField,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub records: Vec<PairRecord>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let records = parse_manifest(&text, &path)?;
        if records.is_empty() {
            return Err(Error::Config(format!("dataset {} has no pairs", root.display())));
        }
        Ok(Dataset {
            root: root.to_path_buf(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Reads pair `i`. Images and flow must agree in extent.
    pub fn load(&self, i: usize) -> Result<Sample> {
        let r = &self.records[i];
        let image1 = read_ppm(&self.root.join(&r.image1))?;
        let image2 = read_ppm(&self.root.join(&r.image2))?;
        let mut flow = read_flo(&self.root.join(&r.flow))?;
        let dims = |im: &Image| [im.height, im.width];
        if dims(&image1) != dims(&image2) || dims(&image1) != [flow.height, flow.width] {
            return Err(Error::dim(
                "dataset pair",
                &[image1.height, image1.width],
                &[flow.height, flow.width],
            ));
        }
        let mask_path = self.root.join(r.flow.with_extension("mask.ppm"));
        if mask_path.exists() {
            let m = read_ppm(&mask_path)?;
            flow.valid = Some(m.data[..flow.pixels()].iter().map(|&v| v > 0.5).collect());
        }
        Ok(Sample {
            pair_id: r.pair_id.clone(),
            image1,
            image2,
            flow,
        })
    }

    pub fn load_all(&self) -> Result<Vec<Sample>> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }
}

/// Writes pairs as `<id>_1.ppm`, `<id>_2.ppm`, `<id>.flo` and, when the
/// flow has a mask, `<id>.mask.ppm` (white = valid), plus the manifest.
///
/// Images are stored with 8-bit quantization; use the returned dataset
/// (re-read from disk) rather than the in-memory pairs for training.
pub fn write_dataset(root: &Path, pairs: &[(String, SyntheticPair)]) -> Result<Dataset> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = String::new();
    for (id, p) in pairs {
        let rec = PairRecord {
            pair_id: id.clone(),
            image1: format!("{id}_1.ppm").into(),
            image2: format!("{id}_2.ppm").into(),
            flow: format!("{id}.flo").into(),
        };
        write_ppm(&p.image1, &root.join(&rec.image1))?;
        write_ppm(&p.image2, &root.join(&rec.image2))?;
        write_flo(&p.flow, &root.join(&rec.flow))?;
        if let Some(valid) = &p.flow.valid {
            let n = valid.len();
            let plane: Vec<f32> = valid.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let data = plane.repeat(3);
            debug_assert_eq!(data.len(), 3 * n);
            let mask = Image::new(p.flow.height, p.flow.width, data)?;
            write_ppm(&mask, &root.join(format!("{id}.mask.ppm")))?;
        }
        manifest.push_str(&rec.to_line());
        manifest.push('\n');
    }
    let path = root.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Dataset::open(root)
}
