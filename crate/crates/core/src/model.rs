//! Built bubble models and their on-disk directory.
//!
//! Layout of a model directory:
//!
//! ```text
//! manifest.json        format tag, build parameters, one entry per bubble
//! catalog.bin          schemas, dictionaries and FK graph (postcard)
//! bubbles/NNNN.net     Chow-Liu network of bubble NNNN (postcard)
//! bubbles/NNNN.idx     attribute index of bubble NNNN (postcard)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Database, FkEdge};
use crate::error::{Error, Result};
use crate::network::{learn_network, ChowLiuNetwork, ModelParams};
use crate::partitioner::{
    build_bubble_index, create_bubbles, create_join_bubbles, BubbleIndex, BubbleSource, PartitionConfig,
};

pub const FORMAT_TAG: &str = "tuple-bubbles/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub partition: PartitionConfig,
    pub params: ModelParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BubbleEntry {
    pub id: String,
    pub source: BubbleSource,
    pub rows: u64,
    pub network: ChowLiuNetwork,
    pub index: BubbleIndex,
}

impl BubbleEntry {
    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }
}

/// Everything needed to answer queries without the raw tables.
#[derive(Clone, Debug)]
pub struct BubbleModel {
    pub catalog: Catalog,
    pub config: BuildConfig,
    pub bubbles: Vec<BubbleEntry>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    partition: PartitionConfig,
    params: ModelParams,
    bubbles: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    source: BubbleSource,
    rows: u64,
    network: String,
    index: String,
}

impl BubbleModel {
    /// Partitions the database, learns one network per bubble and indexes
    /// every bubble. Relation bubbles are always built; FK-join bubbles are
    /// added in join mode.
    pub fn build(db: &Database, config: &BuildConfig) -> Result<Self> {
        let mut bubbles = create_bubbles(db, &config.partition)?;
        if config.partition.join_mode {
            bubbles.extend(create_join_bubbles(db, &config.partition)?);
        }
        let entries = bubbles
            .par_iter()
            .map(|b| BubbleEntry {
                id: b.id.clone(),
                source: b.source.clone(),
                rows: b.n_rows() as u64,
                network: learn_network(b, &config.params),
                index: build_bubble_index(b),
            })
            .collect();
        Ok(Self {
            catalog: db.catalog(),
            config: *config,
            bubbles: entries,
        })
    }

    /// Indices of the partition bubbles of one relation.
    pub fn relation_bubbles(&self, relation: &str) -> Vec<usize> {
        self.bubbles
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(&b.source, BubbleSource::Relation { relation: r, .. } if r == relation))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of the join bubbles built for one FK edge.
    pub fn join_bubbles(&self, edge: &FkEdge) -> Vec<usize> {
        self.bubbles
            .iter()
            .enumerate()
            .filter(|(_, b)| match &b.source {
                BubbleSource::Join {
                    left,
                    right,
                    left_attribute,
                    right_attribute,
                    ..
                } => {
                    *left == edge.from
                        && *right == edge.to
                        && *left_attribute == edge.attribute
                        && *right_attribute == edge.to_attribute
                }
                BubbleSource::Relation { .. } => false,
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<&BubbleEntry> {
        self.bubbles.iter().find(|b| b.id == id)
    }

    /// Writes the model directory, replacing earlier bubble files. Returns
    /// the number of bytes written.
    pub fn save(&self, dir: &Path) -> Result<u64> {
        let bubble_dir = dir.join("bubbles");
        if bubble_dir.exists() {
            fs::remove_dir_all(&bubble_dir).map_err(|e| Error::io(&bubble_dir, e))?;
        }
        fs::create_dir_all(&bubble_dir).map_err(|e| Error::io(&bubble_dir, e))?;

        let mut written = write_file(&dir.join("catalog.bin"), &to_postcard(&self.catalog)?)?;
        let mut entries = Vec::with_capacity(self.bubbles.len());
        for (i, b) in self.bubbles.iter().enumerate() {
            let net = format!("bubbles/{i:04}.net");
            let idx = format!("bubbles/{i:04}.idx");
            written += write_file(&dir.join(&net), &to_postcard(&b.network)?)?;
            written += write_file(&dir.join(&idx), &to_postcard(&b.index)?)?;
            entries.push(ManifestEntry {
                id: b.id.clone(),
                source: b.source.clone(),
                rows: b.rows,
                network: net,
                index: idx,
            });
        }
        let manifest = Manifest {
            format: FORMAT_TAG.to_string(),
            partition: self.config.partition,
            params: self.config.params,
            bubbles: entries,
        };
        let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        json.push(b'\n');
        written += write_file(&dir.join("manifest.json"), &json)?;
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let text = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest =
            serde_json::from_slice(&text).map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        if manifest.format != FORMAT_TAG {
            return Err(Error::Format(format!(
                "{} has format `{}`, expected `{FORMAT_TAG}`",
                manifest_path.display(),
                manifest.format
            )));
        }
        let catalog: Catalog = read_postcard(&dir.join("catalog.bin"))?;
        let bubbles = manifest
            .bubbles
            .into_iter()
            .map(|e| {
                Ok(BubbleEntry {
                    network: read_postcard(&dir.join(&e.network))?,
                    index: read_postcard(&dir.join(&e.index))?,
                    id: e.id,
                    source: e.source,
                    rows: e.rows,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            catalog,
            config: BuildConfig {
                partition: manifest.partition,
                params: manifest.params,
            },
            bubbles,
        })
    }
}

/// Total size of the files in a model directory.
pub fn directory_bytes(dir: &Path) -> Result<u64> {
    let mut total = 0;
    let mut stack: Vec<PathBuf> = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let entry = entry.map_err(|e| Error::io(&d, e))?;
            let meta = entry.metadata().map_err(|e| Error::io(entry.path(), e))?;
            if meta.is_dir() {
                stack.push(entry.path());
            } else {
                total += meta.len();
            }
        }
    }
    Ok(total)
}

fn to_postcard<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    postcard::to_stdvec(value).map_err(|e| Error::Format(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<u64> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

fn read_postcard<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    postcard::from_bytes(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
