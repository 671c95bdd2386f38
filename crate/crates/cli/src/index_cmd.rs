use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use framesearch_core::index::{
    build_index_file, embed_corpus, load_vector_table, sample_positive_pairs, Bm25Params, ClusterModel,
    HashingEmbedder, ImageEntry, IndexKind,
};
use framesearch_core::jsonl;
use serde_json::json;

#[derive(Subcommand)]
pub enum IndexCommand {
    /// Build an index file from a corpus and (for dense kinds) a vector sidecar.
    Build {
        #[arg(long)]
        kind: IndexKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
    },
    /// Write a vector sidecar for a text or multimodal corpus with the hashing embedder.
    Embed {
        #[arg(long)]
        kind: IndexKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Gallery vectors keyed by image path (multimodal only).
        #[arg(long)]
        image_table: Option<PathBuf>,
        /// Gallery JSONL used to map `img` paths to pids in `--image-table`.
        #[arg(long)]
        gallery: Option<PathBuf>,
    },
    /// Cluster each core element's gallery images with k-means++.
    Cluster {
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw one positive pair per element per epoch from cluster assignments.
    SamplePairs {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        epochs: u64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: IndexCommand) -> Result<()> {
    match cmd {
        IndexCommand::Build { kind, corpus, vectors, out, k1, b } => {
            let params = Bm25Params::new(k1, b)?;
            let index = build_index_file(kind, &corpus, vectors.as_deref(), params)?;
            index.save(&out).with_context(|| format!("writing {}", out.display()))?;
            log::info!("built {kind} index at {}", out.display());
        }
        IndexCommand::Embed { kind, corpus, out, dim, image_table, gallery } => {
            if dim == 0 {
                bail!("--dim must be at least 1");
            }
            let table = match image_table {
                Some(p) => {
                    let mut t = load_vector_table(&p)?;
                    if let Some(g) = gallery {
                        for e in jsonl::read::<ImageEntry>(&g)? {
                            if let Some(v) = t.get(&e.pid).cloned() {
                                t.entry(e.img).or_insert(v);
                            }
                        }
                    }
                    Some(t)
                }
                None => None,
            };
            let rows = embed_corpus(kind, &corpus, HashingEmbedder::new(dim), table.as_ref())?;
            jsonl::write(&out, &rows)?;
            log::info!("embedded {} rows into {}", rows.len(), out.display());
        }
        IndexCommand::Cluster { gallery, vectors, out, seed } => {
            let table = load_vector_table(&vectors)?;
            let mut by_element: BTreeMap<String, Vec<(String, _)>> = BTreeMap::new();
            for e in jsonl::read::<ImageEntry>(&gallery)? {
                if e.query.trim().is_empty() {
                    continue;
                }
                let v = table
                    .get(&e.pid)
                    .cloned()
                    .with_context(|| format!("no vector for image `{}`", e.pid))?;
                by_element.entry(e.query).or_default().push((e.pid, v));
            }
            let models = by_element
                .into_iter()
                .map(|(element, images)| ClusterModel::fit(element, images, seed))
                .collect::<Result<Vec<_>, _>>()?;
            jsonl::write(&out, &models)?;
            log::info!("clustered {} elements into {}", models.len(), out.display());
        }
        IndexCommand::SamplePairs { clusters, seed, epochs, out } => {
            let models: BTreeMap<String, ClusterModel> = jsonl::read::<ClusterModel>(&clusters)?
                .into_iter()
                .map(|m| (m.element_id.clone(), m))
                .collect();
            let mut lines = Vec::new();
            for epoch in 0..epochs {
                for pair in sample_positive_pairs(&models, seed.wrapping_add(epoch)) {
                    let mut v = serde_json::to_value(&pair)?;
                    v["epoch"] = json!(epoch);
                    lines.push(v);
                }
            }
            match out {
                Some(p) => jsonl::write(&p, &lines)?,
                None => {
                    for l in lines {
                        println!("{l}");
                    }
                }
            }
        }
    }
    Ok(())
}
