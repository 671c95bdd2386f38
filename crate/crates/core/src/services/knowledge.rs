use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRow {
    pub query: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnLookupResult {
    pub query: String,
    pub found: bool,
    pub contents: Vec<String>,
}

/// Exact-match dictionary from core-element queries to knowledge passages.
///
/// Each file contributes at most one passage per query (a later line in the same file
/// replaces an earlier one), and passages are returned in file order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct KnowledgeBase {
    files: Vec<PathBuf>,
    entries: BTreeMap<String, Vec<String>>,
}

impl KnowledgeBase {
    pub fn load<P: AsRef<Path>>(files: &[P]) -> Result<Self, ServiceError> {
        let mut per_file = Vec::with_capacity(files.len());
        for f in files {
            per_file.push(jsonl::read::<KnowledgeRow>(f.as_ref())?);
        }
        let mut kb = Self::from_rows(per_file);
        kb.files = files.iter().map(|f| f.as_ref().to_path_buf()).collect();
        Ok(kb)
    }

    /// Builds from already-parsed files, one `Vec` per file in priority order.
    pub fn from_rows(files: Vec<Vec<KnowledgeRow>>) -> Self {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for rows in files {
            let mut this_file: HashMap<String, String> = HashMap::new();
            let mut order = Vec::new();
            for row in rows {
                if this_file.insert(row.query.clone(), row.content).is_none() {
                    order.push(row.query);
                }
            }
            for q in order {
                let content = this_file.remove(&q).expect("inserted above");
                entries.entry(q).or_default().push(content);
            }
        }
        Self {
            files: Vec::new(),
            entries,
        }
    }

    pub fn num_unique_queries(&self) -> usize {
        self.entries.len()
    }

    pub fn lookup(&self, queries: &[String]) -> Vec<KnLookupResult> {
        queries
            .iter()
            .map(|q| {
                let contents = self.entries.get(q).cloned().unwrap_or_default();
                KnLookupResult {
                    query: q.clone(),
                    found: !contents.is_empty(),
                    contents,
                }
            })
            .collect()
    }
}
