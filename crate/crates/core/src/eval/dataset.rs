use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "Char.")]
    Character,
    #[serde(rename = "Equip.")]
    Equipment,
    Map,
    Story,
    #[serde(rename = "Mech.")]
    Mechanic,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Character,
        Category::Equipment,
        Category::Map,
        Category::Story,
        Category::Mechanic,
        Category::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Character => "Char.",
            Category::Equipment => "Equip.",
            Category::Map => "Map",
            Category::Story => "Story",
            Category::Mechanic => "Mech.",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    #[serde(rename = "Med.")]
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn label(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Med.",
            Difficulty::Hard => "Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMetadata {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub cover_ocr: String,
    #[serde(default)]
    pub asr: String,
}

/// One four-choice benchmark item grounded in a paused frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaInstance {
    pub id: String,
    pub image: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer: String,
    pub rationale: String,
    pub category: Category,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub metadata: VideoMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_element: Option<String>,
}

impl QaInstance {
    pub fn validate(&self) -> Result<(), String> {
        if self.options.len() != 4 {
            return Err(format!("expected exactly 4 options, found {}", self.options.len()));
        }
        let distinct: HashSet<&String> = self.options.iter().collect();
        if distinct.len() != 4 {
            return Err("options must be pairwise distinct".into());
        }
        if !self.options.contains(&self.answer) {
            return Err(format!("answer `{}` is not one of the options verbatim", self.answer));
        }
        Ok(())
    }

    /// Index of the gold answer among the options.
    pub fn gold_index(&self) -> usize {
        self.options
            .iter()
            .position(|o| *o == self.answer)
            .expect("validated instance")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

pub fn load_dataset(path: &Path) -> Result<Vec<QaInstance>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

/// Parses JSONL, rejecting the whole input at the first invalid line.
pub fn parse_dataset(text: &str) -> Result<Vec<QaInstance>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| DatasetError::Invalid { line: i + 1, message };
        let inst: QaInstance = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        inst.validate().map_err(invalid)?;
        if !ids.insert(inst.id.clone()) {
            return Err(invalid(format!("duplicate id `{}`", inst.id)));
        }
        out.push(inst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn line(options: serde_json::Value, answer: &str) -> String {
        json!({
            "id": "q1", "image": "/f.jpg", "question": "?", "options": options,
            "answer": answer, "rationale": "r", "category": "Mech.", "difficulty": "Med."
        })
        .to_string()
    }

    #[test]
    fn valid_line_parses() {
        let ds = parse_dataset(&line(json!(["1层", "2层", "3层", "4层"]), "2层")).unwrap();
        assert_eq!(ds[0].category, Category::Mechanic);
        assert_eq!(ds[0].difficulty, Difficulty::Medium);
        assert_eq!(ds[0].gold_index(), 1);
    }

    #[test]
    fn three_options_rejected_with_line_number() {
        let good = line(json!(["a", "b", "c", "d"]), "a").replace("q1", "q0");
        let text = format!("{good}\n{}", line(json!(["a", "b", "c"]), "a"));
        let err = parse_dataset(&text).unwrap_err();
        assert!(matches!(err, DatasetError::Invalid { line: 2, .. }), "{err}");
    }

    #[test]
    fn whitespace_variant_answer_rejected() {
        let err = parse_dataset(&line(json!(["2层", "3层", "4层", "5层"]), " 2层")).unwrap_err();
        assert!(err.to_string().contains("verbatim"));
    }

    #[test]
    fn missing_field_and_bad_category_rejected() {
        assert!(parse_dataset(r#"{"id":"x"}"#).unwrap_err().to_string().contains("missing field"));
        let bad = line(json!(["a", "b", "c", "d"]), "a").replace("Mech.", "Mechanics");
        assert!(parse_dataset(&bad).is_err());
        let dup = line(json!(["a", "a", "c", "d"]), "a");
        assert!(parse_dataset(&dup).unwrap_err().to_string().contains("distinct"));
    }
}
