//! Prompt templates, shipped under `prompts/` and embedded at build time.
//!
//! Templates use `{name}` slots. [`fill`] substitutes known slots in one pass and leaves
//! every other brace untouched, so JSON examples inside a template survive.

use std::fs;
use std::path::Path;

const SKILL_FILES: [&str; 5] = [
    "ann-bm25-recall.md",
    "ann-image-recall.md",
    "ann-multimodal-recall.md",
    "ann-text-recall.md",
    "kn-lookup.md",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    pub rag_answer: String,
    pub par_planner: String,
    pub par_reprompt: String,
    pub kn_select: String,
    pub msr1_round1: String,
    pub msr1_after_image: String,
    pub msr1_after_text: String,
    /// Tool skill cards, in the order they are shown to the planner.
    pub skills: Vec<String>,
}

impl Default for Prompts {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Prompts {
    pub fn builtin() -> Self {
        Self {
            rag_answer: include_str!("../prompts/rag_answer.txt").to_string(),
            par_planner: include_str!("../prompts/par_planner.txt").to_string(),
            par_reprompt: include_str!("../prompts/par_reprompt.txt").to_string(),
            kn_select: include_str!("../prompts/kn_select.txt").to_string(),
            msr1_round1: include_str!("../prompts/msr1_round1.txt").to_string(),
            msr1_after_image: include_str!("../prompts/msr1_after_image.txt").to_string(),
            msr1_after_text: include_str!("../prompts/msr1_after_text.txt").to_string(),
            skills: vec![
                include_str!("../prompts/skills/ann-bm25-recall.md").to_string(),
                include_str!("../prompts/skills/ann-image-recall.md").to_string(),
                include_str!("../prompts/skills/ann-multimodal-recall.md").to_string(),
                include_str!("../prompts/skills/ann-text-recall.md").to_string(),
                include_str!("../prompts/skills/kn-lookup.md").to_string(),
            ],
        }
    }

    /// Loads the same file layout from another directory.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str| fs::read_to_string(dir.join(name));
        Ok(Self {
            rag_answer: read("rag_answer.txt")?,
            par_planner: read("par_planner.txt")?,
            par_reprompt: read("par_reprompt.txt")?,
            kn_select: read("kn_select.txt")?,
            msr1_round1: read("msr1_round1.txt")?,
            msr1_after_image: read("msr1_after_image.txt")?,
            msr1_after_text: read("msr1_after_text.txt")?,
            skills: SKILL_FILES
                .iter()
                .map(|f| fs::read_to_string(dir.join("skills").join(f)))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn skills_block(&self) -> String {
        self.skills.join("\n\n")
    }
}

/// Replaces each `{key}` with its value. Inserted text is never rescanned.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        let hit = vars.iter().find(|(k, _)| {
            tail.strip_prefix(k).is_some_and(|after| after.starts_with('}'))
        });
        match hit {
            Some((k, v)) => {
                out.push_str(v);
                rest = &tail[k.len() + 1..];
            }
            None => {
                out.push('{');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

/// `A. ...\nB. ...` option listing.
pub fn lettered_options(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {}", (b'A' + i as u8) as char, o))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        let t = "Q: {question} / {\"json\": 1} / {missing}";
        let out = fill(t, &[("question", "{question}?")]);
        assert_eq!(out, "Q: {question}? / {\"json\": 1} / {missing}");
    }

    #[test]
    fn builtin_templates_carry_their_slots() {
        let p = Prompts::builtin();
        for slot in ["{question}", "{option_1}", "{option_4}", "{knowledge}"] {
            assert!(p.rag_answer.contains(slot), "{slot}");
        }
        assert!(p.msr1_round1.contains("{question}") && p.msr1_round1.contains("{options}"));
        assert!(p.msr1_round1.contains("<search><img></search>"));
        assert!(p.msr1_after_image.starts_with("你已经完成了一轮图搜"));
        assert!(p.msr1_after_text.starts_with("你已经完成文本搜索"));
        assert_eq!(p.skills.len(), 5);
        assert!(p.skills[0].contains("Endpoint: `/bm25_ann`"));
        for slot in ["{skills}", "{evidence}", "{used_tools}", "{history}", "{round}"] {
            assert!(p.par_planner.contains(slot), "{slot}");
        }
    }

    #[test]
    fn from_dir_matches_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts");
        assert_eq!(Prompts::from_dir(&dir).unwrap(), Prompts::builtin());
    }

    #[test]
    fn options_are_lettered() {
        let o: Vec<String> = ["1层", "2层"].iter().map(|s| s.to_string()).collect();
        assert_eq!(lettered_options(&o), "A. 1层\nB. 2层");
    }
}
