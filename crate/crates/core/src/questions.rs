//! Question catalogs: the questions asked about each slot and intent.
//!
//! A catalog file is JSON:
//!
//! ```json
//! {
//!   "slot_questions": {"cuisine": ["what cuisine was mentioned?"]},
//!   "slot_descriptions": {"area": "part of town"},
//!   "slot_question_templates": ["what {} was mentioned?"],
//!   "intent_question_template": "is the intent asking about {}?"
//! }
//! ```
//!
//! Every field is optional. `{}` is the placeholder in templates.

use std::fmt;
use std::marker::PhantomData;

use indexmap::IndexMap;
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Format(String),
    #[error("duplicate {section} entry for slot '{slot}'")]
    DuplicateSlot { section: &'static str, slot: String },
    #[error("template '{template}' must contain exactly one '{{}}' placeholder, found {found}")]
    Placeholder { template: String, found: usize },
    #[error("slot '{0}' has no questions after template expansion")]
    NoQuestions(String),
}

/// Text with exactly one `{}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template(String);

impl Template {
    pub const PLACEHOLDER: &'static str = "{}";

    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let found = text.matches(Self::PLACEHOLDER).count();
        if found != 1 {
            return Err(CatalogError::Placeholder {
                template: text.to_string(),
                found,
            });
        }
        Ok(Template(text.to_string()))
    }

    pub fn fill(&self, value: &str) -> String {
        self.0.replacen(Self::PLACEHOLDER, value, 1)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercases a label and turns `_`, `-` and `.` into single spaces.
pub fn tokenize_label(label: &str) -> String {
    label
        .split(['_', '-', '.', ' '])
        .filter(|part| !part.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Per-slot question lists plus the templates used to generate more.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionCatalog {
    pub slot_questions: IndexMap<String, Vec<String>>,
    pub slot_descriptions: IndexMap<String, String>,
    pub slot_question_templates: Vec<Template>,
    pub intent_question_template: Template,
}

impl Default for QuestionCatalog {
    fn default() -> Self {
        QuestionCatalog {
            slot_questions: IndexMap::new(),
            slot_descriptions: IndexMap::new(),
            slot_question_templates: Vec::new(),
            intent_question_template: Template::parse(Self::DEFAULT_INTENT_TEMPLATE)
                .expect("default template is valid"),
        }
    }
}

impl QuestionCatalog {
    pub const DEFAULT_INTENT_TEMPLATE: &'static str = "is the intent asking about {}?";

    pub fn questions_for(&self, slot: &str) -> Option<&[String]> {
        self.slot_questions.get(slot).map(Vec::as_slice)
    }

    /// Total number of slot questions, i.e. slot items generated per record.
    pub fn slot_question_count(&self) -> usize {
        self.slot_questions.values().map(Vec::len).sum()
    }

    pub fn with_slot<I, S>(mut self, slot: &str, questions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.slot_questions
            .insert(slot.to_string(), questions.into_iter().map(Into::into).collect());
        self
    }
}

/// JSON object read as an ordered list of entries so duplicate keys survive.
struct Entries<V>(Vec<(String, V)>);

impl<V> Default for Entries<V> {
    fn default() -> Self {
        Entries(Vec::new())
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = Entries<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some(entry) = map.next_entry()? {
                    entries.push(entry);
                }
                Ok(Entries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(PhantomData))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    slot_questions: Entries<Vec<String>>,
    #[serde(default)]
    slot_descriptions: Entries<String>,
    #[serde(default)]
    slot_question_templates: Vec<String>,
    #[serde(default)]
    intent_question_template: Option<String>,
}

fn unique<V>(
    section: &'static str,
    entries: Entries<V>,
) -> Result<IndexMap<String, V>, CatalogError> {
    let mut map = IndexMap::with_capacity(entries.0.len());
    for (slot, value) in entries.0 {
        if map.contains_key(&slot) {
            return Err(CatalogError::DuplicateSlot { section, slot });
        }
        map.insert(slot, value);
    }
    Ok(map)
}

/// Reads a catalog file. Question lists keep file order.
pub fn load_catalog(text: &str) -> Result<QuestionCatalog, CatalogError> {
    let file: CatalogFile =
        serde_json::from_str(text).map_err(|e| CatalogError::Format(e.to_string()))?;
    let slot_question_templates = file
        .slot_question_templates
        .iter()
        .map(|t| Template::parse(t))
        .collect::<Result<_, _>>()?;
    let intent_question_template = Template::parse(
        file.intent_question_template
            .as_deref()
            .unwrap_or(QuestionCatalog::DEFAULT_INTENT_TEMPLATE),
    )?;
    Ok(QuestionCatalog {
        slot_questions: unique("slot_questions", file.slot_questions)?,
        slot_descriptions: unique("slot_descriptions", file.slot_descriptions)?,
        slot_question_templates,
        intent_question_template,
    })
}

/// Fills every slot of `slot_schema` with template questions.
///
/// Each template is instantiated once per slot, with the slot's description
/// (from the schema, else from the catalog) or its tokenized name. Generated
/// questions go after any handcrafted ones and are skipped when already
/// present, so expansion is idempotent. Slots in the catalog but not in the
/// schema are left as they are.
pub fn expand_templates(
    catalog: &QuestionCatalog,
    slot_schema: &[(String, Option<String>)],
) -> Result<QuestionCatalog, CatalogError> {
    let mut out = catalog.clone();
    for (slot, description) in slot_schema {
        let filler = description
            .clone()
            .or_else(|| catalog.slot_descriptions.get(slot).cloned())
            .unwrap_or_else(|| tokenize_label(slot));
        let questions = out.slot_questions.entry(slot.clone()).or_default();
        for template in &catalog.slot_question_templates {
            let q = template.fill(&filler);
            if !questions.contains(&q) {
                questions.push(q);
            }
        }
        if questions.is_empty() {
            return Err(CatalogError::NoQuestions(slot.clone()));
        }
    }
    Ok(out)
}

/// The yes/no question asked about one intent label.
pub fn intent_question(intent_label: &str, template: &Template) -> String {
    template.fill(&tokenize_label(intent_label))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(slots: &[(&str, Option<&str>)]) -> Vec<(String, Option<String>)> {
        slots
            .iter()
            .map(|(s, d)| (s.to_string(), d.map(str::to_string)))
            .collect()
    }

    #[test]
    fn loads_handcrafted_questions_in_order() {
        let catalog = load_catalog(
            r#"{"slot_questions": {"cuisine": ["what cuisine was mentioned?", "what type of food was specified?"]}}"#,
        )
        .unwrap();
        assert_eq!(
            catalog.questions_for("cuisine").unwrap(),
            ["what cuisine was mentioned?", "what type of food was specified?"]
        );
        assert_eq!(
            catalog.intent_question_template.as_str(),
            QuestionCatalog::DEFAULT_INTENT_TEMPLATE
        );
    }

    #[test]
    fn empty_question_list_loads() {
        let catalog = load_catalog(r#"{"slot_questions": {"area": []}}"#).unwrap();
        assert_eq!(catalog.questions_for("area"), Some(&[][..]));
    }

    #[test]
    fn load_errors() {
        assert_eq!(
            load_catalog(r#"{"slot_question_templates": ["what {} was {} mentioned?"]}"#),
            Err(CatalogError::Placeholder {
                template: "what {} was {} mentioned?".into(),
                found: 2
            })
        );
        assert!(matches!(
            load_catalog(r#"{"intent_question_template": "no placeholder"}"#),
            Err(CatalogError::Placeholder { found: 0, .. })
        ));
        assert_eq!(
            load_catalog(r#"{"slot_questions": {"a": ["x?"], "a": ["y?"]}}"#),
            Err(CatalogError::DuplicateSlot {
                section: "slot_questions",
                slot: "a".into()
            })
        );
        assert!(matches!(
            load_catalog(r#"{"slot_question": {}}"#),
            Err(CatalogError::Format(_))
        ));
    }

    #[test]
    fn template_uses_tokenized_name() {
        let catalog = load_catalog(r#"{"slot_question_templates": ["what {} was mentioned?"]}"#)
            .unwrap();
        let expanded = expand_templates(&catalog, &schema(&[("price_range", None)])).unwrap();
        assert_eq!(
            expanded.questions_for("price_range").unwrap(),
            ["what price range was mentioned?"]
        );
    }

    #[test]
    fn template_prefers_description() {
        let catalog = load_catalog(
            r#"{"slot_descriptions": {"area": "part of town"}, "slot_question_templates": ["what {} was mentioned?"]}"#,
        )
        .unwrap();
        let expanded = expand_templates(&catalog, &schema(&[("area", None)])).unwrap();
        assert_eq!(
            expanded.questions_for("area").unwrap(),
            ["what part of town was mentioned?"]
        );
        let from_schema =
            expand_templates(&catalog, &schema(&[("area", Some("neighbourhood"))])).unwrap();
        assert_eq!(
            from_schema.questions_for("area").unwrap(),
            ["what neighbourhood was mentioned?"]
        );
    }

    #[test]
    fn handcrafted_questions_come_first() {
        let catalog = QuestionCatalog {
            slot_question_templates: vec![Template::parse("what {} was mentioned?").unwrap()],
            ..Default::default()
        }
        .with_slot("cuisine", ["what cuisine?", "what type of food was specified?"]);
        let expanded = expand_templates(&catalog, &schema(&[("cuisine", None)])).unwrap();
        assert_eq!(
            expanded.questions_for("cuisine").unwrap(),
            [
                "what cuisine?",
                "what type of food was specified?",
                "what cuisine was mentioned?"
            ]
        );
    }

    #[test]
    fn slot_without_questions_is_an_error() {
        let catalog = QuestionCatalog::default();
        assert_eq!(
            expand_templates(&catalog, &schema(&[("area", None)])),
            Err(CatalogError::NoQuestions("area".into()))
        );
    }

    #[test]
    fn intent_questions() {
        let default = QuestionCatalog::default().intent_question_template;
        assert_eq!(
            intent_question("atis_flight", &default),
            "is the intent asking about atis flight?"
        );
        assert_eq!(
            intent_question("inform", &default),
            "is the intent asking about inform?"
        );
        let custom = Template::parse("does the user want {}?").unwrap();
        assert_eq!(
            intent_question("booking", &custom),
            "does the user want booking?"
        );
    }

    #[test]
    fn label_tokenization() {
        assert_eq!(tokenize_label("fromloc.city_name"), "fromloc city name");
        assert_eq!(tokenize_label("B-Depart-Time"), "b depart time");
        assert_eq!(tokenize_label("price range"), "price range");
    }
}
