use crate::error::{Error, Result};

pub const DEFAULT_TEMPLATE: &str = "Context: {contexts}\n\nQuestion: {question}\nAnswer:";
pub const CONTEXTS: &str = "{contexts}";
pub const QUESTION: &str = "{question}";

/// Prompt template with `{contexts}` and `{question}` placeholders.
///
/// Contexts are joined by blank lines in the order given. With no contexts the
/// prompt starts at the line holding `{question}`, so nothing of the context
/// section is emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    template: String,
    doc_char_budget: usize,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            template: DEFAULT_TEMPLATE.to_string(),
            doc_char_budget: 1500,
        }
    }
}

impl PromptTemplate {
    pub fn new(template: impl Into<String>, doc_char_budget: usize) -> Result<Self> {
        let template = template.into();
        for p in [CONTEXTS, QUESTION] {
            if !template.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "prompt template lacks the {p} placeholder"
                )));
            }
        }
        Ok(PromptTemplate {
            template,
            doc_char_budget,
        })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn doc_char_budget(&self) -> usize {
        self.doc_char_budget
    }

    fn truncate<'a>(&self, text: &'a str) -> &'a str {
        match text.char_indices().nth(self.doc_char_budget) {
            Some((i, _)) => &text[..i],
            None => text,
        }
    }

    pub fn render<S: AsRef<str>>(&self, question: &str, contexts: &[S]) -> String {
        if contexts.is_empty() {
            let q = self.template.find(QUESTION).unwrap_or(0);
            let line_start = self.template[..q].rfind('\n').map_or(0, |i| i + 1);
            let tail = &self.template[line_start..];
            return tail.replace(CONTEXTS, "").replace(QUESTION, question);
        }
        let joined = contexts
            .iter()
            .map(|c| self.truncate(c.as_ref()))
            .collect::<Vec<_>>()
            .join("\n\n");
        // Substitute the question first so a question containing the
        // contexts placeholder text is never expanded.
        let (head, tail) = self.template.split_at(self.template.find(CONTEXTS).unwrap_or(0));
        let tail = &tail[CONTEXTS.len()..];
        format!(
            "{}{}{}",
            head.replace(QUESTION, question),
            joined,
            tail.replace(QUESTION, question)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let t = PromptTemplate::default();
        assert_eq!(
            t.render("who?", &["doc one"]),
            "Context: doc one\n\nQuestion: who?\nAnswer:"
        );
    }

    #[test]
    fn no_contexts_keeps_only_question_section() {
        let t = PromptTemplate::default();
        let none: [&str; 0] = [];
        assert_eq!(t.render("who?", &none), "Question: who?\nAnswer:");
    }

    #[test]
    fn rank_order_preserved() {
        let p = PromptTemplate::default().render("q", &["first", "second"]);
        assert!(p.find("first").unwrap() < p.find("second").unwrap());
        assert!(p.contains("first\n\nsecond"));
    }

    #[test]
    fn missing_placeholder() {
        assert!(PromptTemplate::new("Context: {contexts}", 10).is_err());
        assert!(PromptTemplate::new("Q: {question}", 10).is_err());
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        let t = PromptTemplate::new("{contexts}|{question}", 3).unwrap();
        assert_eq!(t.render("q", &["ééééé"]), "ééé|q");
    }
}
