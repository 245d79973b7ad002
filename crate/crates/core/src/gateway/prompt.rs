use std::collections::HashMap;
use std::sync::LazyLock;

use regex::{Captures, Regex};

use super::GatewayError;
use crate::model::{PromptCondition, PromptTemplate};

/// Control instruction used for the non-prompted captioning condition.
pub const BARE_DESCRIBE_PROMPT: &str = "Describe the image.";

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

/// Names of the `{placeholders}` in `body`, in order of first appearance.
pub fn placeholders(body: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for c in PLACEHOLDER.captures_iter(body) {
        if !names.iter().any(|n| n == &c[1]) {
            names.push(c[1].to_string());
        }
    }
    names
}

/// Substitutes every `{name}` in the template body in a single pass.
/// Extra variables are ignored; substituted values are not re-scanned.
pub fn render_prompt(
    t: &PromptTemplate,
    vars: &HashMap<String, String>,
) -> Result<String, GatewayError> {
    if let Some(missing) = placeholders(&t.body)
        .into_iter()
        .find(|n| !vars.contains_key(n))
    {
        return Err(GatewayError::MissingVar(missing));
    }
    Ok(PLACEHOLDER
        .replace_all(&t.body, |c: &Captures| vars[&c[1]].clone())
        .into_owned())
}

/// English number word for small counts, so the default quiz template reads
/// naturally ("exactly two ...").
pub fn number_word(n: u32) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS
        .get(n as usize)
        .map(|w| w.to_string())
        .unwrap_or_else(|| n.to_string())
}

/// Prompt text sent to the captioning model.
pub fn describe_prompt(
    condition: PromptCondition,
    template: &PromptTemplate,
) -> Result<String, GatewayError> {
    match condition {
        PromptCondition::Bare => Ok(BARE_DESCRIBE_PROMPT.to_string()),
        PromptCondition::Prompted => render_prompt(template, &HashMap::new()),
    }
}

/// Prompt text sent to the quiz model for one description.
pub fn quiz_prompt(
    description_text: &str,
    n_questions: u32,
    template: &PromptTemplate,
) -> Result<String, GatewayError> {
    let vars = HashMap::from([
        ("description".to_string(), description_text.to_string()),
        ("n_questions".to_string(), number_word(n_questions)),
    ]);
    render_prompt(template, &vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TemplateTask, DEFAULT_QUIZ_PROMPT};

    fn vars(pairs: &[(&str, &str)]) -> HashMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn quiz_template_substitution() {
        let t = PromptTemplate::default_quiz();
        let out = render_prompt(
            &t,
            &vars(&[("description", "a boy writes"), ("n_questions", "2")]),
        )
        .unwrap();
        assert!(out.contains("a boy writes"));
        assert!(!out.contains('{') && !out.contains('}'));
    }

    #[test]
    fn describe_template_renders_unchanged() {
        let t = PromptTemplate::default_describe();
        let out = render_prompt(&t, &HashMap::new()).unwrap();
        assert_eq!(
            out,
            "Describe the image accurately and concisely. Focus on objects, actions, people, animals, colors, verbs, adjective. Avoid mentioning brand names. The response must be a single, clear paragraph in english..."
        );
    }

    #[test]
    fn missing_var() {
        let t = PromptTemplate::default_quiz();
        let err = render_prompt(&t, &vars(&[("description", "x")])).unwrap_err();
        assert_eq!(err, GatewayError::MissingVar("n_questions".into()));
    }

    #[test]
    fn extra_vars_ignored_and_values_not_rescanned() {
        let t = PromptTemplate::new(
            "t",
            TemplateTask::GenerateQuiz,
            "{description} / {n_questions}",
        )
        .unwrap();
        let out = render_prompt(
            &t,
            &vars(&[
                ("description", "{n_questions}"),
                ("n_questions", "3"),
                ("x", "y"),
            ]),
        )
        .unwrap();
        assert_eq!(out, "{n_questions} / 3");
    }

    #[test]
    fn two_questions_reproduces_table_text() {
        let out = quiz_prompt("desc", 2, &PromptTemplate::default_quiz()).unwrap();
        assert!(out.starts_with("You are an expert Arabic language tutor"));
        assert!(out.contains("Your task is to generate exactly two beginner-to-intermediate level multiple-choice questions"));
        assert!(out.contains("- Question 1: What is the boy doing? a) يَكْتُبُ b) يَجْلِسُ c) يَأْكُلُ d) يَشْرَبُ Correct answer: a) يَكْتُبُ"));
        assert!(DEFAULT_QUIZ_PROMPT
            .contains("Only output the questions and answers in the format above."));
        assert_eq!(number_word(3), "three");
        assert_eq!(number_word(42), "42");
    }
}
