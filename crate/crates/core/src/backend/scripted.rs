use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, CompletionRequest};

/// One scripted rule. A rule matches when the prompt contains every `when`
/// substring (case-sensitive) and, if given, the regex matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, deserialize_with = "one_or_many")]
    pub when: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regex: Option<String>,
    pub respond: String,
}

impl ScriptRule {
    pub fn contains(needle: impl Into<String>, respond: impl Into<String>) -> Self {
        Self {
            when: vec![needle.into()],
            regex: None,
            respond: respond.into(),
        }
    }

    pub fn all_of<I, S>(needles: I, respond: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            when: needles.into_iter().map(Into::into).collect(),
            regex: None,
            respond: respond.into(),
        }
    }
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug)]
struct Compiled {
    rule: ScriptRule,
    regex: Option<Regex>,
}

impl Compiled {
    fn matches(&self, prompt: &str) -> bool {
        self.rule.when.iter().all(|w| prompt.contains(w.as_str()))
            && self.regex.as_ref().is_none_or(|re| re.is_match(prompt))
    }
}

/// Deterministic stand-in for a language model: the first rule whose
/// matcher accepts the prompt supplies the response, else the default.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<Compiled>,
    default_response: String,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    /// Panics if a rule's regex does not compile; use [`ScriptedBackend::try_new`]
    /// for untrusted input.
    pub fn new(rules: Vec<ScriptRule>, default_response: impl Into<String>) -> Self {
        Self::try_new(rules, default_response).expect("invalid scripted rule regex")
    }

    pub fn try_new(
        rules: Vec<ScriptRule>,
        default_response: impl Into<String>,
    ) -> Result<Self, regex::Error> {
        let rules = rules
            .into_iter()
            .map(|rule| {
                let regex = rule.regex.as_deref().map(Regex::new).transpose()?;
                Ok(Compiled { rule, regex })
            })
            .collect::<Result<Vec<_>, regex::Error>>()?;
        Ok(Self {
            rules,
            default_response: default_response.into(),
            prompts: Mutex::new(Vec::new()),
        })
    }

    /// Pure lookup, without recording the call.
    pub fn respond(&self, prompt: &str) -> &str {
        self.rules
            .iter()
            .find(|r| r.matches(prompt))
            .map_or(self.default_response.as_str(), |r| r.rule.respond.as_str())
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("scripted log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.prompts.lock().expect("scripted log poisoned").len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        self.prompts
            .lock()
            .expect("scripted log poisoned")
            .push(request.prompt.clone());
        Ok(self.respond(&request.prompt).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(p: &str) -> CompletionRequest {
        CompletionRequest::new("test", p)
    }

    #[test]
    fn first_match_then_default() {
        let b = ScriptedBackend::new(
            vec![
                ScriptRule::contains("store", "SUBTASK: go to store"),
                ScriptRule::contains("st", "never reached for store prompts"),
            ],
            "idle",
        );
        assert_eq!(b.complete(&req("walk to the store")).unwrap(), "SUBTASK: go to store");
        assert_eq!(b.complete(&req("nothing here")).unwrap(), "idle");
        assert_eq!(b.call_count(), 2);
    }

    #[test]
    fn all_of_and_regex() {
        let b = ScriptedBackend::new(
            vec![
                ScriptRule::all_of(["GOAL", "tea"], "A"),
                ScriptRule { when: vec![], regex: Some(r"TURN: [4-9]".into()), respond: "END".into() },
            ],
            "x",
        );
        assert_eq!(b.respond("GOAL: tea"), "A");
        assert_eq!(b.respond("GOAL: coffee"), "x");
        assert_eq!(b.respond("TURN: 5"), "END");
    }

    #[test]
    fn rule_json_accepts_single_or_list() {
        let r: ScriptRule = serde_json::from_str(r#"{"when": "a", "respond": "b"}"#).unwrap();
        assert_eq!(r.when, vec!["a"]);
        let r: ScriptRule = serde_json::from_str(r#"{"when": ["a", "c"], "respond": "b"}"#).unwrap();
        assert_eq!(r.when.len(), 2);
    }

    #[test]
    fn bad_regex_is_an_error() {
        let rule = ScriptRule { when: vec![], regex: Some("(".into()), respond: "x".into() };
        assert!(ScriptedBackend::try_new(vec![rule], "").is_err());
    }
}
