use std::collections::BTreeMap;

use regex::Regex;

use super::AgentError;

pub const GENERATE: &str = include_str!("../../assets/prompts/generate.v1.txt");
pub const GENERATE_UNASSISTED: &str = include_str!("../../assets/prompts/generate_unassisted.v1.txt");
pub const VALIDATE: &str = include_str!("../../assets/prompts/validate.v1.txt");
pub const REPAIR: &str = include_str!("../../assets/prompts/repair.v1.txt");

/// Template set version; bumped whenever any template text changes.
pub const PROMPT_VERSION: &str = "v1";

/// Fills `{{name}}` placeholders. Lines starting with `##` are template comments.
///
/// Every placeholder must be supplied and every supplied value must be used.
pub fn render(template: &str, vars: &BTreeMap<&str, String>) -> Result<String, AgentError> {
    let re = Regex::new(r"\{\{\s*([a-z_]+)\s*\}\}").expect("static regex");
    let body: String = template
        .lines()
        .filter(|l| !l.starts_with("##"))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut missing = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    let out = re.replace_all(&body, |c: &regex::Captures| {
        let name = c[1].to_string();
        match vars.get(name.as_str()) {
            Some(v) => {
                used.insert(name);
                v.clone()
            }
            None => {
                missing.push(name);
                String::new()
            }
        }
    });
    if !missing.is_empty() {
        return Err(AgentError::Prompt(format!("missing placeholders: {}", missing.join(", "))));
    }
    let unused: Vec<&str> = vars.keys().filter(|k| !used.contains(**k)).copied().collect();
    if !unused.is_empty() {
        return Err(AgentError::Prompt(format!("unused values: {}", unused.join(", "))));
    }
    Ok(out.trim_end().to_string() + "\n")
}

/// Renders a list section, or "(none)" when empty.
pub fn bullet_list<I, S>(items: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let lines: Vec<String> = items.into_iter().map(|s| format!("- {}", s.as_ref())).collect();
    if lines.is_empty() {
        "(none)".into()
    } else {
        lines.join("\n")
    }
}
