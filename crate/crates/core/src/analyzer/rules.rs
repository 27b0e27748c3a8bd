use std::fmt;
use std::path::Path;

use crate::corpus::schema::{tag_index, Analysis, TAG_FEATURES};
use crate::error::{Error, Result};

/// `if <feature>=<value> then <feature> in {<values>}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyRule {
    pub if_feature: usize,
    pub if_value: String,
    pub then_feature: usize,
    pub allowed: Vec<String>,
}

impl fmt::Display for ConsistencyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "if {}={} then {} in {{{}}}",
            TAG_FEATURES[self.if_feature],
            self.if_value,
            TAG_FEATURES[self.then_feature],
            self.allowed.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: ConsistencyRule,
    pub found: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated: {}={}", self.rule, TAG_FEATURES[self.rule.then_feature], self.found)
    }
}

impl ConsistencyRule {
    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let rest = line.trim().strip_prefix("if ").ok_or("rule must start with 'if '")?;
        let (cond, cons) = rest.split_once(" then ").ok_or("missing ' then '")?;
        let (cf, cv) = cond.trim().split_once('=').ok_or("condition must be feature=value")?;
        let if_feature = tag_index(cf.trim()).ok_or_else(|| format!("unknown feature {:?}", cf.trim()))?;
        let (tf, set) = cons.trim().split_once(" in ").ok_or("consequence must be 'feature in {...}'")?;
        let then_feature = tag_index(tf.trim()).ok_or_else(|| format!("unknown feature {:?}", tf.trim()))?;
        let set = set
            .trim()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or("value set must be wrapped in braces")?;
        let allowed: Vec<String> = set
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if allowed.is_empty() {
            return Err("empty value set".into());
        }
        Ok(ConsistencyRule {
            if_feature,
            if_value: cv.trim().to_string(),
            then_feature,
            allowed,
        })
    }

    pub fn check(&self, a: &Analysis) -> Option<Violation> {
        let found = &a.tags[self.then_feature];
        (a.tags[self.if_feature] == self.if_value && !self.allowed.contains(found)).then(|| Violation {
            rule: self.clone(),
            found: found.clone(),
        })
    }
}

pub fn parse_rules(text: &str, source: &str) -> Result<Vec<ConsistencyRule>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| ConsistencyRule::parse(l).map_err(|m| Error::parse(source, n + 1, m)))
        .collect()
}

pub fn load_rules(path: &Path) -> Result<Vec<ConsistencyRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rules(&text, &path.display().to_string())
}

pub const DEFAULT_RULES: &str = "\
if pos=verb then cas in {na}
if pos=verb then stt in {na}
if pos=noun then asp in {na}
if pos=noun then per in {na}
if pos=noun then mod in {na}
if pos=noun then vox in {na}
";

pub fn default_rules() -> Vec<ConsistencyRule> {
    parse_rules(DEFAULT_RULES, "default rules").expect("built-in rules parse")
}

pub fn check_consistency(analysis: &Analysis, rules: &[ConsistencyRule]) -> Vec<Violation> {
    rules.iter().filter_map(|r| r.check(analysis)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verb(cas: &str) -> Analysis {
        let cols = [
            "lam~atohum", "lam~", "verb", "0", "0", "0", "0", "3", "p", "a", "i", "f", "s", "na", cas, "dobj_3mp",
        ];
        Analysis::from_columns(&cols).unwrap()
    }

    #[test]
    fn verb_without_case_is_consistent() {
        assert!(check_consistency(&verb("na"), &default_rules()).is_empty());
    }

    #[test]
    fn verb_with_case_fires_one_rule() {
        let v = check_consistency(&verb("g"), &default_rules());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule.to_string(), "if pos=verb then cas in {na}");
        assert_eq!(v[0].found, "g");
    }

    #[test]
    fn empty_rule_set_accepts_anything() {
        assert!(check_consistency(&verb("g"), &[]).is_empty());
    }

    #[test]
    fn rule_syntax_errors() {
        assert!(ConsistencyRule::parse("if pos=verb then foo in {na}").is_err());
        assert!(ConsistencyRule::parse("pos=verb then cas in {na}").is_err());
        assert!(ConsistencyRule::parse("if pos=verb then cas in na").is_err());
        let r = ConsistencyRule::parse("if pos=noun then cas in {n, a, g}").unwrap();
        assert_eq!(r.allowed, vec!["n", "a", "g"]);
        assert!(parse_rules("# c\nif x=y then cas in {na}\n", "r").unwrap_err().to_string().starts_with("r:2:"));
    }
}
