//! Flat `key = value` text with `#` comment lines and `[section]` headers.
//! Used for run configs, reports and prototype records.

use std::fmt;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl fmt::Display) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    /// Leading comment lines, written without the `# ` prefix.
    pub comments: Vec<String>,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn section_mut(&mut self, name: &str) -> &mut Section {
        if let Some(i) = self.sections.iter().position(|s| s.name == name) {
            &mut self.sections[i]
        } else {
            self.sections.push(Section::new(name));
            self.sections.last_mut().expect("just pushed")
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section)?.get(key)
    }

    /// Parses the notation. Entries before the first header land in a
    /// section named `""`. Repeated keys within a section are errors.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut doc = Document::default();
        let mut current: Option<usize> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| format!("line {}: unterminated section header", n + 1))?
                    .trim();
                if doc.section(name).is_some() {
                    return Err(format!("line {}: duplicate section [{name}]", n + 1));
                }
                doc.sections.push(Section::new(name));
                current = Some(doc.sections.len() - 1);
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(format!("line {}: empty key", n + 1));
            }
            let idx = match current {
                Some(i) => i,
                None => {
                    doc.sections.insert(0, Section::new(""));
                    current = Some(0);
                    0
                }
            };
            let sec = &mut doc.sections[idx];
            if sec.get(k).is_some() {
                return Err(format!("line {}: duplicate key {k:?}", n + 1));
            }
            sec.entries.push((k.to_string(), v.to_string()));
        }
        Ok(doc)
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.comments {
            writeln!(f, "# {c}")?;
        }
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 || !self.comments.is_empty() {
                writeln!(f)?;
            }
            if !s.name.is_empty() {
                writeln!(f, "[{}]", s.name)?;
            }
            for (k, v) in &s.entries {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sections_and_comments() {
        let doc = Document::parse(
            "# top\nseed = 3\n\n[train]\n# note\nsteps = 100\nlr=0.001\n[guide]\nalpha = 2.5\n",
        )
        .unwrap();
        assert_eq!(doc.get("", "seed"), Some("3"));
        assert_eq!(doc.get("train", "lr"), Some("0.001"));
        assert_eq!(doc.get("guide", "alpha"), Some("2.5"));
    }

    #[test]
    fn duplicates_and_garbage_rejected() {
        assert!(Document::parse("a = 1\na = 2").is_err());
        assert!(Document::parse("[x]\n[x]").is_err());
        assert!(Document::parse("just words").is_err());
        assert!(Document::parse("[open").is_err());
    }

    #[test]
    fn display_round_trips() {
        let mut doc = Document {
            comments: vec!["report".into()],
            ..Document::default()
        };
        doc.section_mut("run").set("seed", 7).set("mode", "mixture2d");
        doc.section_mut("result").set("accuracy", 0.91);
        let text = doc.to_string();
        let back = Document::parse(&text).unwrap();
        assert_eq!(back.sections, doc.sections);
    }
}
