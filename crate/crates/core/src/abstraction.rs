//! Online log template mining with a fixed-depth parse tree.
//!
//! Lines are masked (IPs, paths, hex, integers), split on whitespace and routed
//! through a tree keyed first by token count and then by the leading tokens.
//! Each leaf holds a small group of templates; a line joins the most similar
//! template when the positional match ratio reaches the similarity threshold,
//! turning every disagreeing position into a wildcard, and otherwise starts a
//! new template.
//!
//! ```text
//!            root
//!             |
//!        token count (6)
//!             |
//!          "Took"
//!             |
//!           "<*>"        numeric / masked tokens share one branch
//!             |
//!   [Took <*> seconds to build instances]
//! ```

use std::borrow::Cow;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::path::Path;

use regex::Regex;

use crate::error::{Error, Result};

/// Placeholder for the dynamic part of a message.
pub const WILDCARD: &str = "<*>";

pub const TEMPLATES_HEADER: &str = "ncc-templates v1";

/// Stable identifier of a mined template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(u32);

impl EventId {
    /// Reserved id for lines that match nothing in a frozen miner. Never scored.
    pub const UNKNOWN: EventId = EventId(u32::MAX);

    pub const fn new(raw: u32) -> Self {
        EventId(raw)
    }

    pub const fn raw(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_unknown(self) -> bool {
        self == Self::UNKNOWN
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unknown() {
            f.write_str("UNKNOWN")
        } else {
            write!(f, "e{}", self.0)
        }
    }
}

/// A regex rewrite applied to raw lines before tokenization.
///
/// If the pattern has a capture group named `v`, only that group is replaced,
/// which lets a rule require a delimiter in front of the masked value without
/// swallowing it.
#[derive(Clone, Debug)]
pub struct MaskRule {
    pattern: Regex,
    placeholder: String,
}

impl MaskRule {
    pub fn new(pattern: &str, placeholder: impl Into<String>) -> Result<Self> {
        let pattern = Regex::new(pattern)
            .map_err(|e| Error::invalid(format!("mask rule {pattern:?}: {e}")))?;
        let placeholder = placeholder.into();
        if placeholder.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "mask placeholder {placeholder:?} must not contain whitespace"
            )));
        }
        Ok(MaskRule {
            pattern,
            placeholder,
        })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }

    pub fn placeholder(&self) -> &str {
        &self.placeholder
    }

    pub fn apply<'a>(&self, text: &'a str) -> Cow<'a, str> {
        let mut out = String::new();
        let mut last = 0;
        let mut changed = false;
        for caps in self.pattern.captures_iter(text) {
            let m = caps
                .name("v")
                .or_else(|| caps.get(0))
                .expect("group 0 always present");
            if m.start() < last {
                continue;
            }
            out.push_str(&text[last..m.start()]);
            out.push_str(&self.placeholder);
            last = m.end();
            changed = true;
        }
        if !changed {
            return Cow::Borrowed(text);
        }
        out.push_str(&text[last..]);
        Cow::Owned(out)
    }
}

impl PartialEq for MaskRule {
    fn eq(&self, other: &Self) -> bool {
        self.pattern.as_str() == other.pattern.as_str() && self.placeholder == other.placeholder
    }
}

/// IPv4 addresses, absolute paths (with optional `:line`), hex constants and
/// bare integers, in that order.
pub fn builtin_mask_rules() -> Vec<MaskRule> {
    const RULES: [&str; 4] = [
        r"\b\d{1,3}(?:\.\d{1,3}){3}(?::\d+)?\b",
        r#"(?:^|[\s=:,;(\[{'"])(?P<v>/[\w.\-]+(?:/[\w.\-]+)*/?(?::\d+)?)"#,
        r"\b0[xX][0-9a-fA-F]+\b",
        r"\b\d+\b",
    ];
    RULES
        .iter()
        .map(|p| MaskRule::new(p, WILDCARD).expect("built-in rule compiles"))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbstractionConfig {
    /// Tree depth counting the token-count level and the leaf level; the tree
    /// routes on the first `tree_depth - 2` tokens.
    pub tree_depth: usize,
    pub similarity_threshold: f64,
    pub max_children: usize,
    pub mask_rules: Vec<MaskRule>,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        AbstractionConfig {
            tree_depth: 4,
            similarity_threshold: 0.4,
            max_children: 100,
            mask_rules: builtin_mask_rules(),
        }
    }
}

impl AbstractionConfig {
    /// Defaults without any masking; only tree merging abstracts values.
    pub fn without_masks() -> Self {
        AbstractionConfig {
            mask_rules: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.tree_depth < 2 {
            problems.push(format!("tree_depth must be >= 2, got {}", self.tree_depth));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            problems.push(format!(
                "similarity_threshold must be in (0, 1], got {}",
                self.similarity_threshold
            ));
        }
        if self.max_children < 1 {
            problems.push("max_children must be >= 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn prefix_len(&self, token_count: usize) -> usize {
        (self.tree_depth - 2).min(token_count)
    }
}

/// Applies the mask rules in order, then splits on runs of whitespace.
pub fn preprocess(line: &str, config: &AbstractionConfig) -> Vec<String> {
    let mut text = Cow::Borrowed(line);
    for rule in &config.mask_rules {
        if let Cow::Owned(s) = rule.apply(&text) {
            text = Cow::Owned(s);
        }
    }
    text.split_whitespace().map(str::to_owned).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Literal(String),
    Wildcard,
}

impl Token {
    fn from_text(text: &str) -> Self {
        if text == WILDCARD {
            Token::Wildcard
        } else {
            Token::Literal(text.to_owned())
        }
    }

    fn as_str(&self) -> &str {
        match self {
            Token::Literal(s) => s,
            Token::Wildcard => WILDCARD,
        }
    }

    fn matches(&self, token: &str) -> bool {
        match self {
            Token::Wildcard => true,
            Token::Literal(s) => s == token,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogTemplate {
    pub event_id: EventId,
    pub tokens: Vec<Token>,
    pub match_count: u64,
}

impl LogTemplate {
    pub fn text(&self) -> String {
        let parts: Vec<&str> = self.tokens.iter().map(Token::as_str).collect();
        parts.join(" ")
    }

    pub fn wildcard_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == Token::Wildcard)
            .map(|(i, _)| i)
            .collect()
    }

    fn literal_hits(&self, tokens: &[String]) -> usize {
        self.tokens
            .iter()
            .zip(tokens)
            .filter(|(t, s)| matches!(t, Token::Literal(l) if l == *s))
            .count()
    }

    fn absorb(&mut self, tokens: &[String]) {
        for (slot, tok) in self.tokens.iter_mut().zip(tokens) {
            if let Token::Literal(l) = slot {
                if l != tok {
                    *slot = Token::Wildcard;
                }
            }
        }
        self.match_count += 1;
    }
}

/// Fraction of positions where the token equals the template literal or the
/// template holds a wildcard. Lengths must agree.
pub fn seq_similarity(tokens: &[String], template: &LogTemplate) -> Result<f64> {
    if tokens.len() != template.tokens.len() {
        return Err(Error::Invariant(format!(
            "similarity of {} tokens against a {}-token template",
            tokens.len(),
            template.tokens.len()
        )));
    }
    Ok(similarity_unchecked(tokens, template))
}

fn similarity_unchecked(tokens: &[String], template: &LogTemplate) -> f64 {
    if tokens.is_empty() {
        return 1.0;
    }
    let hits = template
        .tokens
        .iter()
        .zip(tokens)
        .filter(|(t, s)| t.matches(s))
        .count();
    hits as f64 / tokens.len() as f64
}

// Tokens with digits never get their own branch; they share the catch-all child.
fn is_variable(token: &str) -> bool {
    token == WILDCARD || token.bytes().any(|b| b.is_ascii_digit())
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Node {
    children: HashMap<String, Node>,
    templates: Vec<EventId>,
}

impl Node {
    fn literal_children(&self) -> usize {
        self.children.len() - usize::from(self.children.contains_key(WILDCARD))
    }
}

/// One log file abstracted into event ids, one per non-empty line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSequence {
    pub source: String,
    pub events: Vec<EventId>,
    /// Zero-based index of the originating line for each entry of `events`.
    pub line_indices: Vec<usize>,
}

impl EventSequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Distinct known events in first-occurrence order.
    pub fn distinct_events(&self) -> Vec<EventId> {
        let mut seen = std::collections::HashSet::new();
        self.events
            .iter()
            .copied()
            .filter(|e| !e.is_unknown() && seen.insert(*e))
            .collect()
    }

    pub fn lines_of(&self, event: EventId) -> Vec<usize> {
        self.events
            .iter()
            .zip(&self.line_indices)
            .filter(|(e, _)| **e == event)
            .map(|(_, &i)| i)
            .collect()
    }
}

/// Parse tree plus template registry.
///
/// Training (`parse_*` on `&mut self`) is single-writer. Once [`freeze`]d, or
/// through the `match_*` methods on `&self`, the miner never changes and unseen
/// lines map to [`EventId::UNKNOWN`].
///
/// [`freeze`]: MinerState::freeze
#[derive(Clone, Debug, PartialEq)]
pub struct MinerState {
    config: AbstractionConfig,
    by_length: HashMap<usize, Node>,
    templates: Vec<LogTemplate>,
    frozen: bool,
}

impl MinerState {
    pub fn new(config: AbstractionConfig) -> Result<Self> {
        config.validate()?;
        Ok(MinerState {
            config,
            by_length: HashMap::new(),
            templates: Vec::new(),
            frozen: false,
        })
    }

    pub fn config(&self) -> &AbstractionConfig {
        &self.config
    }

    pub fn templates(&self) -> &[LogTemplate] {
        &self.templates
    }

    pub fn template(&self, id: EventId) -> Option<&LogTemplate> {
        if id.is_unknown() {
            return None;
        }
        self.templates.get(id.index())
    }

    pub fn template_text(&self, id: EventId) -> String {
        self.template(id)
            .map(LogTemplate::text)
            .unwrap_or_else(|| id.to_string())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Parses one line, creating or generalizing templates unless frozen.
    /// Returns `None` for blank lines.
    pub fn parse_line(&mut self, line: &str) -> Option<EventId> {
        if self.frozen {
            return self.match_line(line);
        }
        let tokens = preprocess(line, &self.config);
        if tokens.is_empty() {
            return None;
        }
        Some(self.learn(&tokens))
    }

    /// Read-only lookup: the best template at or above the threshold, else UNKNOWN.
    pub fn match_line(&self, line: &str) -> Option<EventId> {
        let tokens = preprocess(line, &self.config);
        if tokens.is_empty() {
            return None;
        }
        Some(self.match_tokens(&tokens))
    }

    pub fn parse_log<S: AsRef<str>>(&mut self, source: &str, lines: &[S]) -> EventSequence {
        let mut seq = EventSequence {
            source: source.to_owned(),
            events: Vec::new(),
            line_indices: Vec::new(),
        };
        for (i, line) in lines.iter().enumerate() {
            if let Some(id) = self.parse_line(line.as_ref()) {
                seq.events.push(id);
                seq.line_indices.push(i);
            }
        }
        seq
    }

    pub fn match_log<S: AsRef<str>>(&self, source: &str, lines: &[S]) -> EventSequence {
        let mut seq = EventSequence {
            source: source.to_owned(),
            events: Vec::new(),
            line_indices: Vec::new(),
        };
        for (i, line) in lines.iter().enumerate() {
            if let Some(id) = self.match_line(line.as_ref()) {
                seq.events.push(id);
                seq.line_indices.push(i);
            }
        }
        seq
    }

    pub fn parse_file(&mut self, path: &Path) -> Result<EventSequence> {
        let lines = read_log_lines(path)?;
        Ok(self.parse_log(&source_name(path), &lines))
    }

    pub fn match_file(&self, path: &Path) -> Result<EventSequence> {
        let lines = read_log_lines(path)?;
        Ok(self.match_log(&source_name(path), &lines))
    }

    fn learn(&mut self, tokens: &[String]) -> EventId {
        let max_children = self.config.max_children;
        let threshold = self.config.similarity_threshold;
        let prefix = self.config.prefix_len(tokens.len());

        let mut node = self.by_length.entry(tokens.len()).or_default();
        for tok in &tokens[..prefix] {
            let key = if is_variable(tok) {
                WILDCARD
            } else if node.children.contains_key(tok.as_str())
                || node.literal_children() < max_children
            {
                tok.as_str()
            } else {
                WILDCARD
            };
            node = node.children.entry(key.to_owned()).or_default();
        }

        if let Some((id, sim)) = best_match(&node.templates, &self.templates, tokens) {
            if sim >= threshold {
                self.templates[id.index()].absorb(tokens);
                return id;
            }
        }

        let id = EventId(self.templates.len() as u32);
        node.templates.push(id);
        self.templates.push(LogTemplate {
            event_id: id,
            tokens: tokens.iter().map(|t| Token::from_text(t)).collect(),
            match_count: 1,
        });
        id
    }

    fn match_tokens(&self, tokens: &[String]) -> EventId {
        let Some(mut node) = self.by_length.get(&tokens.len()) else {
            return EventId::UNKNOWN;
        };
        for tok in &tokens[..self.config.prefix_len(tokens.len())] {
            let exact = if is_variable(tok) {
                None
            } else {
                node.children.get(tok.as_str())
            };
            match exact.or_else(|| node.children.get(WILDCARD)) {
                Some(child) => node = child,
                None => return EventId::UNKNOWN,
            }
        }
        match best_match(&node.templates, &self.templates, tokens) {
            Some((id, sim)) if sim >= self.config.similarity_threshold => id,
            _ => EventId::UNKNOWN,
        }
    }

    /// Hash of the template registry, for checking that read-only use left it untouched.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.templates.len().hash(&mut h);
        for t in &self.templates {
            t.event_id.hash(&mut h);
            t.tokens.hash(&mut h);
            t.match_count.hash(&mut h);
        }
        h.finish()
    }

    /// Writes the registry as `event_id<TAB>match_count<TAB>template`.
    pub fn export_templates<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{TEMPLATES_HEADER}")?;
        writeln!(out, "count\t{}", self.templates.len())?;
        for t in &self.templates {
            writeln!(out, "{}\t{}\t{}", t.event_id.raw(), t.match_count, t.text())?;
        }
        Ok(())
    }

    /// Rebuilds a miner from an exported registry.
    ///
    /// Replaying the templates in id order recreates the tree exactly: nodes are
    /// only ever created alongside a new template, routed on tokens that merging
    /// cannot alter. The result is frozen.
    pub fn import_templates<R: BufRead>(config: AbstractionConfig, input: &mut R) -> Result<Self> {
        let mut state = MinerState::new(config)?;
        let header = next_line(input, "templates header")?;
        if header != TEMPLATES_HEADER {
            return Err(Error::format(
                "templates header",
                format!("expected {TEMPLATES_HEADER:?}, found {header:?}"),
            ));
        }
        let count_line = next_line(input, "templates count")?;
        let count: usize = count_line
            .strip_prefix("count\t")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::format("templates count", count_line.clone()))?;
        for expected in 0..count {
            let line = next_line(input, "template row")?;
            let mut parts = line.splitn(3, '\t');
            let (Some(id), Some(matched), Some(text)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::format("template row", line.clone()));
            };
            if id.parse::<usize>().ok() != Some(expected) {
                return Err(Error::format(
                    "template id",
                    format!("expected {expected}, found {id:?}"),
                ));
            }
            let match_count: u64 = matched
                .parse()
                .map_err(|_| Error::format("template match_count", matched.to_owned()))?;
            let tokens: Vec<String> = text.split(' ').map(str::to_owned).collect();
            if tokens.iter().any(String::is_empty) {
                return Err(Error::format("template text", text.to_owned()));
            }
            state.insert_template(&tokens, match_count);
        }
        state.frozen = true;
        Ok(state)
    }

    fn insert_template(&mut self, tokens: &[String], match_count: u64) {
        let max_children = self.config.max_children;
        let prefix = self.config.prefix_len(tokens.len());
        let mut node = self.by_length.entry(tokens.len()).or_default();
        for tok in &tokens[..prefix] {
            let key = if is_variable(tok) {
                WILDCARD
            } else if node.children.contains_key(tok.as_str())
                || node.literal_children() < max_children
            {
                tok.as_str()
            } else {
                WILDCARD
            };
            node = node.children.entry(key.to_owned()).or_default();
        }
        let id = EventId(self.templates.len() as u32);
        node.templates.push(id);
        self.templates.push(LogTemplate {
            event_id: id,
            tokens: tokens.iter().map(|t| Token::from_text(t)).collect(),
            match_count,
        });
    }
}

// Highest similarity wins; ties go to more literal agreement, then the older template.
fn best_match(
    candidates: &[EventId],
    templates: &[LogTemplate],
    tokens: &[String],
) -> Option<(EventId, f64)> {
    let mut best: Option<(EventId, f64, usize)> = None;
    for &id in candidates {
        let t = &templates[id.index()];
        let sim = similarity_unchecked(tokens, t);
        let hits = t.literal_hits(tokens);
        let better = match best {
            None => true,
            Some((_, bs, bh)) => sim > bs || (sim == bs && hits > bh),
        };
        if better {
            best = Some((id, sim, hits));
        }
    }
    best.map(|(id, sim, _)| (id, sim))
}

fn next_line<R: BufRead>(input: &mut R, field: &str) -> Result<String> {
    let mut line = String::new();
    let n = input
        .read_line(&mut line)
        .map_err(|e| Error::format(field, e.to_string()))?;
    if n == 0 {
        return Err(Error::format(field, "unexpected end of file"));
    }
    while line.ends_with('\n') || line.ends_with('\r') {
        line.pop();
    }
    Ok(line)
}

pub(crate) fn source_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads a log file line by line; invalid UTF-8 is replaced, never fatal.
pub fn read_log_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_owned())
        .collect())
}
