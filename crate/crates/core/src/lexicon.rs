//! Character → component lookup with radical-variant normalization.
//!
//! A [`ComponentLexicon`] maps each character to its ordered component list.
//! The radical always sits at position 0; the remaining radical-like
//! components follow in the order the lexicon file declares them. Every
//! component is normalized through a [`VariantTable`] when the lexicon is
//! loaded, so e.g. `氵` is stored as `水`.
//!
//! Lexicon file format (UTF-8, whitespace separated, `#` starts a comment
//! line):
//!
//! ```text
//! 池 氵 也
//! 水 水
//! ```
//!
//! Variant table file format: one `<variant> <original>` pair per line.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Filler component used when a character has fewer than `M` components.
pub const PAD: &str = "<PAD>";
/// Component assigned to the radical slot of characters missing from the lexicon.
pub const UNK: &str = "<UNK>";

/// The 24 radical-variant rows, in the order they are printed in the
/// reference table (left column first, then right column, row by row).
///
/// Two rows are identities (`牛 → 牛`, `食 → 食`) and `衤` appears twice;
/// with first-mapping-wins resolution `衤` normalizes to `示`.
pub const BUILTIN_VARIANTS: [(&str, &str); 24] = [
    ("艹", "艸"),
    ("扌", "手"),
    ("亻", "人"),
    ("氵", "水"),
    ("刂", "刀"),
    ("車", "车"),
    ("犾", "犬"),
    ("攴", "支"),
    ("灬", "火"),
    ("纟", "糸"),
    ("钅", "金"),
    ("耂", "老"),
    ("麥", "麦"),
    ("牛", "牛"),
    ("亼", "食"),
    ("食", "食"),
    ("衤", "示"),
    ("忄", "心"),
    ("囧", "网"),
    ("王", "玉"),
    ("讠", "言"),
    ("衤", "衣"),
    ("月", "肉"),
    ("辵", "走"),
];

/// Maps variant component forms to their original forms.
///
/// Rows are kept exactly as given. Lookup uses the first row for each
/// variant, and chains (`a → b`, `b → c`) are resolved when the table is
/// built, which makes [`VariantTable::normalize`] idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantTable {
    rows: Vec<(String, String)>,
    resolved: HashMap<String, String>,
}

impl VariantTable {
    /// The built-in 24-row table.
    pub fn builtin() -> Self {
        Self::from_rows(BUILTIN_VARIANTS.iter().map(|&(v, o)| (v.to_string(), o.to_string())))
            .expect("built-in variant table is acyclic")
    }

    pub fn empty() -> Self {
        VariantTable {
            rows: Vec::new(),
            resolved: HashMap::new(),
        }
    }

    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let rows: Vec<(String, String)> = rows.into_iter().collect();
        let mut first: HashMap<&str, &str> = HashMap::new();
        for (variant, original) in &rows {
            first.entry(variant.as_str()).or_insert(original.as_str());
        }

        let mut resolved = HashMap::with_capacity(first.len());
        for (&variant, &original) in &first {
            let mut current = original;
            let mut seen = BTreeSet::from([variant]);
            while let Some(&next) = first.get(current) {
                if next == current {
                    break;
                }
                if !seen.insert(current) {
                    return Err(Error::VariantCycle {
                        component: variant.to_string(),
                    });
                }
                current = next;
            }
            if current == variant && original != variant {
                return Err(Error::VariantCycle {
                    component: variant.to_string(),
                });
            }
            resolved.insert(variant.to_string(), current.to_string());
        }

        Ok(VariantTable { rows, resolved })
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [variant, original] => rows.push((variant.to_string(), original.to_string())),
                _ => {
                    return Err(Error::parse(
                        origin,
                        idx + 1,
                        format!("expected `<variant> <original>`, found {} fields", fields.len()),
                    ))
                }
            }
        }
        Self::from_rows(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Table whose rows are `overrides` followed by `self`, so the overriding
    /// rows win for any variant both mention.
    pub fn overridden_by(&self, overrides: &VariantTable) -> Result<Self> {
        Self::from_rows(overrides.rows.iter().chain(self.rows.iter()).cloned())
    }

    /// Original form of `component`, or `component` itself if it is not a
    /// known variant.
    pub fn normalize<'a>(&'a self, component: &'a str) -> &'a str {
        self.resolved.get(component).map(String::as_str).unwrap_or(component)
    }

    pub fn is_variant(&self, component: &str) -> bool {
        self.resolved.contains_key(component)
    }

    /// Rows as given, including shadowed duplicates.
    pub fn rows(&self) -> &[(String, String)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Default for VariantTable {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Ordered component identifiers of one character, radical first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentList(Vec<String>);

impl ComponentList {
    pub fn new(components: Vec<String>) -> Option<Self> {
        if components.is_empty() {
            None
        } else {
            Some(ComponentList(components))
        }
    }

    pub fn radical(&self) -> &str {
        &self.0[0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl fmt::Display for ComponentList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Immutable character → component-list map.
#[derive(Debug, Clone)]
pub struct ComponentLexicon {
    entries: HashMap<char, ComponentList>,
    variants: VariantTable,
}

impl ComponentLexicon {
    /// Parses a lexicon, normalizing every component through `variants`.
    pub fn parse(text: &str, origin: &str, variants: VariantTable) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut first_line: HashMap<char, usize> = HashMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("non-empty line has a field");
            let mut chars = head.chars();
            let ch = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("expected a single character, found '{head}'"),
                    ))
                }
            };
            if let Some(&first) = first_line.get(&ch) {
                return Err(Error::DuplicateCharacter {
                    origin: origin.to_string(),
                    line: line_no,
                    first_line: first,
                    ch,
                });
            }

            let mut components = Vec::new();
            for field in fields {
                if field == PAD || field == UNK {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("'{field}' is a reserved component identifier"),
                    ));
                }
                components.push(variants.normalize(field).to_string());
            }
            let list = ComponentList::new(components).ok_or_else(|| Error::EmptyComponentList {
                origin: origin.to_string(),
                line: line_no,
                ch,
            })?;

            first_line.insert(ch, line_no);
            entries.insert(ch, list);
        }

        if entries.is_empty() {
            return Err(Error::EmptyInput {
                origin: origin.to_string(),
            });
        }
        Ok(ComponentLexicon { entries, variants })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_variants(path, VariantTable::builtin())
    }

    pub fn load_with_variants(path: impl AsRef<Path>, variants: VariantTable) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), variants)
    }

    pub fn get(&self, ch: char) -> Option<&ComponentList> {
        self.entries.get(&ch)
    }

    pub fn contains(&self, ch: char) -> bool {
        self.entries.contains_key(&ch)
    }

    pub fn variants(&self) -> &VariantTable {
        &self.variants
    }

    pub fn normalize_variant<'a>(&'a self, component: &'a str) -> &'a str {
        self.variants.normalize(component)
    }

    /// Exactly `m` components for `ch`: the stored list truncated or padded
    /// with [`PAD`], or `[UNK, PAD, ...]` when `ch` has no entry.
    pub fn components_of(&self, ch: char, m: usize) -> ComponentList {
        assert!(m >= 1, "component count must be at least 1");
        let mut out = Vec::with_capacity(m);
        match self.entries.get(&ch) {
            Some(list) => out.extend(list.iter().take(m).map(str::to_string)),
            None => out.push(UNK.to_string()),
        }
        out.resize(m, PAD.to_string());
        ComponentList(out)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in code-point order.
    pub fn iter(&self) -> impl Iterator<Item = (char, &ComponentList)> {
        let mut keys: Vec<char> = self.entries.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter().map(move |c| (c, &self.entries[&c]))
    }

    /// Every distinct component stored in the lexicon, sorted.
    pub fn component_inventory(&self) -> BTreeSet<String> {
        self.entries
            .values()
            .flat_map(|list| list.as_slice().iter().cloned())
            .collect()
    }

    /// Number of characters per component-list length.
    pub fn length_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for list in self.entries.values() {
            *hist.entry(list.len()).or_insert(0) += 1;
        }
        hist
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<ComponentLexicon> {
    ComponentLexicon::load(path)
}

pub fn normalize_variant<'a>(component: &'a str, lexicon: &'a ComponentLexicon) -> &'a str {
    lexicon.normalize_variant(component)
}

pub fn components_of(ch: char, m: usize, lexicon: &ComponentLexicon) -> ComponentList {
    lexicon.components_of(ch, m)
}
