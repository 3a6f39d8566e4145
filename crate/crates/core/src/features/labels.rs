use std::collections::HashMap;
use std::path::Path;

use super::FeatureMatrix;
use crate::bytes;
use crate::error::{Error, Result};

/// Class labels interned to dense ids in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelList {
    ids: Vec<u32>,
    names: Vec<String>,
}

impl LabelList {
    pub fn from_names<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut names = Vec::new();
        let ids = labels
            .into_iter()
            .map(|s| {
                let s = s.as_ref();
                *index.entry(s.to_owned()).or_insert_with(|| {
                    names.push(s.to_owned());
                    (names.len() - 1) as u32
                })
            })
            .collect();
        LabelList { ids, names }
    }

    /// Builds a list from raw ids; class names are the decimal ids.
    pub fn from_ids(ids: &[u32]) -> Self {
        LabelList::from_names(ids.iter().map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> u32 {
        self.ids[i]
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    /// Label string of row `i`.
    pub fn label(&self, i: usize) -> &str {
        self.name(self.ids[i])
    }

    pub fn check_pairs(&self, m: &FeatureMatrix) -> Result<()> {
        if self.len() != m.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} feature rows",
                self.len(),
                m.rows()
            )));
        }
        Ok(())
    }
}

/// Reads one UTF-8 label per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelList> {
    let path = path.as_ref();
    let buf = bytes::read_file(path)?;
    let text = String::from_utf8(buf).map_err(|e| Error::Parse {
        row: 0,
        msg: format!("invalid utf-8: {e}"),
    })?;
    parse_labels(&text)
}

pub(crate) fn parse_labels(text: &str) -> Result<LabelList> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.is_empty() {
        return Err(Error::Empty("label file has no lines".into()));
    }
    if let Some(row) = lines.iter().position(|l| l.is_empty()) {
        return Err(Error::Parse {
            row,
            msg: "empty label".into(),
        });
    }
    Ok(LabelList::from_names(lines))
}

pub fn save_labels(labels: &LabelList, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..labels.len() {
        out.push_str(labels.label(i));
        out.push('\n');
    }
    bytes::write_file(path.as_ref(), out.as_bytes())
}
