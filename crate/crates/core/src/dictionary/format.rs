//! Text format: one JSON header line, then one segment per line as letter
//! indices separated by single spaces, in lexicographic order.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{Dictionary, DictionaryKind, DictionaryMeta, ParseTree};
use crate::error::{Error, Result};
use crate::models::{ExpFamilyModel, ModelFile, Sequence};
use crate::qtypes::{Grid, GridSpec};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "tcvf-dictionary";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DictionaryHeader {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub model: ModelFile,
    pub grid: Option<GridSpec>,
    pub gamma: Option<f64>,
    pub size_bound: Option<String>,
    pub depth_cap: Option<usize>,
    pub theta: Option<Vec<f64>>,
    #[serde(rename = "M_target")]
    pub m_target: u64,
    pub size: u64,
    pub codeword_width: u32,
}

impl DictionaryHeader {
    pub fn of(dict: &Dictionary) -> Self {
        let meta = dict.meta();
        DictionaryHeader {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            kind: dict.kind().as_str().into(),
            model: dict.model().to_file(),
            grid: meta.grid.as_ref().map(Grid::to_spec),
            gamma: meta.gamma,
            size_bound: meta.size_bound.as_ref().map(BigUint::to_string),
            depth_cap: meta.depth_cap,
            theta: meta.theta.clone(),
            m_target: dict.m_target(),
            size: dict.size() as u64,
            codeword_width: dict.codeword_width(),
        }
    }
}

pub(super) fn write(dict: &Dictionary) -> String {
    let mut out = serde_json::to_string(&DictionaryHeader::of(dict)).expect("header serializes");
    out.push('\n');
    let tree = dict.tree();
    let mut line = String::new();
    for &leaf in tree.leaves() {
        line.clear();
        for (i, letter) in tree.path(leaf).iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&letter.to_string());
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedDictionary(msg.into())
}

pub(super) fn read(text: &str) -> Result<Dictionary> {
    let mut lines = text.split_terminator('\n');
    let header_line = lines.next().ok_or_else(|| malformed("empty file"))?;
    let header: DictionaryHeader = serde_json::from_str(header_line)
        .map_err(|e| malformed(format!("bad header: {e}")))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(malformed(format!(
            "unsupported format {} version {}",
            header.format, header.version
        )));
    }
    let kind = DictionaryKind::parse(&header.kind)?;
    let model = ExpFamilyModel::from_file(&header.model)?;
    let grid = header.grid.as_ref().map(Grid::from_spec).transpose()?;
    let size_bound = header
        .size_bound
        .as_deref()
        .map(|s| s.parse::<BigUint>().map_err(|_| malformed(format!("bad size bound {s:?}"))))
        .transpose()?;
    let k = model.alphabet_size();
    let mut segments: Vec<Sequence> = Vec::with_capacity(header.size as usize);
    for (n, line) in lines.enumerate() {
        let letters = line
            .split(' ')
            .map(|tok| {
                tok.parse::<u8>()
                    .ok()
                    .filter(|&x| usize::from(x) < k)
                    .ok_or_else(|| malformed(format!("line {}: bad letter {tok:?}", n + 2)))
            })
            .collect::<Result<Vec<u8>>>()?;
        let seg = Sequence::new(letters);
        if let Some(prev) = segments.last() {
            if prev >= &seg {
                return Err(malformed(format!("line {}: segments out of order", n + 2)));
            }
        }
        segments.push(seg);
    }
    if segments.len() as u64 != header.size {
        return Err(malformed(format!(
            "header declares {} segments, file has {}",
            header.size,
            segments.len()
        )));
    }
    let tree = ParseTree::from_segments(k, &segments)?;
    let meta = DictionaryMeta {
        grid,
        gamma: header.gamma,
        size_bound,
        depth_cap: header.depth_cap,
        theta: header.theta,
    };
    let dict = Dictionary::new(kind, model, tree, header.m_target, meta)?;
    if dict.codeword_width() != header.codeword_width {
        return Err(malformed(format!(
            "header declares codeword width {}, segments need {}",
            header.codeword_width,
            dict.codeword_width()
        )));
    }
    Ok(dict)
}
