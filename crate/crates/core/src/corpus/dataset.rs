use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crossling_tensor::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary offensiveness label: hate-or-offensive vs. not offensive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "HOF")]
    Hof,
    #[serde(rename = "NOT")]
    Not,
}

impl Label {
    pub fn is_hof(self) -> bool {
        self == Label::Hof
    }

    /// 1.0 for HOF, 0.0 for NOT.
    pub fn target(self) -> f32 {
        if self.is_hof() {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Hof => "HOF",
            Label::Not => "NOT",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HOF" => Ok(Label::Hof),
            "NOT" => Ok(Label::Not),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub split: Split,
}

/// Reads a three-column `id<TAB>text<TAB>label` file. Blank lines are
/// skipped; every other row must be well formed.
pub fn load_dataset(path: impl AsRef<Path>, has_header: bool, split: Split) -> Result<Vec<RawRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    let shown = path.display().to_string();
    let row_err = |line: usize, msg: String| Error::Row {
        path: shown.clone(),
        line,
        msg,
    };

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(Error::io(path))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if (has_header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(row_err(
                line_no,
                format!("malformed row: expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let (id, text, label) = (cols[0].trim(), cols[1], cols[2]);
        if id.is_empty() {
            return Err(row_err(line_no, "empty id".into()));
        }
        if text.trim().is_empty() {
            return Err(row_err(line_no, "empty text".into()));
        }
        let label = label.parse::<Label>().map_err(|e| row_err(line_no, e))?;
        if !seen.insert(id.to_string()) {
            return Err(row_err(line_no, format!("duplicate id {id:?}")));
        }
        records.push(RawRecord {
            id: id.to_string(),
            text: text.to_string(),
            label,
            split,
        });
    }
    Ok(records)
}

/// Writes records in the format [`load_dataset`] reads. Tabs and newlines
/// inside texts are replaced by spaces.
pub fn write_dataset(path: impl AsRef<Path>, records: &[RawRecord], header: bool) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(Error::io(path))?);
    let mut emit = || -> std::io::Result<()> {
        if header {
            writeln!(w, "id\ttext\tlabel")?;
        }
        for r in records {
            let text: String = r
                .text
                .chars()
                .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
                .collect();
            writeln!(w, "{}\t{}\t{}", r.id, text, r.label)?;
        }
        w.flush()
    };
    emit().map_err(Error::io(path))
}

/// Draws exactly `target_size` records of which `round(target_size *
/// hate_proportion)` are HOF, uniformly at random within each label.
pub fn stratified_sample(
    records: &[RawRecord],
    target_size: usize,
    hate_proportion: f64,
    seed: u64,
) -> Result<Vec<RawRecord>> {
    if !(0.0..=1.0).contains(&hate_proportion) {
        return Err(Error::Config(format!(
            "hate proportion {hate_proportion} outside [0, 1]"
        )));
    }
    let n_hof = (target_size as f64 * hate_proportion).round() as usize;
    let n_not = target_size - n_hof;
    let (mut hof, mut not): (Vec<usize>, Vec<usize>) =
        (0..records.len()).partition(|&i| records[i].label.is_hof());
    for (have, want, name) in [(hof.len(), n_hof, "HOF"), (not.len(), n_not, "NOT")] {
        if have < want {
            return Err(Error::Data(format!(
                "insufficient {name} records: need {want}, have {have}"
            )));
        }
    }
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut hof);
    rng.shuffle(&mut not);
    let mut picked: Vec<usize> = hof[..n_hof].iter().chain(&not[..n_not]).copied().collect();
    rng.shuffle(&mut picked);
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}
