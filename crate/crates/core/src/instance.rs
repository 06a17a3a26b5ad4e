//! JSON instance documents.
//!
//! ```json
//! {"x_alphabet": ["0", "1"], "y_alphabet": ["0", "1"],
//!  "matrix": [["9/10", "1/10"], ["1/10", "9/10"]], "n": 2, "A": ["00", "11"]}
//! ```
//!
//! Several channels are given as `"channels": [{"y_alphabet": ..., "matrix": ...}, ...]`
//! in place of the top-level `y_alphabet` and `matrix`. `"A": "all"` stands for
//! every sequence of length `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::model::{Alphabet, Channel, Limits, SourceSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    pub y_alphabet: Vec<String>,
    pub matrix: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceDoc {
    Words(Vec<String>),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub x_alphabet: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelDoc>>,
    pub n: usize,
    #[serde(rename = "A")]
    pub source: SourceDoc,
}

/// A validated instance: a source set and one or more channels sharing its input alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub source: SourceSet,
    pub channels: Vec<Channel>,
}

fn channel_from(x: &Alphabet, y: &[String], matrix: &[Vec<String>]) -> Result<Channel> {
    let y = Alphabet::new(y)?;
    let rows = matrix
        .iter()
        .map(|row| row.iter().map(|s| exact::parse_rational(s)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Channel::new(rows, x.clone(), y)
}

fn channel_doc(ch: &Channel) -> ChannelDoc {
    ChannelDoc {
        y_alphabet: ch.output().symbols().iter().map(char::to_string).collect(),
        matrix: ch
            .rows()
            .iter()
            .map(|r| r.iter().map(exact::fmt_rational).collect())
            .collect(),
    }
}

impl InstanceDoc {
    pub fn into_instance(self, limits: &Limits) -> Result<Instance> {
        let x = Alphabet::new(&self.x_alphabet)?;
        if self.n == 0 {
            return Err(Error::Source("n must be positive".into()));
        }
        let channels = match (self.y_alphabet, self.matrix, self.channels) {
            (Some(y), Some(m), None) => vec![channel_from(&x, &y, &m)?],
            (None, None, Some(list)) if !list.is_empty() => list
                .iter()
                .map(|c| channel_from(&x, &c.y_alphabet, &c.matrix))
                .collect::<Result<Vec<_>>>()?,
            _ => {
                return Err(Error::Parse(
                    "give either \"y_alphabet\" and \"matrix\", or a non-empty \"channels\" list".into(),
                ))
            }
        };
        let source = match self.source {
            SourceDoc::Words(w) => SourceSet::new(x, self.n, &w)?,
            SourceDoc::Keyword(k) if k == "all" => SourceSet::full(x, self.n, limits)?,
            SourceDoc::Keyword(k) => {
                return Err(Error::Parse(format!("\"A\" must be a list of words or \"all\", got {k:?}")))
            }
        };
        Ok(Instance { source, channels })
    }
}

impl Instance {
    pub fn from_json(text: &str, limits: &Limits) -> Result<Self> {
        let doc: InstanceDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance JSON: {e}")))?;
        doc.into_instance(limits)
    }

    /// Document form; members are always listed explicitly.
    pub fn to_doc(&self) -> InstanceDoc {
        let x_alphabet = self.source.alphabet().symbols().iter().map(char::to_string).collect();
        let (y_alphabet, matrix, channels) = match self.channels.as_slice() {
            [one] => {
                let d = channel_doc(one);
                (Some(d.y_alphabet), Some(d.matrix), None)
            }
            many => (None, None, Some(many.iter().map(channel_doc).collect())),
        };
        InstanceDoc {
            x_alphabet,
            y_alphabet,
            matrix,
            channels,
            n: self.source.n(),
            source: SourceDoc::Words(self.source.render()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("plain data");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BSC: &str = r#"{"x_alphabet":["0","1"],"y_alphabet":["0","1"],
        "matrix":[["9/10","1/10"],["1/10","9/10"]],"n":2,"A":["00","11"]}"#;

    #[test]
    fn parses_and_round_trips() {
        let inst = Instance::from_json(BSC, &Limits::default()).unwrap();
        assert_eq!(inst.source.len(), 2);
        assert_eq!(inst.channels.len(), 1);
        let again = Instance::from_json(&inst.to_json(), &Limits::default()).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn canonicalizes_rationals() {
        let text = BSC.replace("9/10", "18/20");
        let inst = Instance::from_json(&text, &Limits::default()).unwrap();
        assert!(inst.to_json().contains("\"9/10\""));
    }

    #[test]
    fn multiple_channels_and_full_source() {
        let text = r#"{"x_alphabet":["0","1"],"n":3,"A":"all","channels":[
            {"y_alphabet":["0","1"],"matrix":[["9/10","1/10"],["1/10","9/10"]]},
            {"y_alphabet":["a","b","c"],"matrix":[["1/2","1/2","0"],["0","1/3","2/3"]]}]}"#;
        let inst = Instance::from_json(text, &Limits::default()).unwrap();
        assert_eq!(inst.source.len(), 8);
        assert_eq!(inst.channels.len(), 2);
        assert_eq!(Instance::from_json(&inst.to_json(), &Limits::default()).unwrap(), inst);
    }

    #[test]
    fn rejects_bad_documents() {
        let l = Limits::default();
        assert!(Instance::from_json(&BSC.replace("\"n\"", "\"extra\":1,\"n\""), &l).is_err());
        assert!(Instance::from_json(&BSC.replace("9/10\",\"1/10", "0.9\",\"0.1"), &l).is_err());
        assert!(matches!(
            Instance::from_json(&BSC.replace("[\"9/10\",\"1/10\"]", "[\"9/10\",\"0\"]"), &l),
            Err(Error::RowSum { row: 0, .. })
        ));
        assert!(Instance::from_json(&BSC.replace("\"11\"", "\"1\""), &l).is_err());
    }
}
