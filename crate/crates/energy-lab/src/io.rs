//! Set files: `{"group": [factors], "elements": [strictly increasing indices]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::make_group;
use crate::setfun::GSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetFile {
    pub group: Vec<usize>,
    pub elements: Vec<usize>,
}

impl SetFile {
    pub fn of(a: &GSet) -> Self {
        SetFile {
            group: a.group().factors().to_vec(),
            elements: a.to_vec(),
        }
    }

    pub fn to_set(&self) -> Result<GSet> {
        let g = make_group(&self.group)?;
        for w in self.elements.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Parse(format!(
                    "elements must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        GSet::from_indices(&g, self.elements.iter().copied())
    }
}

pub fn parse_set_json(text: &str) -> Result<GSet> {
    let file: SetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_set()
}

pub fn set_to_json(a: &GSet) -> String {
    serde_json::to_string(&SetFile::of(a)).expect("plain data serializes")
}

pub fn load_set(path: &Path) -> Result<GSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_set_json(&text)
}

pub fn save_set(a: &GSet, path: &Path) -> Result<()> {
    std::fs::write(path, set_to_json(a) + "\n")
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::cyclic;

    #[test]
    fn roundtrip() {
        let a = GSet::from_indices(&cyclic(7).unwrap(), [0, 1, 2]).unwrap();
        let text = set_to_json(&a);
        assert_eq!(text, r#"{"group":[7],"elements":[0,1,2]}"#);
        assert_eq!(parse_set_json(&text).unwrap(), a);
    }

    #[test]
    fn rejects_bad_files() {
        for bad in [
            r#"{"group":[7],"elements":[1,0]}"#,
            r#"{"group":[7],"elements":[1,1]}"#,
            r#"{"group":[7],"elements":[7]}"#,
            r#"{"group":[1],"elements":[]}"#,
            r#"{"group":[],"elements":[]}"#,
            r#"{"group":[7],"elements":[0],"extra":1}"#,
            r#"{"group":[7]}"#,
            r#"{"group":[7],"elements":[-1]}"#,
            "not json",
        ] {
            assert!(parse_set_json(bad).is_err(), "{bad}");
        }
        assert!(parse_set_json(r#"{"group":[7],"elements":[]}"#)
            .unwrap()
            .is_empty());
    }
}
