use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splits::Partition;

const FEMTO: &str = include_str!("../../config/bearing_tables/femto.json");
const XJTU: &str = include_str!("../../config/bearing_tables/xjtu.json");
const CWRU: &str = include_str!("../../config/bearing_tables/cwru.json");

/// Bearing ids per partition. An id also covers every bearing it prefixes
/// on a `/` boundary (`12k_Drive/B` covers `12k_Drive/B/007`); the longest
/// matching entry wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BearingTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl BearingTable {
    pub fn new(train: Vec<String>, val: Vec<String>, test: Vec<String>) -> Self {
        BearingTable {
            dataset: None,
            train,
            val,
            test,
        }
    }

    /// Shipped tables: `femto`, `xjtu`, `cwru`.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name.to_ascii_lowercase().as_str() {
            "femto" => FEMTO,
            "xjtu" => XJTU,
            "cwru" => CWRU,
            other => return Err(Error::Config(format!("no built-in bearing table {other:?}"))),
        };
        let t: BearingTable = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    /// Load a JSON table from disk, or a built-in one when `spec` names it.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if !path.exists() {
            if let Ok(t) = Self::builtin(spec.trim_end_matches(".json")) {
                return Ok(t);
            }
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: BearingTable = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<&String> = self.train.iter().chain(&self.val).chain(&self.test).collect();
        all.sort();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("bearing {} listed twice in table", w[0])));
        }
        Ok(())
    }

    fn entries(&self) -> impl Iterator<Item = (&String, Partition)> {
        self.train
            .iter()
            .map(|b| (b, Partition::Train))
            .chain(self.val.iter().map(|b| (b, Partition::Val)))
            .chain(self.test.iter().map(|b| (b, Partition::Test)))
    }

    pub fn partition_of(&self, bearing_id: &str) -> Option<Partition> {
        self.entries()
            .filter(|(id, _)| {
                bearing_id == id.as_str()
                    || (bearing_id.starts_with(id.as_str()) && bearing_id.as_bytes().get(id.len()) == Some(&b'/'))
            })
            .max_by_key(|(id, _)| id.len())
            .map(|(_, p)| p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_parse() {
        let f = BearingTable::builtin("femto").unwrap();
        assert_eq!((f.train.len(), f.val.len(), f.test.len()), (8, 4, 5));
        let x = BearingTable::builtin("xjtu").unwrap();
        assert_eq!((x.train.len(), x.val.len(), x.test.len()), (9, 3, 3));
        assert_eq!(x.partition_of("2_3"), Some(Partition::Test));
        assert!(BearingTable::builtin("paderborn").is_err());
    }

    #[test]
    fn cwru_prefix_matching() {
        let c = BearingTable::builtin("cwru").unwrap();
        assert_eq!(c.partition_of("12k_Drive/B/007"), Some(Partition::Train));
        assert_eq!(c.partition_of("48k_Drive/OR/021"), Some(Partition::Train));
        assert_eq!(c.partition_of("12k_Fan/IR/014"), Some(Partition::Val));
        assert_eq!(c.partition_of("12k_Fan/IR/021"), Some(Partition::Test));
        assert_eq!(c.partition_of("Normal/3"), Some(Partition::Test));
        assert_eq!(c.partition_of("12k_Drive/Bx"), None);
        assert_eq!(c.partition_of("12k_Fan/IR/028"), None);
    }

    #[test]
    fn longest_prefix_wins() {
        let t = BearingTable::new(vec!["a".into()], vec!["a/b".into()], vec![]);
        assert_eq!(t.partition_of("a/b/c"), Some(Partition::Val));
        assert_eq!(t.partition_of("a/c"), Some(Partition::Train));
    }

    #[test]
    fn duplicates_rejected() {
        let t = BearingTable::new(vec!["a".into()], vec!["a".into()], vec![]);
        assert!(t.validate().is_err());
    }
}
