//! Train/val/test partitioning, by bearing or at random, and a leakage audit.

pub mod io;
mod table;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SampleKey;
use crate::rng::Stream;

pub use io::{read_split, write_split};
pub use table::BearingTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Partition::Train),
            "val" | "validation" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            _ => Err(Error::Config(format!("unknown partition {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    ByBearing,
    Random,
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitStrategy::ByBearing => "by_bearing",
            SplitStrategy::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    #[serde(flatten)]
    pub key: SampleKey,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub strategy: SplitStrategy,
    pub seed: Option<u64>,
    /// Sorted by key.
    pub entries: Vec<SplitEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing_table: Option<BearingTable>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    fn from_pairs(
        strategy: SplitStrategy,
        seed: Option<u64>,
        mut entries: Vec<SplitEntry>,
        bearing_table: Option<BearingTable>,
    ) -> Self {
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        let mut out = SplitAssignment {
            strategy,
            seed,
            entries,
            bearing_table,
            warnings: Vec::new(),
        };
        let counts = out.counts();
        for p in Partition::ALL {
            if counts[p.index()] == 0 {
                let w = format!("{p} partition is empty");
                log::warn!("{w}");
                out.warnings.push(w);
            }
        }
        out
    }

    pub fn get(&self, key: &SampleKey) -> Option<Partition> {
        self.entries
            .binary_search_by(|e| e.key.cmp(key))
            .ok()
            .map(|i| self.entries[i].partition)
    }

    /// Sample counts for train, val, test.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.partition.index()] += 1;
        }
        c
    }

    /// Positions in `keys` that fall in `partition`, in input order.
    pub fn indices(&self, keys: &[SampleKey], partition: Partition) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            let p = self.get(k).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "sample {} seq {} window {} has no partition",
                    k.bearing_id, k.seq_index, k.window_index
                ))
            })?;
            if p == partition {
                out.push(i);
            }
        }
        Ok(out)
    }
}

fn check_unique(keys: &[SampleKey]) -> Result<()> {
    let mut sorted: Vec<&SampleKey> = keys.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!(
            "duplicate sample {} seq {} window {}",
            w[0].bearing_id, w[0].seq_index, w[0].window_index
        )));
    }
    Ok(())
}

/// Map every sample to its bearing's partition in `table`.
pub fn split_by_bearing(keys: &[SampleKey], table: &BearingTable) -> Result<SplitAssignment> {
    check_unique(keys)?;
    let mut missing: Vec<String> = Vec::new();
    let mut entries = Vec::with_capacity(keys.len());
    let mut cache: BTreeMap<&str, Option<Partition>> = BTreeMap::new();
    for k in keys {
        let p = *cache
            .entry(k.bearing_id.as_str())
            .or_insert_with(|| table.partition_of(&k.bearing_id));
        match p {
            Some(partition) => entries.push(SplitEntry {
                key: k.clone(),
                partition,
            }),
            None => missing.push(k.bearing_id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingBearings(missing));
    }
    Ok(SplitAssignment::from_pairs(
        SplitStrategy::ByBearing,
        None,
        entries,
        Some(table.clone()),
    ))
}

/// Partition sizes by largest remainder: each within 1 of `floor(f * n)`,
/// summing to `n`. Ties go to the earlier partition.
pub fn quotas(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut q: [usize; 3] = [0; 3];
    for i in 0..3 {
        q[i] = raw[i].floor() as usize;
    }
    let mut rest = n.saturating_sub(q.iter().sum());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        q[i] += 1;
        rest -= 1;
    }
    q
}

fn validate_fractions(fractions: [f64; 3]) -> Result<()> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must be in [0, 1] and sum to 1, got {fractions:?}"
        )));
    }
    Ok(())
}

/// Shuffle samples with `seed` and fill train, val, test quotas in that
/// order. Samples (not waveforms or bearings) are the unit of assignment,
/// and no class stratification is applied.
pub fn split_random(keys: &[SampleKey], fractions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    validate_fractions(fractions)?;
    check_unique(keys)?;
    let mut order: Vec<SampleKey> = keys.to_vec();
    order.sort();
    Stream::new(seed, 0x53_50_4c_49_54).shuffle(&mut order);
    let q = quotas(order.len(), fractions);
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(i, key)| {
            let partition = if i < q[0] {
                Partition::Train
            } else if i < q[0] + q[1] {
                Partition::Val
            } else {
                Partition::Test
            };
            SplitEntry { key, partition }
        })
        .collect();
    Ok(SplitAssignment::from_pairs(SplitStrategy::Random, Some(seed), entries, None))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BearingLeak {
    pub bearing_id: String,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub leak_free: bool,
    /// Bearings whose samples span two or more partitions.
    pub offending: Vec<BearingLeak>,
    pub n_bearings: usize,
    /// Samples without a partition.
    pub unassigned: usize,
}

/// List every bearing whose samples land in more than one partition.
pub fn leakage_audit(assignment: &SplitAssignment, keys: &[SampleKey]) -> LeakageReport {
    let mut per_bearing: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    let mut unassigned = 0;
    for k in keys {
        match assignment.get(k) {
            Some(p) => per_bearing.entry(k.bearing_id.as_str()).or_default()[p.index()] += 1,
            None => unassigned += 1,
        }
    }
    let offending: Vec<BearingLeak> = per_bearing
        .iter()
        .filter(|(_, c)| c.iter().filter(|&&n| n > 0).count() >= 2)
        .map(|(b, c)| BearingLeak {
            bearing_id: b.to_string(),
            train: c[0],
            val: c[1],
            test: c[2],
        })
        .collect();
    LeakageReport {
        leak_free: offending.is_empty(),
        offending,
        n_bearings: per_bearing.len(),
        unassigned,
    }
}
