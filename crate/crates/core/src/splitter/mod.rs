//! Train/dev/test partitioning under four distribution-shift protocols.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use report::{split_report, PartitionRow, SplitReport};

use crate::provgraph::MaterialClass;
use crate::taskgen::BenchItem;
use crate::{seed, Error, Result};

pub const ASSIGNMENT_FORMAT: &str = "matproc-assignment";

/// Last training year and the single dev year of the temporal protocols.
pub const TRAIN_MAX_YEAR: i32 = 2019;
pub const DEV_YEAR: i32 = 2020;
pub const TEST_MIN_YEAR: i32 = 2021;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Random,
    Year,
    Type,
    Dual,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Random, Protocol::Year, Protocol::Type, Protocol::Dual];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Random => "random",
            Protocol::Year => "year",
            Protocol::Type => "type",
            Protocol::Dual => "dual",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Protocol::Random),
            "year" | "publication_year" => Ok(Protocol::Year),
            "type" | "material_type" => Ok(Protocol::Type),
            "dual" | "year+type" | "dual_ood" => Ok(Protocol::Dual),
            other => Err(Error::InvalidParams(format!("unknown split protocol {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Dev,
    Test,
    Excluded,
}

impl Partition {
    pub const ALL: [Partition; 4] = [Partition::Train, Partition::Dev, Partition::Test, Partition::Excluded];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
            Partition::Excluded => "excluded",
        }
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Partition::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown partition {s}")))
    }
}

/// The metadata a split needs from an item.
pub trait SplitRecord {
    fn item_id(&self) -> &str;
    fn doi(&self) -> &str;
    fn year(&self) -> Option<i32>;
    fn material_class(&self) -> MaterialClass;
}

impl SplitRecord for BenchItem {
    fn item_id(&self) -> &str {
        &self.item_id
    }
    fn doi(&self) -> &str {
        &self.doi
    }
    fn year(&self) -> Option<i32> {
        self.year
    }
    fn material_class(&self) -> MaterialClass {
        self.material_class
    }
}

/// Item metadata alone, e.g. read from externally processed benchmark files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item_id: String,
    pub doi: String,
    pub year: Option<i32>,
    pub material_class: MaterialClass,
}

impl SplitRecord for ItemMeta {
    fn item_id(&self) -> &str {
        &self.item_id
    }
    fn doi(&self) -> &str {
        &self.doi
    }
    fn year(&self) -> Option<i32> {
        self.year
    }
    fn material_class(&self) -> MaterialClass {
        self.material_class
    }
}

impl From<&BenchItem> for ItemMeta {
    fn from(item: &BenchItem) -> Self {
        Self {
            item_id: item.item_id.clone(),
            doi: item.doi.clone(),
            year: item.year,
            material_class: item.material_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub protocol: Protocol,
    pub mapping: BTreeMap<String, Partition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One line of an assignment file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentLine {
    pub item_id: String,
    pub partition: Partition,
}

impl SplitAssignment {
    fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            mapping: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn partition_of(&self, item_id: &str) -> Option<Partition> {
        self.mapping.get(item_id).copied()
    }

    pub fn ids_in(&self, partition: Partition) -> BTreeSet<&str> {
        self.mapping
            .iter()
            .filter(|(_, p)| **p == partition)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn select<'a, T: SplitRecord>(&self, items: &'a [T], partition: Partition) -> Vec<&'a T> {
        items
            .iter()
            .filter(|i| self.partition_of(i.item_id()) == Some(partition))
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<Partition, usize> {
        let mut out: BTreeMap<Partition, usize> = Partition::ALL.iter().map(|p| (*p, 0)).collect();
        for p in self.mapping.values() {
            *out.entry(*p).or_default() += 1;
        }
        out
    }

    pub fn lines(&self) -> Vec<AssignmentLine> {
        self.mapping
            .iter()
            .map(|(id, p)| AssignmentLine {
                item_id: id.clone(),
                partition: *p,
            })
            .collect()
    }

    pub fn from_lines(protocol: Protocol, lines: Vec<AssignmentLine>) -> Self {
        Self {
            protocol,
            mapping: lines.into_iter().map(|l| (l.item_id, l.partition)).collect(),
            warnings: Vec::new(),
        }
    }
}

/// Item-level shuffle, then contiguous slices of ⌊r₀n⌋ / ⌊r₁n⌋ / remainder.
pub fn split_random<T: SplitRecord>(items: &[T], ratios: (f64, f64, f64), seed_value: u64) -> Result<SplitAssignment> {
    let (train, dev, test) = ratios;
    if [train, dev, test].iter().any(|r| *r < 0.0) || ((train + dev + test) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams("split ratios must be non-negative and sum to 1".into()));
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed_value, &["split-random"]));
    let n_train = (train * n as f64).floor() as usize;
    let n_dev = (dev * n as f64).floor() as usize;
    let mut out = SplitAssignment::new(Protocol::Random);
    for (rank, &i) in order.iter().enumerate() {
        let p = if rank < n_train {
            Partition::Train
        } else if rank < n_train + n_dev {
            Partition::Dev
        } else {
            Partition::Test
        };
        out.mapping.insert(items[i].item_id().to_string(), p);
    }
    Ok(out)
}

fn year_partition(year: i32) -> Partition {
    if year <= TRAIN_MAX_YEAR {
        Partition::Train
    } else if year == DEV_YEAR {
        Partition::Dev
    } else {
        Partition::Test
    }
}

/// train ≤ 2019, dev = 2020, test ≥ 2021. Items without a year are excluded.
pub fn split_by_year<T: SplitRecord>(items: &[T]) -> SplitAssignment {
    let mut out = SplitAssignment::new(Protocol::Year);
    for item in items {
        let p = match item.year() {
            Some(y) => year_partition(y),
            None => {
                out.warnings.push(format!("{}: missing year, excluded", item.item_id()));
                Partition::Excluded
            }
        };
        out.mapping.insert(item.item_id().to_string(), p);
    }
    out
}

/// Whether the train/dev shuffle of the type protocol moves whole DOIs or
/// single items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Item,
    Doi,
}

/// Every held-out-class item goes to test; the rest is shuffled into
/// train/dev with `dev_ratio` going to dev.
pub fn split_by_type<T: SplitRecord>(
    items: &[T],
    held_out: MaterialClass,
    dev_ratio: f64,
    seed_value: u64,
    granularity: Granularity,
) -> Result<SplitAssignment> {
    if !(0.0..=1.0).contains(&dev_ratio) {
        return Err(Error::InvalidParams("dev_ratio must lie in [0, 1]".into()));
    }
    let mut out = SplitAssignment::new(Protocol::Type);
    let mut rest: Vec<&T> = Vec::new();
    for item in items {
        if item.material_class() == held_out {
            out.mapping.insert(item.item_id().to_string(), Partition::Test);
        } else {
            rest.push(item);
        }
    }
    let mut rng = seed::rng(seed_value, &["split-type"]);
    match granularity {
        Granularity::Item => {
            rest.shuffle(&mut rng);
            let n_dev = (dev_ratio * rest.len() as f64).floor() as usize;
            for (rank, item) in rest.iter().enumerate() {
                let p = if rank < n_dev { Partition::Dev } else { Partition::Train };
                out.mapping.insert(item.item_id().to_string(), p);
            }
        }
        Granularity::Doi => {
            let mut dois: Vec<&str> = rest.iter().map(|i| i.doi()).collect::<BTreeSet<_>>().into_iter().collect();
            dois.shuffle(&mut rng);
            let n_dev = (dev_ratio * dois.len() as f64).floor() as usize;
            let dev: BTreeSet<&str> = dois[..n_dev].iter().copied().collect();
            for item in rest {
                let p = if dev.contains(item.doi()) { Partition::Dev } else { Partition::Train };
                out.mapping.insert(item.item_id().to_string(), p);
            }
        }
    }
    Ok(out)
}

/// train = non-battery ≤ 2019, dev = non-battery 2020, test = battery ≥ 2021,
/// everything else excluded.
pub fn split_dual<T: SplitRecord>(items: &[T]) -> SplitAssignment {
    let mut out = SplitAssignment::new(Protocol::Dual);
    for item in items {
        let battery = item.material_class() == MaterialClass::Battery;
        let p = match item.year() {
            None => {
                out.warnings.push(format!("{}: missing year, excluded", item.item_id()));
                Partition::Excluded
            }
            Some(y) => match (battery, year_partition(y)) {
                (false, Partition::Train) => Partition::Train,
                (false, Partition::Dev) => Partition::Dev,
                (true, Partition::Test) => Partition::Test,
                _ => Partition::Excluded,
            },
        };
        out.mapping.insert(item.item_id().to_string(), p);
    }
    out
}

/// Default-parameter split for a protocol.
pub fn split<T: SplitRecord>(items: &[T], protocol: Protocol, seed_value: u64) -> Result<SplitAssignment> {
    match protocol {
        Protocol::Random => split_random(items, (0.8, 0.1, 0.1), seed_value),
        Protocol::Year => Ok(split_by_year(items)),
        Protocol::Type => split_by_type(items, MaterialClass::Battery, 0.1, seed_value, Granularity::Item),
        Protocol::Dual => Ok(split_dual(items)),
    }
}

fn dois_in<'a, T: SplitRecord>(a: &SplitAssignment, items: &'a [T], p: Partition) -> BTreeSet<&'a str> {
    items
        .iter()
        .filter(|i| a.partition_of(i.item_id()) == Some(p))
        .map(|i| i.doi())
        .collect()
}

/// Fraction of test DOIs of `test_side` that also occur in the train
/// partition of `train_side`.
pub fn contamination<T: SplitRecord>(train_side: &SplitAssignment, test_side: &SplitAssignment, items: &[T]) -> Result<f64> {
    let test = dois_in(test_side, items, Partition::Test);
    if test.is_empty() {
        return Err(Error::EmptyTestPartition(test_side.protocol.to_string()));
    }
    let train = dois_in(train_side, items, Partition::Train);
    Ok(test.intersection(&train).count() as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationMatrix {
    /// Row labels: train partitions.
    pub train: Vec<String>,
    /// Column labels: test partitions.
    pub test: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ContaminationMatrix {
    pub fn get(&self, train: &str, test: &str) -> Option<f64> {
        let i = self.train.iter().position(|t| t == train)?;
        let j = self.test.iter().position(|t| t == test)?;
        Some(self.values[i][j])
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<14}", "train \\ test");
        for t in &self.test {
            s.push_str(&format!("{t:>10}"));
        }
        s.push('\n');
        for (i, row) in self.values.iter().enumerate() {
            s.push_str(&format!("{:<14}", self.train[i]));
            for v in row {
                s.push_str(&format!("{v:>10.3}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Every (train of A, test of B) pair over the given named assignments.
pub fn contamination_matrix<T: SplitRecord>(assignments: &[(String, SplitAssignment)], items: &[T]) -> Result<ContaminationMatrix> {
    let names: Vec<String> = assignments.iter().map(|(n, _)| n.clone()).collect();
    let mut values = Vec::with_capacity(assignments.len());
    for (_, train) in assignments {
        let row = assignments
            .iter()
            .map(|(_, test)| contamination(train, test, items))
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    Ok(ContaminationMatrix {
        train: names.clone(),
        test: names,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: usize, doi: usize, year: Option<i32>, class: MaterialClass) -> ItemMeta {
        ItemMeta {
            item_id: format!("i{id:03}"),
            doi: format!("d{doi}"),
            year,
            material_class: class,
        }
    }

    #[test]
    fn random_sizes() {
        let items: Vec<ItemMeta> = (0..10).map(|i| meta(i, i, Some(2000), MaterialClass::Other)).collect();
        let a = split_random(&items, (0.8, 0.1, 0.1), 4).unwrap();
        let c = a.counts();
        assert_eq!((c[&Partition::Train], c[&Partition::Dev], c[&Partition::Test]), (8, 1, 1));
        assert_eq!(a, split_random(&items, (0.8, 0.1, 0.1), 4).unwrap());
        assert!(split_random(&items, (0.5, 0.1, 0.1), 4).is_err());
        // published benchmark size
        let big: Vec<ItemMeta> = (0..34_975).map(|i| meta(i, i, Some(2000), MaterialClass::Other)).collect();
        let c = split_random(&big, (0.8, 0.1, 0.1), 1).unwrap().counts();
        assert_eq!((c[&Partition::Train], c[&Partition::Dev], c[&Partition::Test]), (27_980, 3_497, 3_498));
    }

    #[test]
    fn year_boundaries() {
        let items = vec![
            meta(0, 0, Some(2019), MaterialClass::Other),
            meta(1, 1, Some(2020), MaterialClass::Other),
            meta(2, 2, Some(2021), MaterialClass::Other),
            meta(3, 3, Some(1982), MaterialClass::Other),
            meta(4, 4, None, MaterialClass::Other),
        ];
        let a = split_by_year(&items);
        let parts: Vec<Partition> = items.iter().map(|i| a.partition_of(&i.item_id).unwrap()).collect();
        assert_eq!(
            parts,
            [Partition::Train, Partition::Dev, Partition::Test, Partition::Train, Partition::Excluded]
        );
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn type_split() {
        let items: Vec<ItemMeta> = (0..100)
            .map(|i| {
                let class = if i % 4 == 0 { MaterialClass::Battery } else { MaterialClass::Thermoelectric };
                meta(i, i / 3, Some(2000 + (i % 25) as i32), class)
            })
            .collect();
        for g in [Granularity::Item, Granularity::Doi] {
            let a = split_by_type(&items, MaterialClass::Battery, 0.1, 3, g).unwrap();
            for i in &items {
                let p = a.partition_of(&i.item_id).unwrap();
                assert_eq!(p == Partition::Test, i.material_class == MaterialClass::Battery);
            }
        }
        let a = split_by_type(&items, MaterialClass::Battery, 0.1, 3, Granularity::Item).unwrap();
        assert_eq!(a.counts()[&Partition::Dev], 7);
    }

    #[test]
    fn dual_split() {
        let items = vec![
            meta(0, 0, Some(2022), MaterialClass::Battery),
            meta(1, 1, Some(2015), MaterialClass::Thermoelectric),
            meta(2, 2, Some(2018), MaterialClass::Battery),
            meta(3, 3, Some(2020), MaterialClass::Magnetic),
            meta(4, 4, Some(2023), MaterialClass::Magnetic),
            meta(5, 5, Some(2020), MaterialClass::Battery),
        ];
        let a = split_dual(&items);
        let parts: Vec<Partition> = items.iter().map(|i| a.partition_of(&i.item_id).unwrap()).collect();
        assert_eq!(
            parts,
            [
                Partition::Test,
                Partition::Train,
                Partition::Excluded,
                Partition::Dev,
                Partition::Excluded,
                Partition::Excluded
            ]
        );
    }

    #[test]
    fn contamination_values() {
        let items = vec![
            meta(0, 0, Some(2010), MaterialClass::Other),
            meta(1, 0, Some(2010), MaterialClass::Other),
            meta(2, 1, Some(2022), MaterialClass::Battery),
        ];
        let dual = split_dual(&items);
        assert_eq!(contamination(&dual, &dual, &items).unwrap(), 0.0);
        let mut same = SplitAssignment::new(Protocol::Random);
        same.mapping.insert("i000".into(), Partition::Train);
        same.mapping.insert("i001".into(), Partition::Test);
        assert_eq!(contamination(&same, &same, &items).unwrap(), 1.0);
        let empty = split_by_year(&items[..2]);
        assert!(matches!(contamination(&dual, &empty, &items), Err(Error::EmptyTestPartition(_))));
        let m = contamination_matrix(&[("dual".into(), dual.clone()), ("same".into(), same)], &items).unwrap();
        assert_eq!(m.get("dual", "dual"), Some(0.0));
        assert_eq!(m.get("same", "same"), Some(1.0));
        assert!(m.to_table().contains("train \\ test"));
    }

    #[test]
    fn protocol_names() {
        for p in Protocol::ALL {
            assert_eq!(p.as_str().parse::<Protocol>().unwrap(), p);
        }
        assert!("weird".parse::<Protocol>().is_err());
    }
}
