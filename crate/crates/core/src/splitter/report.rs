use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Partition, Protocol, SplitAssignment, SplitRecord};
use crate::provgraph::MaterialClass;

/// One partition's statistics: counts, unique DOIs, class shares (percent of
/// items) and year range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub partition: Partition,
    pub samples: usize,
    pub unique_dois: usize,
    pub battery_pct: f64,
    pub thermoelectric_pct: f64,
    pub magnetic_pct: f64,
    pub other_pct: f64,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub protocol: Protocol,
    pub rows: Vec<PartitionRow>,
}

pub fn split_report<T: SplitRecord>(assignment: &SplitAssignment, items: &[T]) -> SplitReport {
    let rows = Partition::ALL
        .iter()
        .map(|&partition| {
            let members = assignment.select(items, partition);
            let n = members.len();
            let pct = |class: MaterialClass| {
                if n == 0 {
                    0.0
                } else {
                    100.0 * members.iter().filter(|i| i.material_class() == class).count() as f64 / n as f64
                }
            };
            let years: Vec<i32> = members.iter().filter_map(|i| i.year()).collect();
            PartitionRow {
                partition,
                samples: n,
                unique_dois: members.iter().map(|i| i.doi()).collect::<BTreeSet<_>>().len(),
                battery_pct: pct(MaterialClass::Battery),
                thermoelectric_pct: pct(MaterialClass::Thermoelectric),
                magnetic_pct: pct(MaterialClass::Magnetic),
                other_pct: pct(MaterialClass::Other),
                year_min: years.iter().min().copied(),
                year_max: years.iter().max().copied(),
            }
        })
        .collect();
    SplitReport {
        protocol: assignment.protocol,
        rows,
    }
}

impl SplitReport {
    pub fn row(&self, partition: Partition) -> &PartitionRow {
        self.rows
            .iter()
            .find(|r| r.partition == partition)
            .expect("report has a row per partition")
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:<9} {:>8} {:>12} {:>9} {:>9} {:>9} {:>9}  {}\n",
            "split", "partition", "samples", "unique_dois", "battery%", "thermo%", "magnet%", "other%", "years"
        );
        for r in &self.rows {
            let years = match (r.year_min, r.year_max) {
                (Some(a), Some(b)) if a == b => a.to_string(),
                (Some(a), Some(b)) => format!("{a}-{b}"),
                _ => "-".to_string(),
            };
            s.push_str(&format!(
                "{:<8} {:<9} {:>8} {:>12} {:>9.2} {:>9.2} {:>9.2} {:>9.2}  {}\n",
                self.protocol.as_str(),
                r.partition.as_str(),
                r.samples,
                r.unique_dois,
                r.battery_pct,
                r.thermoelectric_pct,
                r.magnetic_pct,
                r.other_pct,
                years
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitter::{split_dual, ItemMeta};

    #[test]
    fn empty_partition_is_zero_row() {
        let items = vec![ItemMeta {
            item_id: "a".into(),
            doi: "d".into(),
            year: Some(2010),
            material_class: MaterialClass::Magnetic,
        }];
        let report = split_report(&split_dual(&items), &items);
        let test = report.row(Partition::Test);
        assert_eq!((test.samples, test.unique_dois, test.battery_pct), (0, 0, 0.0));
        assert_eq!(test.year_min, None);
        let train = report.row(Partition::Train);
        assert_eq!(train.samples, 1);
        assert_eq!(train.magnetic_pct, 100.0);
        assert!(report.to_table().contains("2010"));
    }
}
