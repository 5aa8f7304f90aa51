//! Task identifiers and the items they produce.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::embedding::FeatureKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Water,
    Beef,
    Wool,
    Milk,
    Log,
    Dirt,
    Leaves,
    Seeds,
    Sand,
}

impl TaskKind {
    pub const ALL: [TaskKind; 9] = [
        TaskKind::Water,
        TaskKind::Beef,
        TaskKind::Wool,
        TaskKind::Milk,
        TaskKind::Log,
        TaskKind::Dirt,
        TaskKind::Leaves,
        TaskKind::Seeds,
        TaskKind::Sand,
    ];

    /// Sparse resources used as the first and last task of an A-B-A sequence.
    pub const SPARSE: [TaskKind; 4] = [TaskKind::Water, TaskKind::Beef, TaskKind::Wool, TaskKind::Milk];
    /// Dense resources used as the middle task.
    pub const DENSE: [TaskKind; 5] = [TaskKind::Log, TaskKind::Dirt, TaskKind::Leaves, TaskKind::Seeds, TaskKind::Sand];
    /// Draw set for long instruction streams.
    pub const LONG: [TaskKind; 6] = [
        TaskKind::Water,
        TaskKind::Beef,
        TaskKind::Wool,
        TaskKind::Log,
        TaskKind::Dirt,
        TaskKind::Seeds,
    ];

    /// Visual feature the memory is queried with ("near water", "near cow", ...).
    pub fn query_feature(self) -> FeatureKind {
        match self {
            TaskKind::Water => FeatureKind::Water,
            TaskKind::Beef | TaskKind::Milk => FeatureKind::Cow,
            TaskKind::Wool => FeatureKind::Sheep,
            TaskKind::Log | TaskKind::Leaves => FeatureKind::Tree,
            TaskKind::Dirt => FeatureKind::Dirt,
            TaskKind::Seeds => FeatureKind::Grass,
            TaskKind::Sand => FeatureKind::Sand,
        }
    }

    /// Harvesting removes the source entity.
    pub fn consumes_source(self) -> bool {
        matches!(self, TaskKind::Beef | TaskKind::Wool)
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Water => "water",
            TaskKind::Beef => "beef",
            TaskKind::Wool => "wool",
            TaskKind::Milk => "milk",
            TaskKind::Log => "log",
            TaskKind::Dirt => "dirt",
            TaskKind::Leaves => "leaves",
            TaskKind::Seeds => "seeds",
            TaskKind::Sand => "sand",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown task kind `{s}`"))
    }
}
