use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the three binary subtasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Toxic,
    Engaging,
    Fact,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Toxic, Task::Engaging, Task::Fact];

    pub fn index(self) -> usize {
        match self {
            Task::Toxic => 0,
            Task::Engaging => 1,
            Task::Fact => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Toxic => "toxic",
            Task::Engaging => "engaging",
            Task::Fact => "fact",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "toxic" | "sub1" | "sub1_toxic" => Ok(Task::Toxic),
            "engaging" | "sub2" | "sub2_engaging" => Ok(Task::Engaging),
            "fact" | "factclaiming" | "fact-claiming" | "sub3" | "sub3_factclaiming" => {
                Ok(Task::Fact)
            }
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Gold or predicted membership in (toxic, engaging, fact-claiming).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet(pub [bool; 3]);

impl LabelSet {
    pub fn new(toxic: bool, engaging: bool, fact: bool) -> Self {
        LabelSet([toxic, engaging, fact])
    }

    pub fn get(self, task: Task) -> bool {
        self.0[task.index()]
    }

    pub fn set(&mut self, task: Task, value: bool) {
        self.0[task.index()] = value;
    }
}
