use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The four patch-classification tasks the encoder can be trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Lymph,
    Mitosis,
    Prostate,
    Colorectal,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Lymph, Task::Mitosis, Task::Prostate, Task::Colorectal];

    pub fn name(self) -> &'static str {
        match self {
            Task::Lymph => "lymph",
            Task::Mitosis => "mitosis",
            Task::Prostate => "prostate",
            Task::Colorectal => "colorectal",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            Task::Colorectal => 9,
            _ => 2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Parses `all` or a comma-separated list of task names.
    pub fn parse_list(s: &str) -> Result<Vec<Task>, Error> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Task::ALL.to_vec());
        }
        let mut tasks: Vec<Task> = s.split(',').map(|t| t.trim().parse()).collect::<Result<_, _>>()?;
        tasks.sort();
        tasks.dedup();
        if tasks.is_empty() {
            return Err(Error::Config("empty task list".into()));
        }
        Ok(tasks)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}
