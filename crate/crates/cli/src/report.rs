//! Plain-text reports: a status header followed by `[section]` blocks of
//! `key: value` lines and optional verbatim bodies (CSV tables, operators).

use std::fmt::{self, Display, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Falsified,
    Inconclusive,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Falsified => 1,
            Status::Inconclusive => 2,
            Status::Error => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Falsified => "falsified",
            Status::Inconclusive => "inconclusive",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
    pub body: Option<String>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            entries: Vec::new(),
            body: None,
        }
    }

    pub fn add(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Display) -> Self {
        self.add(key, value);
        self
    }

    pub fn body(mut self, text: impl Into<String>) -> Self {
        self.body = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub status: Status,
    pub sections: Vec<Section>,
    pub wall_time: Option<f64>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            status: Status::Ok,
            sections: Vec::new(),
            wall_time: None,
        }
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

impl Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        writeln!(out, "command: {}", self.command)?;
        writeln!(out, "status: {}", self.status.as_str())?;
        if let Some(t) = self.wall_time {
            writeln!(out, "wall_time_s: {t:.3}")?;
        }
        for s in &self.sections {
            writeln!(out, "\n[{}]", s.name)?;
            for (k, v) in &s.entries {
                writeln!(out, "{k}: {v}")?;
            }
            if let Some(body) = &s.body {
                out.push_str(body);
                if !body.ends_with('\n') {
                    out.push('\n');
                }
            }
        }
        f.write_str(&out)
    }
}

/// Shortest round-trip form, so reports are stable across runs.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn list(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_codes() {
        let mut r = Report::new("rank");
        r.status = Status::Falsified;
        r.push(Section::new("rank").with("generic_rank", 2).body("a,b\n1,2"));
        assert_eq!(
            r.to_string(),
            "command: rank\nstatus: falsified\n\n[rank]\ngeneric_rank: 2\na,b\n1,2\n"
        );
        assert_eq!(r.exit_code(), 1);
        let codes: Vec<i32> = [Status::Ok, Status::Falsified, Status::Inconclusive, Status::Error]
            .iter()
            .map(|s| s.exit_code())
            .collect();
        assert_eq!(codes, [0, 1, 2, 3]);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-12, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
