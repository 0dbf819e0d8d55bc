use std::fmt;

/// Failure class, which decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Input,
    Sidecar,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 1,
            Kind::Input => 2,
            Kind::Sidecar => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // causes whose text is already part of the message are skipped
        let mut shown = String::new();
        for cause in self.source.chain() {
            let text = cause.to_string();
            if shown.contains(&text) {
                continue;
            }
            if !shown.is_empty() {
                shown.push_str(": ");
            }
            shown.push_str(&text);
        }
        f.write_str(&shown)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an error with its failure class.
pub trait Classify<T> {
    fn config(self) -> CliResult<T>;
    fn input(self) -> CliResult<T>;
    fn sidecar(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind: Kind::Config,
            source: e.into(),
        })
    }

    fn input(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind: Kind::Input,
            source: e.into(),
        })
    }

    fn sidecar(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind: Kind::Sidecar,
            source: e.into(),
        })
    }
}
