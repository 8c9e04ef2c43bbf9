use serde::Serialize;

/// One problem found in an input file. Positions are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

/// Failures with a dedicated exit code. Anything else exits with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input file {file} ({} problem(s))", diagnostics.len())]
    InvalidFile { file: String, diagnostics: Vec<Diagnostic> },
    #[error("factor {index} requested but only {retained} factor(s) retained")]
    FactorIndex { index: usize, retained: usize },
}

impl CliError {
    pub fn invalid(file: impl Into<String>, line: Option<usize>, column: Option<usize>, message: impl Into<String>) -> Self {
        let file = file.into();
        CliError::InvalidFile {
            diagnostics: vec![Diagnostic { file: file.clone(), line, column, message: message.into() }],
            file,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::InvalidFile { .. } => 2,
            CliError::FactorIndex { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidFile { .. } => "invalid_file",
            CliError::FactorIndex { .. } => "factor_index",
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            CliError::InvalidFile { diagnostics, .. } => diagnostics,
            CliError::FactorIndex { .. } => &[],
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    message: String,
    exit_code: u8,
    diagnostics: &'a [Diagnostic],
}

/// Exit code for any error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<CliError>().map_or(1, CliError::exit_code)
}

/// Single-line JSON rendering of an error for `--json-errors`.
pub fn to_json(err: &anyhow::Error) -> String {
    let cli = err.downcast_ref::<CliError>();
    let report = ErrorReport {
        kind: cli.map_or("runtime", CliError::kind),
        message: format!("{err:#}"),
        exit_code: exit_code(err),
        diagnostics: cli.map_or(&[], CliError::diagnostics),
    };
    serde_json::to_string(&report).expect("error report serializes")
}

/// Human rendering: the error chain followed by one line per diagnostic.
pub fn to_text(err: &anyhow::Error) -> String {
    let mut out = format!("error: {err:#}");
    if let Some(cli) = err.downcast_ref::<CliError>() {
        for d in cli.diagnostics() {
            out.push_str(&format!("\n  {d}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        let e = anyhow::Error::new(CliError::invalid("a.json", Some(3), Some(7), "bad"));
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&anyhow::Error::new(CliError::FactorIndex { index: 4, retained: 2 })), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("boom")), 1);
    }

    #[test]
    fn json_report_carries_positions() {
        let e = anyhow::Error::new(CliError::invalid("a.json", Some(3), Some(7), "bad"));
        let v: serde_json::Value = serde_json::from_str(&to_json(&e)).unwrap();
        assert_eq!(v["kind"], "invalid_file");
        assert_eq!(v["exit_code"], 2);
        assert_eq!(v["diagnostics"][0]["line"], 3);
        assert_eq!(v["diagnostics"][0]["column"], 7);
        assert!(to_text(&e).contains("a.json:3:7: bad"));
    }
}
