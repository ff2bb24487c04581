//! Process-level error type and small parsing helpers shared by the
//! subcommands.

/// A failure that terminates the process: sysexits-style code plus a
/// message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

/// Invalid values or out-of-domain data (sysexits `EX_DATAERR`).
pub fn domain(msg: impl Into<String>) -> Failure {
    Failure {
        code: 65,
        msg: msg.into(),
    }
}

/// Filesystem or encoding trouble (sysexits `EX_IOERR`).
pub fn io_err(msg: impl Into<String>) -> Failure {
    Failure {
        code: 74,
        msg: msg.into(),
    }
}

/// Command-line misuse beyond what the parser can catch (sysexits
/// `EX_USAGE`).
pub fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 64,
        msg: msg.into(),
    }
}

/// Maps core-field errors: filesystem problems are I/O failures, all
/// malformed content (image format, dump layout, degenerate pixels) is a
/// data error.
pub fn field_err(e: field_core::Error) -> Failure {
    match e {
        field_core::Error::Io(_) => io_err(e.to_string()),
        _ => domain(e.to_string()),
    }
}

/// Maps solver errors, unwrapping the transparent wrappers so I/O keeps its
/// exit code.
pub fn solver_err(e: denoise_solver::Error) -> Failure {
    match e {
        denoise_solver::Error::Io(_) => io_err(e.to_string()),
        denoise_solver::Error::Field(inner) => field_err(inner),
        _ => domain(e.to_string()),
    }
}

/// Parses a comma-separated list of floats; `what` names the flag or config
/// key in the error message.
pub fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>, Failure> {
    raw.split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(|part| {
            part.parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{part}` is not a number")))
        })
        .collect()
}

/// Requires exactly `n` components.
pub fn parse_fixed<const N: usize>(raw: &str, what: &str) -> Result<[f64; N], Failure> {
    let list = parse_f64_list(raw, what)?;
    list.try_into()
        .map_err(|list: Vec<f64>| usage(format!("{what}: expected {N} components, got {}", list.len())))
}
