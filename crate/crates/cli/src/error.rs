use wannier_decay::Error;

/// A failure reported as one line: `error[<kind>]: <message>`.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("io", message)
    }

    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.kind, flat.join(" "))
    }

    /// 2 for bad input, 3 for I/O, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "usage" | "config" => 2,
            "io" => 3,
            _ => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::InvalidParameter { .. }
            | Error::NotCoprime { .. }
            | Error::Config(_)
            | Error::PacketOutsideGrid(_) => "config",
            _ => "numerics",
        };
        Self::new(kind, e.to_string())
    }
}
