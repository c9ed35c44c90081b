//! Machine-readable report envelope shared by the library and the CLI.

use serde::Serialize;

pub const SCHEMA: &str = "carnot-hardy-report/1";

/// Fixed schema tag embedded in every emitted report.
pub fn report_schema_version() -> &'static str {
    SCHEMA
}

/// Envelope placed around command output; `generated_at` is the only field
/// allowed to differ between byte-identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: &'static str,
    pub generated_at: String,
    pub seed: u64,
    pub body: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(seed: u64, body: T) -> Self {
        let generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".into());
        Envelope {
            schema: SCHEMA,
            generated_at,
            seed,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_tag() {
        assert_eq!(report_schema_version(), "carnot-hardy-report/1");
        let env = Envelope::new(0, vec![1, 2, 3]);
        let js = env.to_json();
        assert!(js.contains("\"schema\": \"carnot-hardy-report/1\""));
    }
}
