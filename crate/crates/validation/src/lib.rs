//! Shared reporting for the acceptance suite in `tests/acceptance.rs`.

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!("criterion {:02} {} {}: {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }

    /// Prints the outcome line, then fails the calling test if the criterion did.
    pub fn report(self) {
        println!("{}", self.line());
        assert!(self.pass, "criterion {} failed: {}", self.id, self.detail);
    }
}

/// Prints an informational line attached to a criterion.
pub fn info(id: u32, text: impl AsRef<str>) {
    println!("criterion {id:02} info: {}", text.as_ref());
}
