use modal_align::protein::{summarizer_prompt, Summarizer};
use modal_align::{Error, ProteinRecord, Result};

pub const SUMMARIZER_URL_VAR: &str = "MODAL_ALIGN_SUMMARIZER_URL";

/// Posts the summarizer prompt as JSON `{"system", "user"}` and uses the
/// response body verbatim.
pub struct HttpSummarizer {
    url: String,
}

impl HttpSummarizer {
    pub fn from_env() -> Option<Self> {
        std::env::var(SUMMARIZER_URL_VAR)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .map(|url| Self { url })
    }
}

impl Summarizer for HttpSummarizer {
    fn summarize(&self, record: &ProteinRecord) -> Result<String> {
        let body = serde_json::to_string(&summarizer_prompt(record)).expect("prompt serializes");
        let fail = |e: ureq::Error| Error::Summarizer(format!("{} for {}: {e}", self.url, record.protein_id));
        let mut response = ureq::post(&self.url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(fail)?;
        response.body_mut().read_to_string().map_err(fail)
    }
}
