//! Advisor reached over HTTP. The request body is the JSON form of
//! `AdvisorRequest`; the reply must be `{"chosen": ..., "rationale": ...}`.

use causal_atlas::selector::{Advisor, AdvisorRequest, AdvisorResponse};
use std::time::Duration;

pub const ADVISOR_TIMEOUT: Duration = Duration::from_secs(5);

pub struct HttpAdvisor {
    url: String,
    agent: ureq::Agent,
}

impl HttpAdvisor {
    pub fn new(url: &str) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(ADVISOR_TIMEOUT)).build().into();
        HttpAdvisor { url: url.to_string(), agent }
    }
}

impl Advisor for HttpAdvisor {
    fn advise(&self, req: &AdvisorRequest) -> Result<AdvisorResponse, String> {
        let mut resp = self.agent.post(&self.url).send_json(req).map_err(|e| format!("advisor request failed: {e}"))?;
        resp.body_mut().read_json::<AdvisorResponse>().map_err(|e| format!("advisor reply unreadable: {e}"))
    }
}
