//! Thin async client for `roadgrade-service`.

use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use roadgrade_api as api;
use roadgrade_api::{
    AcceptanceRequest, AcceptanceResponse, ErrorBody, FitBiasRequest, FitBiasResponse, Health, ReplayRequest,
    ReportRequest, RunSummary, SimulateRequest,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },

    #[error("server returned {status}: {message}")]
    Api { status: StatusCode, message: String },

    #[error("malformed response from {url}: {source}")]
    Decode {
        url: String,
        #[source]
        source: reqwest::Error,
    },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is e.g. `http://127.0.0.1:8080`; a trailing slash is ignored.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_owned(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(url: String, response: reqwest::Response) -> Result<T> {
        let status = response.status();
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            let message = error_message(&text).unwrap_or(text);
            return Err(ClientError::Api { status, message });
        }
        response.json().await.map_err(|source| ClientError::Decode { url, source })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, route: &str, body: &B) -> Result<T> {
        let url = format!("{}{route}", self.base);
        let response = self
            .http
            .post(&url)
            .json(body)
            .send()
            .await
            .map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        Self::decode(url, response).await
    }

    pub async fn health(&self) -> Result<Health> {
        let url = format!("{}{}", self.base, api::HEALTH);
        let response = self
            .http
            .get(&url)
            .send()
            .await
            .map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        Self::decode(url, response).await
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> Result<RunSummary> {
        self.post(api::SIMULATE, req).await
    }

    pub async fn replay(&self, req: &ReplayRequest) -> Result<RunSummary> {
        self.post(api::REPLAY, req).await
    }

    pub async fn fit_bias(&self, req: &FitBiasRequest) -> Result<FitBiasResponse> {
        self.post(api::FIT_BIAS, req).await
    }

    pub async fn report(&self, req: &ReportRequest) -> Result<RunSummary> {
        self.post(api::REPORT, req).await
    }

    pub async fn acceptance(&self, req: &AcceptanceRequest) -> Result<AcceptanceResponse> {
        self.post(api::ACCEPTANCE, req).await
    }
}

fn error_message(text: &str) -> Option<String> {
    serde_json::from_str::<ErrorBody>(text).ok().map(|b| b.error)
}
