//! stub
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("placeholder")]
    Placeholder,
}
