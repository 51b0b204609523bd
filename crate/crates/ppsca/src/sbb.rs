//! stub
#[derive(Debug, thiserror::Error)]
pub enum SbbError {
    #[error("placeholder")]
    Placeholder,
}
