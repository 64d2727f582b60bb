//! Schema-versioned wrapper for emitted diagnostic reports.

use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub schema: u32,
    pub kind: &'static str,
    pub payload: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(kind: &'static str, payload: T) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            kind,
            payload,
        }
    }
}
