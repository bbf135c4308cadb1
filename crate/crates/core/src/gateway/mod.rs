//! Chat-completion client, token budgeting and model profiles.

pub mod client;
pub mod profile;
pub mod tokens;
pub mod wire;

pub use client::{
    ChatResponse, Gateway, GatewayError, HttpTransport, Semaphore, TokenUsage, Transport, TransportError,
    DEFAULT_BACKOFF_BASE, DEFAULT_MAX_CONCURRENT,
};
pub use profile::{Modality, ModelProfile, ProfileError};
pub use tokens::{chunk_text, estimate_tokens, usable_budget, BudgetTooSmall, TextChunk, TokenBudget};
pub use wire::{ChatMessage, ChatRequest, ContentPart, Role};
