//! Annotation tasks for aligned sign clips: a durable store with optimistic
//! per-task versioning, live gloss validation, and a small HTTP service for
//! the annotation client.

mod service;
mod store;

pub use service::{serve, ServiceConfig, ServiceHandle};
pub use store::{
    validate, AnnotationTask, Diagnostic, LogEntry, Status, Store, StoreError, TaskFilter,
    TaskSeed, TaskSummary, ANNOTATION_LOG, MANIFEST,
};
