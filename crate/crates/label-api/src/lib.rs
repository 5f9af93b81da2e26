//! Local HTTP service for labeling kernels (four texture classes) and
//! candidate segments (Valid / Invalid).
//!
//! Endpoints:
//!
//! | method | path                        | result                              |
//! |--------|-----------------------------|-------------------------------------|
//! | GET    | `/api/tasks?kind&status`    | paged task summaries (JSON)         |
//! | GET    | `/api/tasks/{id}/image`     | PNG thumbnail                       |
//! | POST   | `/api/tasks/{id}/label`     | `{"label": "..."}`, 200 once synced |
//! | GET    | `/api/progress`             | `{total, labeled, by_class}`        |
//! | GET    | `/api/export?kind`          | CSV attachment                      |
//!
//! Any other path is looked up in the optional static asset directory, which
//! is where a browser front end is served from.

pub mod error;
pub mod server;
pub mod session;

pub use error::{ApiError, Result};
pub use server::{router, serve, AppState};
pub use session::{NewTask, Session, TaskKind, TaskMeta, TaskStatus};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/labeling.md")]
mod book_labeling {}
