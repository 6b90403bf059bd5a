//! Labeling-task session service.
//!
//! A [`StudyBundle`] fixes the instances every participant sees, with both
//! models' predictions and explanations. Each session is assigned one of
//! four presentation conditions:
//!
//! * `C0`: the reference prediction only;
//! * `C1`: the prediction plus the evidence supporting it;
//! * `C2`: `C1` followed by a second model's contradicting prediction and
//!   its supporting evidence;
//! * `C3`: the prediction plus evidence for both labels from the reference.
//!
//! Answers are appended to a JSON-lines log before they are acknowledged,
//! and replaying the log restores every session.

pub mod bundle;
pub mod error;
pub mod payload;
pub mod server;
pub mod session;

pub use bundle::{build_bundle, BundleOptions, StudyBundle, StudyInstance};
pub use error::{Result, StudyError};
pub use payload::{payload_for, Condition, ConditionPayload, HighlightSpan, Polarity, Source};
pub use server::{router, serve, AppState};
pub use session::{SessionStore, StudyResults};
