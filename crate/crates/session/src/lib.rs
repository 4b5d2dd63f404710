//! Live hosting for Pig Chase sessions: treatment assignment, the
//! authoritative turn loop, survey capture, persistence and export.

pub mod clock;
pub mod cohort;
pub mod http;
pub mod protocol;
pub mod store;

pub use clock::{Clock, ManualClock, SystemClock};
pub use cohort::{run_cohort, CohortConfig, CohortError, CohortOutput};
pub use http::{render_export, router, serve, ExportFormat};
pub use protocol::{handle_message, Envelope, KeyPayload, MessageType};
pub use store::{
    board_rows, replay_log, AssignmentMode, AuditEntry, Created, ExportFilter, LogEvent, SessionStore, StoreConfig,
    StoreError, TrialEnd, TurnResult, VisibleState,
};
