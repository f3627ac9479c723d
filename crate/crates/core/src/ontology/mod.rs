//! Concept taxonomy, the reusable transition library and the reusability
//! index computed against it.

pub mod library;
pub mod reuse;
pub mod taxonomy;

pub use library::{EntryKind, LibraryError, TransitionLibrary, Vocabulary, VocabularyRole};
pub use reuse::{enumerate_entities, reusability_index, Entity, EntityKind, ReusabilityIndex, ReuseError};
pub use taxonomy::{validate_against_taxonomy, Taxonomy, TaxonomyError, TaxonomyReport, Violation};
