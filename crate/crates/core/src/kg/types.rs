use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_newtype!(
    /// Opaque entity identifier. Discovered entities use `new:<surface>`.
    EntityId
);
string_newtype!(
    /// Entity type name as it appears in the KG file, e.g. `disease or syndrome`.
    EntityType
);
string_newtype!(
    /// Relation name. The reserved label `NULL` means "no relation" and is
    /// only valid as a classifier output, never inside a stored triple.
    RelationType
);

pub const DISCOVERED_ID_PREFIX: &str = "new:";

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn discovered(normalized_surface: &str) -> Self {
        EntityId(format!("{DISCOVERED_ID_PREFIX}{normalized_surface}"))
    }
}

impl EntityType {
    pub fn new(name: impl Into<String>) -> Self {
        EntityType(name.into())
    }

    /// Form used inside BIO labels: spaces become underscores.
    pub fn label_slug(&self) -> String {
        self.0.replace(' ', "_")
    }
}

impl RelationType {
    pub const NULL_LABEL: &'static str = "NULL";

    pub fn new(name: impl Into<String>) -> Self {
        RelationType(name.into())
    }

    pub fn null() -> Self {
        RelationType(Self::NULL_LABEL.to_string())
    }

    pub fn is_null(&self) -> bool {
        self.0 == Self::NULL_LABEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Source,
    Discovered,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Source => "source",
            Provenance::Discovered => "discovered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: EntityId,
    pub canonical: String,
    pub surfaces: BTreeSet<String>,
    pub etype: EntityType,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationType,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: impl Into<String>, rel: impl Into<String>, tail: impl Into<String>) -> Self {
        Triple {
            head: EntityId::new(head),
            rel: RelationType::new(rel),
            tail: EntityId::new(tail),
        }
    }
}

/// Reference to an entity that is either in the coarse KG or a discovered
/// candidate identified by its normalized surface and type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRef {
    Known(EntityId),
    Candidate { surface: String, etype: EntityType },
}

impl EntityRef {
    pub fn is_candidate(&self) -> bool {
        matches!(self, EntityRef::Candidate { .. })
    }

    /// Id this reference gets in an exported graph.
    pub fn graph_id(&self) -> EntityId {
        match self {
            EntityRef::Known(id) => id.clone(),
            EntityRef::Candidate { surface, .. } => EntityId::discovered(surface),
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Known(id) => f.write_str(id.as_str()),
            EntityRef::Candidate { surface, etype } => {
                write!(f, "{DISCOVERED_ID_PREFIX}{surface} ({etype})")
            }
        }
    }
}
