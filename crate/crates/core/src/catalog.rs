//! Sequence property taxonomy and catalog handling.
//!
//! Each benchmark sequence carries five categorical properties (scene,
//! duration, motion dynamics, environment dynamics, revisit frequency) and an
//! optional difficulty label. Labels are annotations; nothing here derives
//! them from sensor data. Environment dynamics follow the convention: no or
//! rarely moving objects is `Low`, a few moving objects is `Medium`, numerous
//! or frequent object movement is `High`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reference catalog of the twelve benchmark sequences.
pub const CATALOG_CSV: &str = include_str!("../data/sequence_catalog.csv");

/// Sequences shorter than this are `Short`.
pub const SHORT_BELOW_S: f64 = 120.0;
/// Sequences longer than this are `Long`.
pub const LONG_ABOVE_S: f64 = 600.0;

/// Names that refer to the same catalog sequence. The reference result table
/// uses the left-hand spelling while the catalog uses the right-hand one.
pub const SEQUENCE_ALIASES: &[(&str, &str)] = &[
    ("KITTI Seq 04", "Seq 04"),
    ("KITTI Seq 02", "Seq 02"),
    ("Conf. hall1", "Conf. hall2"),
    ("outdoors4", "outdoor4"),
    ("V1 01 diff", "V1 03 diff"),
];

pub const COLUMNS: [&str; 8] = [
    "sequence",
    "platform",
    "scene",
    "duration",
    "motion_dyn",
    "environ_dyn",
    "revisit_freq",
    "difficulty",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("row {row}: unknown value '{value}' in column '{column}'")]
    UnknownEnumValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("duplicate sequence '{0}'")]
    DuplicateSequence(String),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("catalog CSV: {0}")]
    Csv(String),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
}

/// Lower-case alphanumerics only, so "AR Headset", "ar_headset" and "ARHeadset" agree.
pub(crate) fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// A closed enumeration of category values.
pub trait Categorical: Sized + Copy + 'static {
    const ALL: &'static [Self];
    fn name(self) -> &'static str;
    fn aliases(self) -> &'static [&'static str] {
        &[]
    }

    fn parse_loose(s: &str) -> Option<Self> {
        let key = normalize(s);
        Self::ALL.iter().copied().find(|v| {
            normalize(v.name()) == key || v.aliases().iter().any(|a| normalize(a) == key)
        })
    }
}

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal $([$($alias:literal),*])?),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl Categorical for $name {
            const ALL: &'static [Self] = &[$(Self::$variant),+];

            fn name(self) -> &'static str {
                match self {
                    $(Self::$variant => $label),+
                }
            }

            fn aliases(self) -> &'static [&'static str] {
                match self {
                    $(Self::$variant => &[$($($alias),*)?]),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::parse_loose(s).ok_or_else(|| format!("unknown {} '{}'", stringify!($name), s))
            }
        }
    };
}

categorical!(Platform {
    Car => "Car",
    Train => "Train",
    Mav => "MAV" ["drone", "uav"],
    GroundRobot => "GroundRobot" ["Round Robot", "robot"],
    HandHeld => "HandHeld",
    ArHeadset => "ARHeadset" ["headset", "head-mounted"],
    Synthesized => "Synthesized" ["synthetic"],
});

categorical!(Scene {
    Indoor => "Indoor",
    Outdoor => "Outdoor",
    Synthesized => "Synthesized" ["synthetic"],
});

categorical!(Duration {
    Short => "Short",
    Medium => "Medium",
    Long => "Long",
});

categorical!(
    /// Three-level ordinal used for motion dynamics, environment dynamics and
    /// revisit frequency.
    Level {
        Low => "Low" ["smooth"],
        Medium => "Medium",
        High => "High" ["aggressive"],
    }
);

categorical!(Difficulty {
    Easy => "Easy",
    Medium => "Medium",
    Difficult => "Difficult" ["hard"],
});

/// Sequence properties usable as predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    Scene,
    Duration,
    MotionDyn,
    EnvironDyn,
    RevisitFreq,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Scene,
        Property::Duration,
        Property::MotionDyn,
        Property::EnvironDyn,
        Property::RevisitFreq,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Property::Scene => "scene",
            Property::Duration => "duration",
            Property::MotionDyn => "motion_dyn",
            Property::EnvironDyn => "environ_dyn",
            Property::RevisitFreq => "revisit_freq",
        }
    }

    pub fn values(self) -> Vec<&'static str> {
        fn names<T: Categorical>() -> Vec<&'static str> {
            T::ALL.iter().map(|v| v.name()).collect()
        }
        match self {
            Property::Scene => names::<Scene>(),
            Property::Duration => names::<Duration>(),
            Property::MotionDyn | Property::EnvironDyn | Property::RevisitFreq => names::<Level>(),
        }
    }

    pub fn value_of(self, record: &SequenceRecord) -> &'static str {
        match self {
            Property::Scene => record.scene.name(),
            Property::Duration => record.duration.name(),
            Property::MotionDyn => record.motion_dyn.name(),
            Property::EnvironDyn => record.environ_dyn.name(),
            Property::RevisitFreq => record.revisit_freq.name(),
        }
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize(s);
        Property::ALL
            .into_iter()
            .find(|p| normalize(p.column()) == key)
            .ok_or_else(|| format!("unknown property '{s}'"))
    }
}

/// One catalog row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub name: String,
    pub platform: Platform,
    pub scene: Scene,
    pub duration: Duration,
    pub motion_dyn: Level,
    pub environ_dyn: Level,
    pub revisit_freq: Level,
    pub difficulty: Option<Difficulty>,
}

fn field<T: Categorical>(
    row: &csv::StringRecord,
    idx: usize,
    row_no: usize,
    column: &str,
) -> Result<T, CatalogError> {
    let raw = row.get(idx).unwrap_or("");
    T::parse_loose(raw).ok_or_else(|| CatalogError::UnknownEnumValue {
        row: row_no,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Parses a catalog CSV with the columns in [`COLUMNS`] (any order).
pub fn parse_catalog(csv_text: &str) -> Result<Vec<SequenceRecord>, CatalogError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CatalogError::Csv(e.to_string()))?
        .clone();
    let index: BTreeMap<&str, usize> = COLUMNS
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(c))
                .map(|i| (*c, i))
                .ok_or_else(|| CatalogError::MissingColumn(c.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CatalogError::Csv(e.to_string()))?;
        let row_no = i + 1;
        let name = row.get(index["sequence"]).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(CatalogError::UnknownEnumValue {
                row: row_no,
                column: "sequence".into(),
                value: name,
            });
        }
        if !seen.insert(normalize(&name)) {
            return Err(CatalogError::DuplicateSequence(name));
        }
        let difficulty_raw = row.get(index["difficulty"]).unwrap_or("");
        let difficulty = if difficulty_raw.is_empty() {
            None
        } else {
            Some(field(&row, index["difficulty"], row_no, "difficulty")?)
        };
        out.push(SequenceRecord {
            name,
            platform: field(&row, index["platform"], row_no, "platform")?,
            scene: field(&row, index["scene"], row_no, "scene")?,
            duration: field(&row, index["duration"], row_no, "duration")?,
            motion_dyn: field(&row, index["motion_dyn"], row_no, "motion_dyn")?,
            environ_dyn: field(&row, index["environ_dyn"], row_no, "environ_dyn")?,
            revisit_freq: field(&row, index["revisit_freq"], row_no, "revisit_freq")?,
            difficulty,
        });
    }
    Ok(out)
}

/// Writes records as catalog CSV using canonical value names.
pub fn write_catalog(records: &[SequenceRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in records {
        w.write_record([
            r.name.as_str(),
            r.platform.name(),
            r.scene.name(),
            r.duration.name(),
            r.motion_dyn.name(),
            r.environ_dyn.name(),
            r.revisit_freq.name(),
            r.difficulty.map(|d| d.name()).unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// The bundled 12-sequence reference catalog.
pub fn bundled_catalog() -> Vec<SequenceRecord> {
    parse_catalog(CATALOG_CSV).expect("bundled catalog parses")
}

/// Maps a duration in seconds to its category. 120 s and 600 s are `Medium`.
pub fn categorize_duration(seconds: f64) -> Result<Duration, CatalogError> {
    if !(seconds > 0.0) {
        return Err(CatalogError::NonPositiveDuration(seconds));
    }
    Ok(if seconds < SHORT_BELOW_S {
        Duration::Short
    } else if seconds > LONG_ABOVE_S {
        Duration::Long
    } else {
        Duration::Medium
    })
}

/// Finds a record by name, ignoring case and punctuation, falling back to
/// [`SEQUENCE_ALIASES`].
pub fn resolve<'a>(records: &'a [SequenceRecord], name: &str) -> Option<&'a SequenceRecord> {
    let key = normalize(name);
    if let Some(r) = records.iter().find(|r| normalize(&r.name) == key) {
        return Some(r);
    }
    let (alias, target) = SEQUENCE_ALIASES
        .iter()
        .find(|(alias, _)| normalize(alias) == key)?;
    let found = records.iter().find(|r| normalize(&r.name) == normalize(target));
    if found.is_some() {
        log::warn!("sequence '{name}' resolved through alias '{alias}' -> '{target}'");
    }
    found
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCount {
    pub value: String,
    pub count: usize,
    /// Rounded to the nearest integer percent.
    pub percent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySummary {
    pub property: String,
    pub values: Vec<ValueCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub total: usize,
    pub properties: Vec<PropertySummary>,
}

impl CatalogSummary {
    pub fn count(&self, property: &str, value: &str) -> Option<usize> {
        self.properties
            .iter()
            .find(|p| p.property == property)?
            .values
            .iter()
            .find(|v| v.value == value)
            .map(|v| v.count)
    }

    pub fn percent(&self, property: &str, value: &str) -> Option<u32> {
        self.properties
            .iter()
            .find(|p| p.property == property)?
            .values
            .iter()
            .find(|v| v.value == value)
            .map(|v| v.percent)
    }
}

fn tally<T: Categorical + Eq>(
    property: &str,
    records: &[SequenceRecord],
    get: impl Fn(&SequenceRecord) -> Option<T>,
) -> PropertySummary {
    let total = records.len();
    let values = T::ALL
        .iter()
        .map(|&v| {
            let count = records.iter().filter(|r| get(r) == Some(v)).count();
            ValueCount {
                value: v.name().to_string(),
                count,
                percent: ((count as f64 * 100.0) / total as f64).round() as u32,
            }
        })
        .collect();
    PropertySummary {
        property: property.to_string(),
        values,
    }
}

/// Per-property value counts and percentages.
pub fn summarize(records: &[SequenceRecord]) -> Result<CatalogSummary, CatalogError> {
    if records.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }
    let mut properties = vec![tally::<Platform>("platform", records, |r| Some(r.platform))];
    properties.push(tally::<Scene>("scene", records, |r| Some(r.scene)));
    properties.push(tally::<Duration>("duration", records, |r| Some(r.duration)));
    properties.push(tally::<Level>("motion_dyn", records, |r| Some(r.motion_dyn)));
    properties.push(tally::<Level>("environ_dyn", records, |r| Some(r.environ_dyn)));
    properties.push(tally::<Level>("revisit_freq", records, |r| Some(r.revisit_freq)));
    properties.push(tally::<Difficulty>("difficulty", records, |r| r.difficulty));
    Ok(CatalogSummary {
        total: records.len(),
        properties,
    })
}
