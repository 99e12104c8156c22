//! Feature schemas: names, kinds, and where each feature came from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aggregation window over a time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Window {
    Full,
    First10,
    First25,
    First50,
    Last10,
    Last25,
    Last50,
}

impl Window {
    pub const ALL: [Window; 7] = [
        Window::Full,
        Window::First10,
        Window::First25,
        Window::First50,
        Window::Last10,
        Window::Last25,
        Window::Last50,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Window::Full => "full",
            Window::First10 => "first10",
            Window::First25 => "first25",
            Window::First50 => "first50",
            Window::Last10 => "last10",
            Window::Last25 => "last25",
            Window::Last50 => "last50",
        }
    }
}

/// Summary statistic computed over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    Mean,
    Std,
    Min,
    Max,
    Skewness,
    Count,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::Mean,
        Statistic::Std,
        Statistic::Min,
        Statistic::Max,
        Statistic::Skewness,
        Statistic::Count,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Std => "std",
            Statistic::Min => "min",
            Statistic::Max => "max",
            Statistic::Skewness => "skew",
            Statistic::Count => "count",
        }
    }
}

/// Whether a feature is a raw static variable or a windowed aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Static,
    TimeAggregate {
        variable: String,
        window: Window,
        statistic: Statistic,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Values in the matrix are category indices into `categories`.
    Categorical { categories: Vec<String> },
}

impl FeatureKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureKind::Numeric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    pub provenance: Provenance,
}

impl FeatureDescriptor {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureDescriptor {
            name: name.into(),
            kind: FeatureKind::Numeric,
            provenance: Provenance::Static,
        }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Self {
        FeatureDescriptor {
            name: name.into(),
            kind: FeatureKind::Categorical { categories },
            provenance: Provenance::Static,
        }
    }

    pub fn aggregate(variable: &str, window: Window, statistic: Statistic) -> Self {
        FeatureDescriptor {
            name: format!("{}__{}__{}", variable, window.label(), statistic.label()),
            kind: FeatureKind::Numeric,
            provenance: Provenance::TimeAggregate {
                variable: variable.to_string(),
                window,
                statistic,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureDescriptor>,
}

impl Schema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.clone()) {
                return Err(Error::invalid(format!("duplicate feature name {}", f.name)));
            }
        }
        Ok(Schema { features })
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn numeric_indices(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind.is_numeric())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn categorical_indices(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.kind.is_numeric())
            .map(|(i, _)| i)
            .collect()
    }
}
