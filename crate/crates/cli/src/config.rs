//! Run options from flags and an optional JSON file. Flags win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryKind {
    Naive,
    Transpose,
}

/// Every option is optional so a config file can fill the gaps.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Code family: one-bin, two-bin, qubit-ad, ext-bin, ce-ext-bin
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Loss order w
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<u32>,
    /// Number of logical qubits K
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Damping parameter in (0, 0.05]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Log-spaced γ grid as lo:hi:n
    #[arg(long = "gamma-grid", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<String>,
    /// Comma-separated evolution times
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<Vec<f64>>,
    /// Logical label such as 01
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Loss pattern such as 1,0,0
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryKind>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long = "max-w", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_w: Option<u32>,
    #[arg(long = "max-k", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_k: Option<u32>,
    /// Critical excitation number
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nc: Option<f64>,
    /// Input amplitude α, e.g. 0.6 or 0.6+0.8i
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    /// Input amplitude β
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
}

macro_rules! fill {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f; } )*
    };
}

impl Options {
    /// Fields set in `self` are kept; the rest come from `fallback`.
    pub fn or(mut self, fallback: Options) -> Options {
        fill!(
            self, fallback, family, w, k, gamma, gamma_grid, dt, label, pattern, recovery, seed,
            format, out, max_w, max_k, nc, alpha, beta
        );
        self
    }

    pub fn from_file(path: &Path) -> Result<Options, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Json)
    }
}

/// Parses lo:hi:n into n log-spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("gamma grid '{s}' is not lo:hi:n"));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid start '{}'", parts[0]))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid end '{}'", parts[1]))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid size '{}'", parts[2]))?;
    if n < 2 || !(lo < hi) {
        return Err(format!("gamma grid '{s}' needs lo < hi and n ≥ 2"));
    }
    Ok(extbin_core::kl::log_grid(lo, hi, n))
}
