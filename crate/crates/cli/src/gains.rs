//! Gain files: any of `k` (3×6), `k_p` (2×4), `k_q` (1×2), `k_cc` (3×6).

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use rendezvous_core::synthesis::assemble_partially_independent;

use crate::scenario::{matrix_from_rows, matrix_to_rows};

pub const BUNDLED: &str = include_str!("../data/reference_gains.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_q: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_cc: Option<Vec<Vec<f64>>>,
}

/// Which 3×6 feedback matrix to take from a gains file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GainChoice {
    /// `k` if present, otherwise the partially independent assembly.
    Auto,
    /// The explicit `k` entry.
    K,
    /// Assembled from `k_p` and `k_q`.
    Pic,
    /// The `k_cc` entry.
    Cc,
}

impl GainsFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled gains are valid")
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn set(&mut self, name: &str, m: &DMatrix<f64>) {
        let rows = Some(matrix_to_rows(m));
        match name {
            "k" => self.k = rows,
            "k_p" => self.k_p = rows,
            "k_q" => self.k_q = rows,
            "k_cc" => self.k_cc = rows,
            _ => unreachable!("unknown gain entry {name}"),
        }
    }

    fn entry(&self, name: &str, rows: usize, cols: usize) -> anyhow::Result<DMatrix<f64>> {
        let v = match name {
            "k" => &self.k,
            "k_p" => &self.k_p,
            "k_q" => &self.k_q,
            _ => &self.k_cc,
        };
        let v = v.as_ref().ok_or_else(|| anyhow!("gains file has no `{name}` entry"))?;
        matrix_from_rows(v, rows, cols).with_context(|| format!("gain `{name}`"))
    }

    pub fn k_p(&self) -> anyhow::Result<DMatrix<f64>> {
        self.entry("k_p", 2, 4)
    }

    pub fn k_q(&self) -> anyhow::Result<DMatrix<f64>> {
        self.entry("k_q", 1, 2)
    }

    pub fn k_cc(&self) -> anyhow::Result<DMatrix<f64>> {
        self.entry("k_cc", 3, 6)
    }

    pub fn k_pic(&self) -> anyhow::Result<DMatrix<f64>> {
        Ok(assemble_partially_independent(&self.k_p()?, &self.k_q()?)?.k_pic)
    }

    pub fn select(&self, choice: GainChoice) -> anyhow::Result<DMatrix<f64>> {
        match choice {
            GainChoice::K => self.entry("k", 3, 6),
            GainChoice::Pic => self.k_pic(),
            GainChoice::Cc => self.k_cc(),
            GainChoice::Auto => {
                if self.k.is_some() {
                    self.entry("k", 3, 6)
                } else if self.k_p.is_some() && self.k_q.is_some() {
                    self.k_pic()
                } else if self.k_cc.is_some() {
                    self.k_cc()
                } else {
                    bail!("gains file holds no 3x6 gain (need `k`, `k_p` + `k_q`, or `k_cc`)")
                }
            }
        }
    }
}
