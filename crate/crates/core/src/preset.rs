//! Built-in projection-head shapes for the structure-model × language-model grid.
//!
//! Only the structure-model head varies with the layer count; the language
//! model head is always a single layer mapping its embedding onto itself.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::head::HeadConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureModel {
    Gat,
    ScanNet,
    Gvp,
    GearNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LanguageModel {
    Gemma2_2b,
    Llama31_8b,
    Llama31_70b,
}

impl StructureModel {
    pub const ALL: [StructureModel; 4] = [Self::Gat, Self::ScanNet, Self::Gvp, Self::GearNet];

    pub fn embedding_dim(self) -> usize {
        match self {
            Self::Gat => 64,
            Self::ScanNet => 128,
            Self::Gvp => 148,
            Self::GearNet => 3072,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gat => "gat",
            Self::ScanNet => "scannet",
            Self::Gvp => "gvp",
            Self::GearNet => "gearnet",
        }
    }
}

impl LanguageModel {
    pub const ALL: [LanguageModel; 3] = [Self::Gemma2_2b, Self::Llama31_8b, Self::Llama31_70b];

    pub fn embedding_dim(self) -> usize {
        match self {
            Self::Gemma2_2b => 2304,
            Self::Llama31_8b => 4096,
            Self::Llama31_70b => 8192,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gemma2_2b => "gemma2-2b",
            Self::Llama31_8b => "llama3.1-8b",
            Self::Llama31_70b => "llama3.1-70b",
        }
    }
}

impl fmt::Display for StructureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for LanguageModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn normalize(s: &str) -> String {
    s.to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect()
}

impl FromStr for StructureModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| normalize(m.name()) == normalize(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_owned()))
    }
}

impl FromStr for LanguageModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| normalize(m.name()) == normalize(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_owned()))
    }
}

/// A `(structure model, language model)` pair, written `gdm:llm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelPair {
    pub structure: StructureModel,
    pub language: LanguageModel,
}

impl FromStr for ModelPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (g, l) = s
            .split_once(':')
            .ok_or_else(|| Error::UnknownPreset(s.to_owned()))?;
        Ok(Self {
            structure: g.parse()?,
            language: l.parse()?,
        })
    }
}

impl fmt::Display for ModelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.structure, self.language)
    }
}

/// Hidden dimensions of the structure-side head for a layer count in 1..=3.
pub fn hidden_dims(pair: ModelPair, layers: usize) -> Result<Vec<usize>> {
    use LanguageModel::*;
    let gearnet = pair.structure == StructureModel::GearNet;
    let dims = match (layers, pair.language) {
        (1, _) => vec![],
        (2, Gemma2_2b) if gearnet => vec![2560],
        (2, Gemma2_2b) => vec![1024],
        (3, Gemma2_2b) if gearnet => vec![2816, 2560],
        (3, Gemma2_2b) => vec![512, 1024],
        (2, Llama31_8b) if gearnet => vec![3584],
        (2, Llama31_8b) => vec![2048],
        (3, Llama31_8b) if gearnet => vec![3584, 3840],
        (3, Llama31_8b) => vec![512, 2048],
        (2, Llama31_70b) => vec![4096],
        (3, Llama31_70b) if gearnet => vec![4096, 6144],
        (3, Llama31_70b) => vec![1024, 4096],
        _ => {
            return Err(Error::InvalidConfig(format!(
                "{layers} layers; presets cover 1 to 3"
            )))
        }
    };
    Ok(dims)
}

/// Head configs (structure side, language side) for a preset pair.
pub fn preset_configs(pair: ModelPair, layers: usize, seed: u64) -> Result<(HeadConfig, HeadConfig)> {
    let out = pair.language.embedding_dim();
    let graph = HeadConfig::new(
        pair.structure.embedding_dim(),
        out,
        hidden_dims(pair, layers)?,
        seed,
    );
    let text = HeadConfig::new(out, out, vec![], seed.wrapping_add(1));
    Ok((graph, text))
}

/// Every pair in the grid.
pub fn all_pairs() -> impl Iterator<Item = ModelPair> {
    StructureModel::ALL.into_iter().flat_map(|structure| {
        LanguageModel::ALL
            .into_iter()
            .map(move |language| ModelPair { structure, language })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs() {
        let p: ModelPair = "GearNet:LLaMa3.1-70B".parse().unwrap();
        assert_eq!(p.structure, StructureModel::GearNet);
        assert_eq!(p.language, LanguageModel::Llama31_70b);
        assert_eq!(p.to_string(), "gearnet:llama3.1-70b");
        assert!("gearnet".parse::<ModelPair>().is_err());
        assert!("foo:gemma2-2b".parse::<ModelPair>().is_err());
    }

    #[test]
    fn gearnet_70b_three_layers() {
        let p: ModelPair = "gearnet:llama3.1-70b".parse().unwrap();
        let (g, t) = preset_configs(p, 3, 0).unwrap();
        assert_eq!(g.dim_chain(), vec![3072, 4096, 6144, 8192]);
        assert_eq!(t.dim_chain(), vec![8192, 8192]);
    }

    #[test]
    fn grid_is_complete() {
        assert_eq!(all_pairs().count(), 12);
        for pair in all_pairs() {
            for layers in 1..=3 {
                let (g, _) = preset_configs(pair, layers, 0).unwrap();
                assert_eq!(g.layer_count(), layers);
                g.validate().unwrap();
            }
            assert!(hidden_dims(pair, 4).is_err());
        }
    }
}
