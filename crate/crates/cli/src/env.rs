use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use pmd_core::envs::{build_gridworld, build_taxi, load_mdp, GridWorldConfig};
use pmd_core::MdpModel;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvSpec {
    Gridworld,
    Taxi,
    File(PathBuf),
}

impl FromStr for EnvSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gridworld" => Ok(EnvSpec::Gridworld),
            "taxi" => Ok(EnvSpec::Taxi),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(EnvSpec::File(PathBuf::from(p))),
                _ => Err(format!("expected gridworld, taxi or file:<path>, got '{s}'")),
            },
        }
    }
}

impl std::fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvSpec::Gridworld => write!(f, "gridworld"),
            EnvSpec::Taxi => write!(f, "taxi"),
            EnvSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// `r,c;r,c;...`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellList(pub Vec<(usize, usize)>);

impl FromStr for CellList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(CellList(Vec::new()));
        }
        s.split(';')
            .map(|cell| {
                let (r, c) = cell
                    .split_once(',')
                    .ok_or_else(|| format!("cell '{cell}' is not of the form row,col"))?;
                let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("cell '{cell}': {e}"));
                Ok((parse(r)?, parse(c)?))
            })
            .collect::<Result<_, _>>()
            .map(CellList)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EnvArgs {
    /// gridworld, taxi, or file:<path>
    #[arg(long)]
    pub env: EnvSpec,
    /// Discount factor; overrides the value stored in a model file.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub width: usize,
    #[arg(long, default_value_t = 20)]
    pub height: usize,
    /// Target cells as `row,col;row,col`; seed-placed when absent.
    #[arg(long)]
    pub targets: Option<CellList>,
    /// Trap cells as `row,col;row,col`; seed-placed when absent.
    #[arg(long)]
    pub traps: Option<CellList>,
    #[arg(long, default_value_t = 30)]
    pub num_traps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub action_noise: f64,
}

pub const DEFAULT_GAMMA: f64 = 0.9;

impl EnvArgs {
    pub fn for_env(env: EnvSpec, gamma: f64) -> Self {
        Self {
            env,
            gamma: Some(gamma),
            width: 20,
            height: 20,
            targets: None,
            traps: None,
            num_traps: 30,
            action_noise: 0.05,
        }
    }

    pub fn gridworld_config(&self, seed: u64) -> GridWorldConfig {
        GridWorldConfig {
            width: self.width,
            height: self.height,
            target_cells: self.targets.clone().map(|c| c.0),
            trap_cells: self.traps.clone().map(|c| c.0),
            num_traps: self.num_traps,
            action_noise: self.action_noise,
            gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
            seed,
            ..GridWorldConfig::default()
        }
    }

    /// Builds the model; `seed` only affects GridWorld placement.
    pub fn build(&self, seed: u64) -> Result<MdpModel, CliError> {
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(CliError::usage(format!("--gamma must lie in [0, 1), got {g}")));
            }
        }
        let model = match &self.env {
            EnvSpec::Gridworld => build_gridworld(&self.gridworld_config(seed)).map_err(|e| match e {
                pmd_core::Error::InvalidConfig(m) => CliError::usage(m),
                e => e.into(),
            })?,
            EnvSpec::Taxi => build_taxi(self.gamma.unwrap_or(DEFAULT_GAMMA))?,
            EnvSpec::File(path) => {
                let m = load_mdp(path).map_err(|e| match e {
                    pmd_core::Error::Io(io) => CliError::invalid_model(format!("{}: {io}", path.display())),
                    e => e.into(),
                })?;
                match self.gamma {
                    Some(g) => m.with_gamma(g)?,
                    None => m,
                }
            }
        };
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_env_specs() {
        assert_eq!("taxi".parse::<EnvSpec>().unwrap(), EnvSpec::Taxi);
        assert_eq!(
            "file:a/b.mdp.json".parse::<EnvSpec>().unwrap(),
            EnvSpec::File(PathBuf::from("a/b.mdp.json"))
        );
        assert!("file:".parse::<EnvSpec>().is_err());
        assert!("maze".parse::<EnvSpec>().is_err());
    }

    #[test]
    fn parses_cells() {
        assert_eq!("1,2;3,4".parse::<CellList>().unwrap().0, vec![(1, 2), (3, 4)]);
        assert!("".parse::<CellList>().unwrap().0.is_empty());
        assert!("1;2".parse::<CellList>().is_err());
    }
}
