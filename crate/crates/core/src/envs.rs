//! Concrete MDP instances, the generative simulator, and the JSON model format.

use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, Regularizer, RegularizerKind};

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a tuple of keys.
pub fn stream_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x005E_ED0F_AB1E_u64, |acc, &k| mix64(acc ^ mix64(k)))
}

pub fn rng_for(keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(keys))
}

// ---------------------------------------------------------------------------
// GridWorld

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorldConfig {
    pub width: usize,
    pub height: usize,
    /// `(row, col)` target cells; seed-placed when `None`.
    pub target_cells: Option<Vec<(usize, usize)>>,
    /// `(row, col)` trap cells; seed-placed when `None`.
    pub trap_cells: Option<Vec<(usize, usize)>>,
    pub num_targets: usize,
    pub num_traps: usize,
    pub target_cost: f64,
    pub trap_cost: f64,
    pub step_cost: f64,
    pub action_noise: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            target_cells: None,
            trap_cells: None,
            num_targets: 1,
            num_traps: 30,
            target_cost: -50.0,
            trap_cost: 50.0,
            step_cost: 1.0,
            action_noise: 0.05,
            gamma: 0.9,
            seed: 0,
        }
    }
}

/// Cardinal moves: up, down, left, right.
const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub targets: Vec<usize>,
    pub traps: Vec<usize>,
}

impl GridWorldConfig {
    /// Resolves target and trap cells to state indices.
    pub fn layout(&self) -> Result<GridLayout> {
        let n = self.width * self.height;
        let to_index = |cells: &[(usize, usize)]| -> Result<Vec<usize>> {
            cells
                .iter()
                .map(|&(r, c)| {
                    if r < self.height && c < self.width {
                        Ok(r * self.width + c)
                    } else {
                        Err(Error::InvalidConfig(format!("cell ({r},{c}) outside the grid")))
                    }
                })
                .collect()
        };
        let mut rng = rng_for(&[self.seed, 0x6721D]);
        let mut cells: Vec<usize> = (0..n).collect();
        cells.shuffle(&mut rng);
        let mut pool = cells.into_iter();

        let targets = match &self.target_cells {
            Some(t) => to_index(t)?,
            None => Vec::new(),
        };
        let traps = match &self.trap_cells {
            Some(t) => to_index(t)?,
            None => Vec::new(),
        };
        let mut targets = targets;
        let mut traps = traps;
        if self.target_cells.is_none() {
            targets = pool
                .by_ref()
                .filter(|c| !traps.contains(c))
                .take(self.num_targets)
                .collect();
        }
        if self.trap_cells.is_none() {
            traps = pool
                .by_ref()
                .filter(|c| !targets.contains(c))
                .take(self.num_traps)
                .collect();
        }
        targets.sort_unstable();
        targets.dedup();
        traps.sort_unstable();
        traps.dedup();
        if targets.iter().any(|t| traps.contains(t)) {
            return Err(Error::InvalidConfig("targets and traps overlap".into()));
        }
        if targets.len() + traps.len() >= n && !targets.is_empty() {
            return Err(Error::InvalidConfig("no free cell left for respawn".into()));
        }
        Ok(GridLayout { targets, traps })
    }
}

/// Noisy grid navigation. The chosen move is applied with probability
/// `1 − action_noise`, otherwise one of the other three uniformly; moves are
/// clamped at the border. From a target cell every action respawns the agent
/// uniformly over cells that are neither traps nor targets.
pub fn build_gridworld(cfg: &GridWorldConfig) -> Result<MdpModel> {
    if cfg.width == 0 || cfg.height == 0 {
        return Err(Error::InvalidConfig("grid must be non-empty".into()));
    }
    if !(0.0..1.0).contains(&cfg.action_noise) {
        return Err(Error::InvalidConfig(format!(
            "action_noise must lie in [0, 1), got {}",
            cfg.action_noise
        )));
    }
    let layout = cfg.layout()?;
    let (w, h) = (cfg.width, cfg.height);
    let n = w * h;
    let na = MOVES.len();
    let respawn: Vec<usize> = (0..n)
        .filter(|c| !layout.traps.contains(c) && !layout.targets.contains(c))
        .collect();

    let mut cost = vec![cfg.step_cost; n * na];
    let mut kernel = Vec::with_capacity(n * na);
    for s in 0..n {
        let is_target = layout.targets.contains(&s);
        let c = if is_target {
            cfg.target_cost
        } else if layout.traps.contains(&s) {
            cfg.trap_cost
        } else {
            cfg.step_cost
        };
        cost[s * na..(s + 1) * na].fill(c);
        let (r, col) = (s / w, s % w);
        for a in 0..na {
            if is_target {
                let p = 1.0 / respawn.len() as f64;
                kernel.push(respawn.iter().map(|&c| (c, p)).collect());
                continue;
            }
            let mut row = vec![0.0; n];
            for (b, &(dr, dc)) in MOVES.iter().enumerate() {
                let p = if b == a {
                    1.0 - cfg.action_noise
                } else {
                    cfg.action_noise / (na - 1) as f64
                };
                if p == 0.0 {
                    continue;
                }
                let nr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                let nc = (col as isize + dc).clamp(0, w as isize - 1) as usize;
                row[nr * w + nc] += p;
            }
            kernel.push(row.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect());
        }
    }
    MdpModel::new(n, na, cfg.gamma, cost, kernel, Regularizer::none())
}

// ---------------------------------------------------------------------------
// Taxi

const TAXI_MAP: [&[u8]; 7] = [
    b"+---------+",
    b"|R: | : :G|",
    b"| : | : : |",
    b"| : : : : |",
    b"| | : | : |",
    b"|Y| : |B: |",
    b"+---------+",
];
const TAXI_LOCS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];

pub const TAXI_STATES: usize = 500;
pub const TAXI_ACTIONS: usize = 6;

pub fn taxi_encode(row: usize, col: usize, pass: usize, dest: usize) -> usize {
    ((row * 5 + col) * 5 + pass) * 4 + dest
}

pub fn taxi_decode(s: usize) -> (usize, usize, usize, usize) {
    let dest = s % 4;
    let pass = (s / 4) % 5;
    let col = (s / 20) % 5;
    let row = s / 100;
    (row, col, pass, dest)
}

/// One transition of the public Taxi environment:
/// `(next_state, reward, terminated)`.
pub fn taxi_step(s: usize, action: usize) -> (usize, f64, bool) {
    let (row, col, pass, dest) = taxi_decode(s);
    let (mut nr, mut nc, mut np) = (row, col, pass);
    let mut reward = -1.0;
    let mut terminated = false;
    let taxi = (row, col);
    match action {
        0 => nr = (row + 1).min(4),
        1 => nr = row.saturating_sub(1),
        2 => {
            if TAXI_MAP[1 + row][2 * col + 2] == b':' {
                nc = (col + 1).min(4);
            }
        }
        3 => {
            if TAXI_MAP[1 + row][2 * col] == b':' {
                nc = col.saturating_sub(1);
            }
        }
        4 => {
            if pass < 4 && taxi == TAXI_LOCS[pass] {
                np = 4;
            } else {
                reward = -10.0;
            }
        }
        5 => {
            if taxi == TAXI_LOCS[dest] && pass == 4 {
                np = dest;
                terminated = true;
                reward = 20.0;
            } else if pass == 4 && TAXI_LOCS.contains(&taxi) {
                np = TAXI_LOCS.iter().position(|&l| l == taxi).expect("location");
            } else {
                reward = -10.0;
            }
        }
        _ => panic!("taxi action {action} out of range"),
    }
    (taxi_encode(nr, nc, np, dest), reward, terminated)
}

/// The public 5x5 Taxi environment as a discounted cost MDP: rewards are
/// negated into costs and transitions are deterministic. The transition
/// table is used verbatim, so a successful drop-off continues from the
/// delivered state instead of ending an episode.
pub fn build_taxi(gamma: f64) -> Result<MdpModel> {
    let mut cost = vec![0.0; TAXI_STATES * TAXI_ACTIONS];
    let mut kernel = Vec::with_capacity(TAXI_STATES * TAXI_ACTIONS);
    for s in 0..TAXI_STATES {
        for a in 0..TAXI_ACTIONS {
            let (next, reward, _) = taxi_step(s, a);
            cost[s * TAXI_ACTIONS + a] = -reward;
            kernel.push(vec![(next, 1.0)]);
        }
    }
    MdpModel::new(TAXI_STATES, TAXI_ACTIONS, gamma, cost, kernel, Regularizer::none())
}

// ---------------------------------------------------------------------------
// Random instances

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpConfig {
    pub seed: u64,
    pub num_states: usize,
    pub num_actions: usize,
    pub branching: usize,
    pub gamma: f64,
    pub cost_range: (f64, f64),
}

/// Garnet-style generator: each `(s,a)` gets `branching` distinct uniformly
/// chosen successors with Dirichlet(1) weights; costs are uniform in range.
pub fn random_mdp(cfg: &RandomMdpConfig) -> Result<MdpModel> {
    check_random_sizes(cfg.num_states, cfg.num_actions, cfg.branching)?;
    let (lo, hi) = cfg.cost_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidConfig("cost range must be finite and ordered".into()));
    }
    let mut rng = rng_for(&[cfg.seed, 0xD1CE]);
    let (ns, na) = (cfg.num_states, cfg.num_actions);
    let states: Vec<usize> = (0..ns).collect();
    let mut kernel = Vec::with_capacity(ns * na);
    let mut cost = Vec::with_capacity(ns * na);
    for _ in 0..ns * na {
        let mut succ: Vec<usize> = states.choose_multiple(&mut rng, cfg.branching).copied().collect();
        succ.sort_unstable();
        let weights: Vec<f64> = succ.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = weights.iter().sum();
        let mut row: Vec<(usize, f64)> = succ.into_iter().zip(weights).map(|(s, w)| (s, w / total)).collect();
        fix_last(&mut row);
        kernel.push(row);
        cost.push(lo + (hi - lo) * rng.random::<f64>());
    }
    MdpModel::new(ns, na, cfg.gamma, cost, kernel, Regularizer::none())
}

/// Random MDP with dyadic-rational probabilities (multiples of
/// `1/denominator`) and integer costs in `[0, max_cost]`.
pub fn random_rational_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    denominator: u32,
    max_cost: u32,
) -> Result<MdpModel> {
    check_random_sizes(num_states, num_actions, 1)?;
    if denominator == 0 {
        return Err(Error::InvalidConfig("denominator must be positive".into()));
    }
    let mut rng = rng_for(&[seed, 0x4A7]);
    let mut kernel = Vec::with_capacity(num_states * num_actions);
    let mut cost = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states * num_actions {
        let mut units = vec![0u32; num_states];
        for _ in 0..denominator {
            units[rng.random_range(0..num_states)] += 1;
        }
        let row = units
            .into_iter()
            .enumerate()
            .filter(|&(_, u)| u > 0)
            .map(|(s, u)| (s, u as f64 / denominator as f64))
            .collect();
        kernel.push(row);
        cost.push(rng.random_range(0..=max_cost) as f64);
    }
    MdpModel::new(num_states, num_actions, gamma, cost, kernel, Regularizer::none())
}

fn check_random_sizes(ns: usize, na: usize, branching: usize) -> Result<()> {
    if ns == 0 || na == 0 || branching == 0 || branching > ns {
        return Err(Error::InvalidConfig(format!(
            "invalid sizes: states {ns}, actions {na}, branching {branching}"
        )));
    }
    Ok(())
}

/// Pushes the rounding residue of a normalised row into its largest entry.
fn fix_last(row: &mut [(usize, f64)]) {
    let total: f64 = row.iter().map(|r| r.1).sum();
    if let Some(big) = row.iter_mut().max_by(|a, b| a.1.total_cmp(&b.1)) {
        big.1 += 1.0 - total;
    }
}

// ---------------------------------------------------------------------------
// Generative simulator

/// Sampling access to an [`MdpModel`]: next-state draws for any `(s,a)`.
/// Randomness comes from the caller, so streams can be keyed externally.
#[derive(Debug, Clone)]
pub struct GenerativeSim {
    model: MdpModel,
    /// Per `(s,a)`: successor states and their cumulative probabilities.
    cdfs: Vec<(Vec<usize>, Vec<f64>)>,
}

impl GenerativeSim {
    pub fn new(model: MdpModel) -> Self {
        let cdfs = model
            .kernel()
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                let states = row.iter().map(|r| r.0).collect();
                let cum = row
                    .iter()
                    .map(|r| {
                        acc += r.1;
                        acc
                    })
                    .collect();
                (states, cum)
            })
            .collect();
        Self { model, cdfs }
    }

    pub fn model(&self) -> &MdpModel {
        &self.model
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let (states, cum) = &self.cdfs[s * self.model.num_actions() + a];
        if states.len() == 1 {
            return states[0];
        }
        let u = rng.random::<f64>() * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c <= u).min(states.len() - 1);
        states[i]
    }
}

// ---------------------------------------------------------------------------
// JSON format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RegularizerFile {
    None,
    Entropy { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    cost: Vec<Vec<f64>>,
    transitions: Vec<Vec<Vec<(usize, f64)>>>,
    regularizer: RegularizerFile,
}

pub fn mdp_to_json(model: &MdpModel) -> String {
    let (ns, na) = (model.num_states(), model.num_actions());
    let reg = model.regularizer();
    let file = MdpFile {
        num_states: ns,
        num_actions: na,
        gamma: model.gamma(),
        cost: (0..ns).map(|s| model.cost_row(s).to_vec()).collect(),
        transitions: (0..ns)
            .map(|s| (0..na).map(|a| model.transitions(s, a).to_vec()).collect())
            .collect(),
        regularizer: match reg.kind {
            RegularizerKind::None => RegularizerFile::None,
            RegularizerKind::ScaledNegativeEntropy => RegularizerFile::Entropy { tau: reg.tau },
        },
    };
    serde_json::to_string(&file).expect("model serialises")
}

/// Parses and validates a model; invariant failures are rejected, not repaired.
pub fn mdp_from_json(text: &str) -> Result<MdpModel> {
    let file: MdpFile = serde_json::from_str(text)?;
    if file.cost.len() != file.num_states || file.transitions.len() != file.num_states {
        return Err(Error::InvalidModel("row count does not match num_states".into()));
    }
    if file.cost.iter().any(|r| r.len() != file.num_actions)
        || file.transitions.iter().any(|r| r.len() != file.num_actions)
    {
        return Err(Error::InvalidModel("column count does not match num_actions".into()));
    }
    let regularizer = match file.regularizer {
        RegularizerFile::None => Regularizer::none(),
        RegularizerFile::Entropy { tau } => {
            if !(tau > 0.0) {
                return Err(Error::InvalidModel("entropy tau must be positive".into()));
            }
            Regularizer::entropy(tau)
        }
    };
    MdpModel::new(
        file.num_states,
        file.num_actions,
        file.gamma,
        file.cost.concat(),
        file.transitions.into_iter().flatten().collect(),
        regularizer,
    )
}

pub fn save_mdp(model: &MdpModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mdp_to_json(model))?;
    Ok(())
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<MdpModel> {
    mdp_from_json(&fs::read_to_string(path)?)
}
