//! Leader/follower games.
//!
//! A finite Stackelberg-Nash game has one leader choosing from `|X|` actions
//! and `n` followers who, having seen the leader's choice, play a normal-form
//! game among themselves. This module enumerates such games exhaustively:
//! it computes δ-best-response sets, verifies (ε, δ) strong Stackelberg
//! equilibria and finds the leader-optimal pure solution. Followers break
//! indifference in the leader's favour ("strong" tie-breaking).
//!
//! Profiles are indexed in mixed radix with follower 0 most significant, and
//! payoff tables are stored leader-major: entry `leader * |Y| + profile`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default cap on evaluated (leader action, profile) pairs.
pub const DEFAULT_PROFILE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteStackelbergGame {
    leader_actions: usize,
    follower_actions: Vec<usize>,
    profiles: usize,
    leader_payoff: Vec<f64>,
    follower_payoffs: Vec<Vec<f64>>,
}

impl FiniteStackelbergGame {
    /// Build a game from leader-major payoff tables.
    pub fn new(
        leader_actions: usize,
        follower_actions: Vec<usize>,
        leader_payoff: Vec<f64>,
        follower_payoffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if leader_actions == 0 {
            return Err(Error::invalid("leader needs at least one action"));
        }
        if follower_actions.is_empty() {
            return Err(Error::invalid("game needs at least one follower"));
        }
        if let Some(i) = follower_actions.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("follower {i} has no actions")));
        }
        let profiles = follower_actions
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or_else(|| Error::Capacity("profile count overflows usize".into()))?;
        let cells = profiles
            .checked_mul(leader_actions)
            .ok_or_else(|| Error::Capacity("payoff table size overflows usize".into()))?;
        if leader_payoff.len() != cells {
            return Err(Error::invalid(format!(
                "leader payoff table has {} entries, expected {cells}",
                leader_payoff.len()
            )));
        }
        if follower_payoffs.len() != follower_actions.len() {
            return Err(Error::invalid(format!(
                "{} follower payoff tables for {} followers",
                follower_payoffs.len(),
                follower_actions.len()
            )));
        }
        for (i, table) in follower_payoffs.iter().enumerate() {
            if table.len() != cells {
                return Err(Error::invalid(format!(
                    "follower {i} payoff table has {} entries, expected {cells}",
                    table.len()
                )));
            }
        }
        let all_finite = leader_payoff
            .iter()
            .chain(follower_payoffs.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("payoffs must be finite"));
        }
        Ok(FiniteStackelbergGame {
            leader_actions,
            follower_actions,
            profiles,
            leader_payoff,
            follower_payoffs,
        })
    }

    /// Build a game by evaluating payoff functions on every cell.
    pub fn from_fn(
        leader_actions: usize,
        follower_actions: Vec<usize>,
        mut leader: impl FnMut(usize, &[usize]) -> f64,
        mut follower: impl FnMut(usize, usize, &[usize]) -> f64,
    ) -> Result<Self> {
        let n = follower_actions.len();
        let profiles: usize = follower_actions.iter().product();
        let mut lp = Vec::with_capacity(leader_actions * profiles);
        let mut fp = vec![Vec::with_capacity(leader_actions * profiles); n];
        let mut profile = vec![0usize; n];
        for x in 0..leader_actions {
            for p in 0..profiles {
                decode_into(&follower_actions, p, &mut profile);
                lp.push(leader(x, &profile));
                for (i, table) in fp.iter_mut().enumerate() {
                    table.push(follower(i, x, &profile));
                }
            }
        }
        Self::new(leader_actions, follower_actions, lp, fp)
    }

    pub fn leader_actions(&self) -> usize {
        self.leader_actions
    }

    pub fn followers(&self) -> usize {
        self.follower_actions.len()
    }

    pub fn follower_actions(&self) -> &[usize] {
        &self.follower_actions
    }

    /// Number of follower action profiles `|Y|`.
    pub fn profiles(&self) -> usize {
        self.profiles
    }

    pub fn leader_payoff_table(&self) -> &[f64] {
        &self.leader_payoff
    }

    pub fn follower_payoff_table(&self, follower: usize) -> &[f64] {
        &self.follower_payoffs[follower]
    }

    pub fn encode_profile(&self, profile: &[usize]) -> Result<usize> {
        if profile.len() != self.followers() {
            return Err(Error::invalid(format!(
                "profile has {} entries for {} followers",
                profile.len(),
                self.followers()
            )));
        }
        let mut idx = 0usize;
        for (i, (&a, &count)) in profile.iter().zip(&self.follower_actions).enumerate() {
            if a >= count {
                return Err(Error::invalid(format!(
                    "follower {i} action {a} out of range (has {count})"
                )));
            }
            idx = idx * count + a;
        }
        Ok(idx)
    }

    pub fn decode_profile(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.followers()];
        decode_into(&self.follower_actions, index, &mut out);
        out
    }

    fn check_leader(&self, leader: usize) -> Result<()> {
        if leader >= self.leader_actions {
            return Err(Error::invalid(format!(
                "leader action {leader} out of range (has {})",
                self.leader_actions
            )));
        }
        Ok(())
    }

    pub fn leader_payoff(&self, leader: usize, profile: &[usize]) -> Result<f64> {
        self.check_leader(leader)?;
        let p = self.encode_profile(profile)?;
        Ok(self.leader_payoff[leader * self.profiles + p])
    }

    pub fn follower_payoff(&self, follower: usize, leader: usize, profile: &[usize]) -> Result<f64> {
        if follower >= self.followers() {
            return Err(Error::invalid(format!("follower {follower} out of range")));
        }
        self.check_leader(leader)?;
        let p = self.encode_profile(profile)?;
        Ok(self.follower_payoffs[follower][leader * self.profiles + p])
    }

    /// Stride of follower `i` in the mixed-radix profile index.
    fn stride(&self, follower: usize) -> usize {
        self.follower_actions[follower + 1..].iter().product()
    }

    /// Payoffs of every unilateral deviation of `follower` from `profile_idx`.
    fn deviation_payoffs(&self, leader: usize, profile_idx: usize, follower: usize) -> (usize, Vec<f64>) {
        let stride = self.stride(follower);
        let count = self.follower_actions[follower];
        let own = (profile_idx / stride) % count;
        let base = profile_idx - own * stride;
        let table = &self.follower_payoffs[follower];
        let row = leader * self.profiles;
        let payoffs = (0..count).map(|a| table[row + base + a * stride]).collect();
        (own, payoffs)
    }

    fn is_delta_nash(&self, leader: usize, profile_idx: usize, delta: f64) -> bool {
        (0..self.followers()).all(|i| {
            let (own, payoffs) = self.deviation_payoffs(leader, profile_idx, i);
            payoffs[own] >= max_of(&payoffs) - delta
        })
    }

    fn check_capacity(&self, cap: u64) -> Result<()> {
        let total = (self.leader_actions as u128) * (self.profiles as u128);
        if total > cap as u128 {
            return Err(Error::Capacity(format!(
                "{total} (leader, profile) pairs exceed the enumeration cap of {cap}"
            )));
        }
        Ok(())
    }

    /// The best leader payoff over all δ-Nash follower profiles, under
    /// optimistic tie-breaking. Lowest (leader, profile) index wins ties.
    fn best_strong_solution(&self, delta: f64) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for x in 0..self.leader_actions {
            for p in 0..self.profiles {
                if !self.is_delta_nash(x, p, delta) {
                    continue;
                }
                let v = self.leader_payoff[x * self.profiles + p];
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((x, p, v));
                }
            }
        }
        best
    }
}

fn decode_into(counts: &[usize], mut index: usize, out: &mut [usize]) {
    for (slot, &c) in out.iter_mut().zip(counts).rev() {
        *slot = index % c;
        index /= c;
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Slack pair for the (ε, δ) equilibrium conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumTolerance {
    pub epsilon: f64,
    pub delta: f64,
}

impl EquilibriumTolerance {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && delta >= 0.0) {
            return Err(Error::invalid(format!(
                "tolerances must be non-negative, got epsilon={epsilon}, delta={delta}"
            )));
        }
        Ok(EquilibriumTolerance { epsilon, delta })
    }

    pub fn exact() -> Self {
        EquilibriumTolerance {
            epsilon: 0.0,
            delta: 0.0,
        }
    }
}

/// Actions of `follower` whose payoff is within `delta` of the best response,
/// holding the leader action and all other followers' actions fixed. The
/// follower's own entry in `profile` is ignored.
pub fn best_response_set(
    game: &FiniteStackelbergGame,
    leader: usize,
    profile: &[usize],
    follower: usize,
    delta: f64,
) -> Result<Vec<usize>> {
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be non-negative, got {delta}")));
    }
    if follower >= game.followers() {
        return Err(Error::invalid(format!(
            "follower {follower} out of range (game has {})",
            game.followers()
        )));
    }
    game.check_leader(leader)?;
    let idx = game.encode_profile(profile)?;
    let (_, payoffs) = game.deviation_payoffs(leader, idx, follower);
    let best = max_of(&payoffs);
    Ok(payoffs
        .iter()
        .enumerate()
        .filter(|(_, &u)| u >= best - delta)
        .map(|(a, _)| a)
        .collect())
}

/// The inequality a candidate profile violates.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// `follower` gains more than δ by switching from `current` to `better`.
    FollowerDeviation {
        follower: usize,
        current: usize,
        better: usize,
        current_payoff: f64,
        better_payoff: f64,
    },
    /// The leader can reach `value` against a δ-best-responding profile,
    /// more than ε above the candidate's `current_value`.
    LeaderImprovement {
        leader: usize,
        profile: Vec<usize>,
        value: f64,
        current_value: f64,
    },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::FollowerDeviation {
                follower,
                current,
                better,
                current_payoff,
                better_payoff,
            } => write!(
                f,
                "follower {follower} prefers action {better} ({better_payoff}) over {current} ({current_payoff})"
            ),
            Witness::LeaderImprovement {
                leader,
                profile,
                value,
                current_value,
            } => write!(
                f,
                "leader action {leader} with follower profile {profile:?} yields {value} > {current_value}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub holds: bool,
    pub witness: Option<Witness>,
}

pub fn verify_ssmne(
    game: &FiniteStackelbergGame,
    leader: usize,
    profile: &[usize],
    tol: EquilibriumTolerance,
) -> Result<Verdict> {
    verify_ssmne_capped(game, leader, profile, tol, DEFAULT_PROFILE_CAP)
}

/// Check both equilibrium inequalities: every follower is within δ of its
/// best response, and the leader is within ε of the best value attainable
/// against any δ-Nash follower profile.
pub fn verify_ssmne_capped(
    game: &FiniteStackelbergGame,
    leader: usize,
    profile: &[usize],
    tol: EquilibriumTolerance,
    cap: u64,
) -> Result<Verdict> {
    EquilibriumTolerance::new(tol.epsilon, tol.delta)?;
    game.check_leader(leader)?;
    let idx = game.encode_profile(profile)?;
    game.check_capacity(cap)?;

    for i in 0..game.followers() {
        let (own, payoffs) = game.deviation_payoffs(leader, idx, i);
        let best = max_of(&payoffs);
        if payoffs[own] < best - tol.delta {
            let better = payoffs.iter().position(|&u| u == best).unwrap_or(own);
            return Ok(Verdict {
                holds: false,
                witness: Some(Witness::FollowerDeviation {
                    follower: i,
                    current: own,
                    better,
                    current_payoff: payoffs[own],
                    better_payoff: best,
                }),
            });
        }
    }

    let current = game.leader_payoff[leader * game.profiles + idx];
    if let Some((x, p, v)) = game.best_strong_solution(tol.delta) {
        if current < v - tol.epsilon {
            return Ok(Verdict {
                holds: false,
                witness: Some(Witness::LeaderImprovement {
                    leader: x,
                    profile: game.decode_profile(p),
                    value: v,
                    current_value: current,
                }),
            });
        }
    }
    Ok(Verdict {
        holds: true,
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackelbergSolution {
    pub leader: usize,
    pub profile: Vec<usize>,
    pub value: f64,
}

pub fn brute_force_stackelberg(game: &FiniteStackelbergGame, delta: f64) -> Result<StackelbergSolution> {
    brute_force_stackelberg_capped(game, delta, DEFAULT_PROFILE_CAP)
}

/// Exact pure-strategy strong Stackelberg solution by exhaustive enumeration.
pub fn brute_force_stackelberg_capped(
    game: &FiniteStackelbergGame,
    delta: f64,
    cap: u64,
) -> Result<StackelbergSolution> {
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be non-negative, got {delta}")));
    }
    game.check_capacity(cap)?;
    let (leader, p, value) = game.best_strong_solution(delta).ok_or_else(|| {
        Error::NoEquilibrium(format!(
            "no follower profile is a {delta}-Nash equilibrium for any leader action"
        ))
    })?;
    Ok(StackelbergSolution {
        leader,
        profile: game.decode_profile(p),
        value,
    })
}

/// A candidate solution stored alongside a game in the text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileFixture {
    pub leader: usize,
    pub profile: Vec<usize>,
}

/// Parse the finite-game text format:
///
/// ```text
/// stackelberg-game v1
/// leader_actions 2
/// follower_actions 2 3
/// leader_payoffs
/// <|X| * |Y| numbers, leader-major>
/// follower_payoffs 0
/// <|X| * |Y| numbers>
/// follower_payoffs 1
/// ...
/// solution <leader> <a_0> <a_1> ...     (optional)
/// ```
///
/// `#` starts a comment. Numbers may be split across lines freely.
pub fn parse_game(text: &str) -> Result<(FiniteStackelbergGame, Option<ProfileFixture>)> {
    let mut tokens = Tokens(
        text.lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .collect::<Vec<_>>()
            .into_iter()
            .peekable(),
    );

    tokens.expect("stackelberg-game")?;
    tokens.expect("v1")?;
    tokens.expect("leader_actions")?;
    let leader_actions: usize = tokens.number("leader action count")?;
    tokens.expect("follower_actions")?;
    let mut follower_actions = Vec::new();
    while tokens.0.peek().is_some_and(|t| t.parse::<usize>().is_ok()) {
        follower_actions.push(tokens.number("follower action count")?);
    }
    let cells = leader_actions * follower_actions.iter().product::<usize>();

    tokens.expect("leader_payoffs")?;
    let leader_payoff = tokens.table(cells, "leader payoff")?;
    let mut follower_payoffs = Vec::new();
    for i in 0..follower_actions.len() {
        tokens.expect("follower_payoffs")?;
        let idx: usize = tokens.number("follower index")?;
        if idx != i {
            return Err(Error::invalid(format!(
                "follower tables out of order: expected {i}, found {idx}"
            )));
        }
        follower_payoffs.push(tokens.table(cells, "follower payoff")?);
    }
    let game = FiniteStackelbergGame::new(leader_actions, follower_actions, leader_payoff, follower_payoffs)?;

    let fixture = match tokens.0.next() {
        None => None,
        Some("solution") => {
            let leader = tokens.number("solution leader action")?;
            let profile = (0..game.followers())
                .map(|_| tokens.number("solution follower action"))
                .collect::<Result<Vec<usize>>>()?;
            Some(ProfileFixture { leader, profile })
        }
        Some(t) => return Err(Error::invalid(format!("unexpected token `{t}`"))),
    };
    if let Some(t) = tokens.0.next() {
        return Err(Error::invalid(format!("trailing token `{t}`")));
    }
    Ok((game, fixture))
}

struct Tokens<'a>(std::iter::Peekable<std::vec::IntoIter<&'a str>>);

impl Tokens<'_> {
    fn expect(&mut self, want: &str) -> Result<()> {
        match self.0.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(Error::invalid(format!("expected `{want}`, found `{t}`"))),
            None => Err(Error::invalid(format!("expected `{want}`, found end of file"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.0.next().ok_or_else(|| Error::invalid(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::invalid(format!("cannot parse {what} from `{tok}`")))
    }

    fn table(&mut self, cells: usize, what: &str) -> Result<Vec<f64>> {
        (0..cells).map(|_| self.number(what)).collect()
    }
}

pub fn load_game(path: &Path) -> Result<(FiniteStackelbergGame, Option<ProfileFixture>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_game(&text)
}

/// Serialize a game in the format read by [`parse_game`].
pub fn write_game(game: &FiniteStackelbergGame, fixture: Option<&ProfileFixture>) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("stackelberg-game v1\n");
    let _ = writeln!(s, "leader_actions {}", game.leader_actions);
    let counts: Vec<String> = game.follower_actions.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(s, "follower_actions {}", counts.join(" "));
    let write_rows = |s: &mut String, table: &[f64]| {
        for row in table.chunks(game.profiles) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
    };
    s.push_str("leader_payoffs\n");
    write_rows(&mut s, &game.leader_payoff);
    for (i, table) in game.follower_payoffs.iter().enumerate() {
        let _ = writeln!(s, "follower_payoffs {i}");
        write_rows(&mut s, table);
    }
    if let Some(fx) = fixture {
        let acts: Vec<String> = fx.profile.iter().map(|a| a.to_string()).collect();
        let _ = writeln!(s, "solution {} {}", fx.leader, acts.join(" "));
    }
    s
}

/// Descriptive record tying a leader action space to the Markov game it
/// induces. Nothing here solves the Markov game; the learning layer
/// approximates follower responses.
#[derive(Clone)]
pub struct StackelbergMarkovSpec<P> {
    /// Dimension `k` of the leader action space.
    pub leader_dim: usize,
    /// Per-coordinate box bounds of the leader action space.
    pub leader_bounds: Vec<(f64, f64)>,
    /// Maps a leader action to the parameters of the induced game.
    pub implementation_map: Arc<dyn Fn(&[f64]) -> Result<P> + Send + Sync>,
    pub discount: f64,
    pub horizon: usize,
}

impl<P> fmt::Debug for StackelbergMarkovSpec<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StackelbergMarkovSpec")
            .field("leader_dim", &self.leader_dim)
            .field("leader_bounds", &self.leader_bounds)
            .field("discount", &self.discount)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl<P> StackelbergMarkovSpec<P> {
    pub fn new(
        leader_bounds: Vec<(f64, f64)>,
        implementation_map: Arc<dyn Fn(&[f64]) -> Result<P> + Send + Sync>,
        discount: f64,
        horizon: usize,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::invalid(format!("discount must lie in [0, 1), got {discount}")));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if leader_bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::invalid("leader bounds must satisfy lo <= hi"));
        }
        Ok(StackelbergMarkovSpec {
            leader_dim: leader_bounds.len(),
            leader_bounds,
            implementation_map,
            discount,
            horizon,
        })
    }

    /// Apply the implementation map after checking the action lies in the box.
    pub fn induce(&self, action: &[f64]) -> Result<P> {
        if action.len() != self.leader_dim {
            return Err(Error::invalid(format!(
                "leader action has {} coordinates, expected {}",
                action.len(),
                self.leader_dim
            )));
        }
        for (k, (v, (lo, hi))) in action.iter().zip(&self.leader_bounds).enumerate() {
            if !(*lo <= *v && *v <= *hi) {
                return Err(Error::invalid(format!("coordinate {k} = {v} outside [{lo}, {hi}]")));
            }
        }
        (self.implementation_map)(action)
    }

    /// Discounted return of one follower's reward stream, truncated at the horizon.
    pub fn follower_payoff(&self, rewards: &[f64]) -> f64 {
        rewards
            .iter()
            .take(self.horizon)
            .rev()
            .fold(0.0, |acc, r| r + self.discount * acc)
    }
}
