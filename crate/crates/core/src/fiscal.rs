//! Bracketed income tax on harvested apples, equal-share redistribution, and
//! the selfishness-weighted reward each agent optimizes.

use serde::{Deserialize, Serialize};

use crate::env::PomgState;
use crate::error::{Error, Result};

/// Marginal tax schedule: `boundaries[b]..boundaries[b + 1]` is bracket `b`,
/// taxed at `rates[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxSchedule {
    boundaries: Vec<f64>,
    rates: Vec<f64>,
}

/// Bracket edges `(1,10),(11,20),(21,10000)` expressed as continuous edges.
pub const DEFAULT_BOUNDARIES: [f64; 4] = [0.0, 10.0, 20.0, 10_000.0];

impl TaxSchedule {
    pub fn new(boundaries: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::invalid("a schedule needs at least one bracket"));
        }
        if boundaries[0] != 0.0 {
            return Err(Error::invalid(format!(
                "first bracket edge must be 0, got {}",
                boundaries[0]
            )));
        }
        if !boundaries.windows(2).all(|w| w[0] < w[1]) || !boundaries.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("bracket edges must be finite and strictly ascending"));
        }
        if rates.len() + 1 != boundaries.len() {
            return Err(Error::invalid(format!(
                "{} rates for {} brackets",
                rates.len(),
                boundaries.len() - 1
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid(format!("tax rate {r} outside [0, 1]")));
        }
        Ok(TaxSchedule { boundaries, rates })
    }

    /// No tax in any bracket.
    pub fn zero(boundaries: Vec<f64>) -> Result<Self> {
        let b = boundaries.len().saturating_sub(1);
        Self::new(boundaries, vec![0.0; b])
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn brackets(&self) -> usize {
        self.rates.len()
    }

    /// Same brackets, new rates.
    pub fn with_rates(&self, rates: Vec<f64>) -> Result<Self> {
        Self::new(self.boundaries.clone(), rates)
    }
}

impl Default for TaxSchedule {
    fn default() -> Self {
        TaxSchedule {
            boundaries: DEFAULT_BOUNDARIES.to_vec(),
            rates: vec![0.0; DEFAULT_BOUNDARIES.len() - 1],
        }
    }
}

/// Per-agent selfishness and the value it reports to the vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    pub sigma: f64,
    pub reported_sigma: f64,
}

impl AgentType {
    /// Truthful agent.
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_report(sigma, sigma)
    }

    pub fn with_report(sigma: f64, reported_sigma: f64) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("reported sigma", reported_sigma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(AgentType { sigma, reported_sigma })
    }
}

/// Tax owed on income `a`:
/// `T(a) = Σ_b rate_b · ((τ_{b+1} − τ_b)·1[a > τ_{b+1}] + (a − τ_b)·1[τ_b < a ≤ τ_{b+1}])`.
pub fn tax_due(a: f64, schedule: &TaxSchedule) -> f64 {
    let edges = &schedule.boundaries;
    schedule
        .rates
        .iter()
        .enumerate()
        .map(|(b, rate)| {
            let (lo, hi) = (edges[b], edges[b + 1]);
            if a > hi {
                rate * (hi - lo)
            } else if a > lo {
                rate * (a - lo)
            } else {
                0.0
            }
        })
        .sum()
}

/// Post-tax income plus an equal share of everything collected.
pub fn redistribute(apples: &[f64], schedule: &TaxSchedule) -> Result<Vec<f64>> {
    Ok(settle(apples, schedule)?.taxed)
}

/// Itemized redistribution for one tax period.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub apples: Vec<f64>,
    pub tax_paid: Vec<f64>,
    /// Equal share of the pooled tax received by every agent.
    pub share: f64,
    pub taxed: Vec<f64>,
}

pub fn settle(apples: &[f64], schedule: &TaxSchedule) -> Result<Settlement> {
    if apples.is_empty() {
        return Err(Error::invalid("redistribution needs at least one agent"));
    }
    if let Some(a) = apples.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::invalid(format!("apple count {a} is negative")));
    }
    let tax_paid: Vec<f64> = apples.iter().map(|&a| tax_due(a, schedule)).collect();
    let share = tax_paid.iter().sum::<f64>() / apples.len() as f64;
    let taxed = apples
        .iter()
        .zip(&tax_paid)
        .map(|(a, t)| (a - t) + share)
        .collect();
    Ok(Settlement {
        apples: apples.to_vec(),
        tax_paid,
        share,
        taxed,
    })
}

/// Whose taxed reward enters an agent's social term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocialRewardScope {
    /// Every agent, as in the displayed reward formula.
    #[default]
    All,
    /// The agent itself plus agents inside its observation window.
    FieldOfView,
}

/// `r_i = σ_i·r_tax,i + (1 − σ_i)·Σ_j r_tax,j`.
pub fn mixed_reward(apples: &[f64], types: &[AgentType], schedule: &TaxSchedule) -> Result<Vec<f64>> {
    let taxed = redistribute(apples, schedule)?;
    mix_taxed(&taxed, types, None)
}

/// Mix already-taxed rewards. With `visible`, agent `i`'s social term sums
/// only over `j` with `visible[i][j]` (plus `i` itself).
pub fn mix_taxed(taxed: &[f64], types: &[AgentType], visible: Option<&[Vec<bool>]>) -> Result<Vec<f64>> {
    if taxed.len() != types.len() {
        return Err(Error::invalid(format!(
            "{} rewards for {} agent types",
            taxed.len(),
            types.len()
        )));
    }
    if let Some(v) = visible {
        if v.len() != taxed.len() || v.iter().any(|row| row.len() != taxed.len()) {
            return Err(Error::invalid("visibility matrix must be n x n"));
        }
    }
    let total: f64 = taxed.iter().sum();
    Ok(types
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let social = match visible {
                None => total,
                Some(v) => taxed
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j == i || v[i][j])
                    .map(|(_, r)| r)
                    .sum(),
            };
            t.sigma * taxed[i] + (1.0 - t.sigma) * social
        })
        .collect())
}

/// Levy the period's tax on the state's period tallies, then clear them.
/// Round tallies are left alone. Must be called on a period boundary.
pub fn apply_tax_period(state: &mut PomgState, schedule: &TaxSchedule, period: u64) -> Result<Settlement> {
    if period == 0 || state.step_clock == 0 || !state.step_clock.is_multiple_of(period) {
        return Err(Error::Contract(format!(
            "tax levied at step {} which is not a multiple of the {period}-step period",
            state.step_clock
        )));
    }
    let apples: Vec<f64> = state.apples_this_period.iter().map(|&a| a as f64).collect();
    let settlement = settle(&apples, schedule)?;
    state.apples_this_period.iter_mut().for_each(|a| *a = 0);
    Ok(settlement)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(rates: &[f64]) -> TaxSchedule {
        TaxSchedule::new(DEFAULT_BOUNDARIES.to_vec(), rates.to_vec()).unwrap()
    }

    /// Charge each whole apple unit the rate of the bracket it falls in.
    fn per_unit_tax(a: u64, s: &TaxSchedule) -> f64 {
        (1..=a)
            .map(|u| {
                let u = u as f64;
                (0..s.brackets())
                    .find(|&b| s.boundaries()[b] < u && u <= s.boundaries()[b + 1])
                    .map_or(0.0, |b| s.rates()[b])
            })
            .sum()
    }

    #[test]
    fn zero_rates_never_tax() {
        let s = sched(&[0.0, 0.0, 0.0]);
        for a in [0.0, 1.0, 15.0, 25.0, 50_000.0] {
            assert_eq!(tax_due(a, &s), 0.0);
        }
    }

    #[test]
    fn bracket_examples_match_per_unit_oracle() {
        let s = sched(&[0.1, 0.2, 0.3]);
        let t15 = per_unit_tax(15, &s);
        let t25 = per_unit_tax(25, &s);
        assert!((t15 - 2.0).abs() < 1e-12 && (t25 - 4.5).abs() < 1e-12);
        assert!((tax_due(15.0, &s) - t15).abs() < 1e-12);
        assert!((tax_due(25.0, &s) - t25).abs() < 1e-12);
        assert_eq!(tax_due(0.0, &s), 0.0);
    }

    #[test]
    fn income_above_last_edge_is_untaxed_beyond_it() {
        let s = sched(&[1.0, 1.0, 1.0]);
        assert_eq!(tax_due(20_000.0, &s), 10_000.0);
    }

    #[test]
    fn two_agent_single_bracket() {
        let s = TaxSchedule::new(vec![0.0, 10_000.0], vec![0.5]).unwrap();
        let st = settle(&[10.0, 0.0], &s).unwrap();
        assert_eq!(st.tax_paid, vec![5.0, 0.0]);
        assert_eq!(st.taxed, vec![7.5, 2.5]);
        let types = [AgentType::new(1.0).unwrap(), AgentType::new(0.5).unwrap()];
        let r = mixed_reward(&[10.0, 0.0], &types, &s).unwrap();
        assert_eq!(r[0], 7.5);
        // agent 1 mixes its own 2.5 with the 10.0 total
        assert_eq!(r[1], 0.5 * 2.5 + 0.5 * 10.0);
        let types = [AgentType::new(0.5).unwrap(), AgentType::new(0.0).unwrap()];
        let r = mixed_reward(&[10.0, 0.0], &types, &s).unwrap();
        assert_eq!(r, vec![8.75, 10.0]);
    }

    #[test]
    fn no_tax_is_identity() {
        let s = sched(&[0.0, 0.0, 0.0]);
        assert_eq!(redistribute(&[3.0, 0.0, 12.0], &s).unwrap(), vec![3.0, 0.0, 12.0]);
    }

    #[test]
    fn bad_inputs_rejected() {
        let s = sched(&[0.1, 0.2, 0.3]);
        assert!(redistribute(&[], &s).is_err());
        assert!(mixed_reward(&[1.0, 2.0], &[AgentType::new(0.3).unwrap()], &s).is_err());
        assert!(TaxSchedule::new(vec![1.0, 10.0], vec![0.1]).is_err());
        assert!(TaxSchedule::new(vec![0.0, 10.0, 10.0], vec![0.1, 0.1]).is_err());
        assert!(TaxSchedule::new(vec![0.0, 10.0], vec![1.5]).is_err());
        assert!(TaxSchedule::new(vec![0.0, 10.0], vec![0.1, 0.2]).is_err());
        assert!(AgentType::new(-0.1).is_err());
    }

    #[test]
    fn field_of_view_restricts_social_term() {
        let types = vec![AgentType::new(0.0).unwrap(); 3];
        let vis = vec![
            vec![false, true, false],
            vec![false, false, false],
            vec![true, true, false],
        ];
        let r = mix_taxed(&[1.0, 2.0, 4.0], &types, Some(&vis)).unwrap();
        assert_eq!(r, vec![3.0, 2.0, 7.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn schedule() -> impl Strategy<Value = TaxSchedule> {
            (prop::collection::vec(1u32..40, 1..5), prop::collection::vec(0.0f64..=1.0, 5)).prop_map(|(gaps, rates)| {
                let mut edges = vec![0.0];
                for g in &gaps {
                    edges.push(edges.last().unwrap() + *g as f64);
                }
                TaxSchedule::new(edges, rates[..gaps.len()].to_vec()).unwrap()
            })
        }

        proptest! {
            #[test]
            fn tax_bounded_by_income(s in schedule(), a in 0.0f64..500.0) {
                let t = tax_due(a, &s);
                prop_assert!(t >= 0.0 && t <= a + 1e-12);
            }

            #[test]
            fn tax_monotone_in_income_and_rates(s in schedule(), a in 0.0f64..200.0, da in 0.0f64..50.0, b in 0usize..4, bump in 0.0f64..1.0) {
                prop_assert!(tax_due(a + da, &s) >= tax_due(a, &s));
                let b = b % s.brackets();
                let mut rates = s.rates().to_vec();
                rates[b] = (rates[b] + bump).min(1.0);
                let higher = s.with_rates(rates).unwrap();
                prop_assert!(tax_due(a, &higher) >= tax_due(a, &s));
            }

            #[test]
            fn mixed_reward_affine_in_sigma(s in schedule(), apples in prop::collection::vec(0u32..60, 2..8), s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0) {
                let a: Vec<f64> = apples.iter().map(|&x| x as f64).collect();
                let taxed = redistribute(&a, &s).unwrap();
                let total: f64 = taxed.iter().sum();
                let mut types = vec![AgentType::new(0.5).unwrap(); a.len()];
                types[0] = AgentType::new(s1).unwrap();
                let r1 = mixed_reward(&a, &types, &s).unwrap()[0];
                types[0] = AgentType::new(s2).unwrap();
                let r2 = mixed_reward(&a, &types, &s).unwrap()[0];
                let slope = taxed[0] - total;
                prop_assert!((r2 - r1 - slope * (s2 - s1)).abs() <= 1e-9 * (1.0 + total));
            }
        }
    }
}
