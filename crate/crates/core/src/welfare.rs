//! Social welfare functions and the vote that selects the principal's
//! objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn non_empty(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::invalid("welfare of an empty population"));
    }
    Ok(())
}

/// Sum of utilities.
pub fn utilitarian(u: &[f64]) -> Result<f64> {
    non_empty(u)?;
    Ok(u.iter().sum())
}

/// Geometric mean of non-negative utilities.
pub fn nash_welfare(u: &[f64]) -> Result<f64> {
    non_empty(u)?;
    if let Some(v) = u.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("Nash welfare needs non-negative utilities, got {v}")));
    }
    if u.len() == 1 {
        return Ok(u[0]);
    }
    if u.contains(&0.0) {
        return Ok(0.0);
    }
    let mean_log = u.iter().map(|v| v.ln()).sum::<f64>() / u.len() as f64;
    Ok(mean_log.exp())
}

/// Minimum utility.
pub fn egalitarian(u: &[f64]) -> Result<f64> {
    non_empty(u)?;
    Ok(u.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `η·Σ_i totals_i + (1 − η)·min_i totals_i`. An empty population scores 0.
pub fn interpolated_objective(totals: &[f64], eta: f64) -> f64 {
    if totals.is_empty() {
        return 0.0;
    }
    let sum: f64 = totals.iter().sum();
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    eta * sum + (1.0 - eta) * min
}

/// Mean of reported selfishness.
pub fn social_choice_mean(reports: &[f64]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::invalid("vote with no reports"));
    }
    if let Some(r) = reports.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::invalid(format!("report {r} outside [0, 1]")));
    }
    let mean = reports.iter().sum::<f64>() / reports.len() as f64;
    Ok(mean.clamp(0.0, 1.0))
}

/// The principal's own preference, blended into the vote outcome with
/// `weight`. Disabled by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipalBias {
    pub weight: f64,
    pub eta: f64,
}

impl PrincipalBias {
    pub fn apply(&self, eta: f64) -> f64 {
        ((1.0 - self.weight) * eta + self.weight * self.eta).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WelfareObjective {
    Utilitarian,
    Nash,
    Egalitarian,
    Interpolated { eta: f64 },
}

impl WelfareObjective {
    pub fn interpolated(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta {eta} outside [0, 1]")));
        }
        Ok(WelfareObjective::Interpolated { eta })
    }

    pub fn value(&self, totals: &[f64]) -> Result<f64> {
        match *self {
            WelfareObjective::Utilitarian => utilitarian(totals),
            WelfareObjective::Nash => nash_welfare(totals),
            WelfareObjective::Egalitarian => egalitarian(totals),
            WelfareObjective::Interpolated { eta } => Ok(interpolated_objective(totals, eta)),
        }
    }

    /// Position on the egalitarian (0) to utilitarian (1) axis. Nash welfare
    /// sits in the middle.
    pub fn eta(&self) -> f64 {
        match *self {
            WelfareObjective::Utilitarian => 1.0,
            WelfareObjective::Nash => 0.5,
            WelfareObjective::Egalitarian => 0.0,
            WelfareObjective::Interpolated { eta } => eta,
        }
    }
}

/// Change in the objective between two tally snapshots.
pub fn principal_reward(objective: &WelfareObjective, before: &[f64], after: &[f64]) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::invalid(format!(
            "tally snapshots differ in length ({} vs {})",
            before.len(),
            after.len()
        )));
    }
    Ok(objective.value(after)? - objective.value(before)?)
}

/// Plurality vote over a finite menu: each agent backs the entry whose
/// [`WelfareObjective::eta`] is closest to its report. Ties go to the lower
/// menu index.
pub fn social_choice_menu(reports: &[f64], menu: &[WelfareObjective]) -> Result<WelfareObjective> {
    social_choice_mean(reports)?;
    if menu.is_empty() {
        return Err(Error::invalid("empty objective menu"));
    }
    let mut votes = vec![0usize; menu.len()];
    for &r in reports {
        let pick = menu
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (w.eta() - r).abs()))
            .fold((0, f64::INFINITY), |best, (k, d)| if d < best.1 { (k, d) } else { best })
            .0;
        votes[pick] += 1;
    }
    let winner = votes
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > votes[best] { k } else { best });
    Ok(menu[winner])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub round: u64,
    pub reports: Vec<f64>,
    pub chosen: WelfareObjective,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_values() {
        assert_eq!(utilitarian(&[1.0, 2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(utilitarian(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(nash_welfare(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((nash_welfare(&[4.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(nash_welfare(&[4.0, 0.0, 9.0]).unwrap(), 0.0);
        assert_eq!(egalitarian(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(egalitarian(&[2.5; 3]).unwrap(), 2.5);
    }

    #[test]
    fn errors() {
        assert!(utilitarian(&[]).is_err());
        assert!(egalitarian(&[]).is_err());
        assert!(matches!(nash_welfare(&[1.0, -1.0]), Err(Error::Domain(_))));
        assert!(social_choice_mean(&[0.2, 1.2]).is_err());
        assert!(principal_reward(&WelfareObjective::Utilitarian, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn nash_survives_underflow() {
        let u = vec![1e-200; 50];
        assert!((nash_welfare(&u).unwrap() / 1e-200 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_example() {
        let t = [10.0, 2.0];
        let mid = interpolated_objective(&t, 0.5);
        let blend = 0.5 * utilitarian(&t).unwrap() + 0.5 * egalitarian(&t).unwrap();
        assert_eq!(mid, 7.0);
        assert_eq!(mid, blend);
    }

    #[test]
    fn mean_vote_examples() {
        assert!((social_choice_mean(&[0.2, 0.4, 0.9]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(social_choice_mean(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(social_choice_mean(&[0.37]).unwrap(), 0.37);
    }

    #[test]
    fn principal_reward_examples() {
        let w = WelfareObjective::interpolated(1.0).unwrap();
        assert_eq!(principal_reward(&w, &[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(principal_reward(&w, &[3.0, 4.0], &[4.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn menu_vote_plurality() {
        let menu = [
            WelfareObjective::Egalitarian,
            WelfareObjective::Nash,
            WelfareObjective::Utilitarian,
        ];
        assert_eq!(social_choice_menu(&[0.1, 0.9, 0.95], &menu).unwrap(), WelfareObjective::Utilitarian);
        assert_eq!(social_choice_menu(&[0.1, 0.5], &menu).unwrap(), WelfareObjective::Egalitarian);
    }

    #[test]
    fn bias_hook() {
        let b = PrincipalBias { weight: 0.25, eta: 1.0 };
        assert_eq!(b.apply(0.0), 0.25);
    }

    proptest! {
        #[test]
        fn utilitarian_permutation_invariant(mut u in prop::collection::vec(0.0f64..100.0, 1..12)) {
            let a = utilitarian(&u).unwrap();
            u.sort_by(f64::total_cmp);
            let b = utilitarian(&u).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn nash_matches_direct_product(u in prop::collection::vec(0.01f64..10.0, 1..8)) {
            let direct = u.iter().product::<f64>().powf(1.0 / u.len() as f64);
            let w = nash_welfare(&u).unwrap();
            prop_assert!((w - direct).abs() <= 1e-12 * direct.max(1.0));
        }

        #[test]
        fn egalitarian_homogeneous(u in prop::collection::vec(-50.0f64..50.0, 1..10), c in 0.01f64..20.0) {
            let scaled: Vec<f64> = u.iter().map(|v| v * c).collect();
            let e = egalitarian(&u).unwrap();
            prop_assert!((egalitarian(&scaled).unwrap() - c * e).abs() <= 1e-12 * (1.0 + (c * e).abs()));
        }

        #[test]
        fn welfare_monotone(u in prop::collection::vec(0.0f64..50.0, 1..8), i in 0usize..8, bump in 0.0f64..5.0) {
            let i = i % u.len();
            let mut v = u.clone();
            v[i] += bump;
            prop_assert!(utilitarian(&v).unwrap() >= utilitarian(&u).unwrap());
            prop_assert!(egalitarian(&v).unwrap() >= egalitarian(&u).unwrap());
            prop_assert!(nash_welfare(&v).unwrap() >= nash_welfare(&u).unwrap() * (1.0 - 1e-12));
        }

        #[test]
        fn mean_vote_anonymous_and_bounded(mut r in prop::collection::vec(0.0f64..=1.0, 1..10)) {
            let eta = social_choice_mean(&r).unwrap();
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(eta >= lo - 1e-15 && eta <= hi + 1e-15);
            r.reverse();
            prop_assert!((social_choice_mean(&r).unwrap() - eta).abs() <= 1e-15);
        }

        #[test]
        fn principal_reward_telescopes(steps in prop::collection::vec(prop::collection::vec(0u32..5, 4), 1..10), eta in 0.0f64..=1.0) {
            let w = WelfareObjective::interpolated(eta).unwrap();
            let mut totals = vec![0.0; 4];
            let start = totals.clone();
            let mut sum = 0.0;
            for inc in &steps {
                let before = totals.clone();
                for (t, d) in totals.iter_mut().zip(inc) { *t += *d as f64; }
                sum += principal_reward(&w, &before, &totals).unwrap();
            }
            let direct = w.value(&totals).unwrap() - w.value(&start).unwrap();
            prop_assert!((sum - direct).abs() <= 1e-9);
        }
    }
}
