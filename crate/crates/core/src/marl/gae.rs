use crate::error::{Error, Result};

/// Generalized advantage estimates and bootstrapped returns.
///
/// `dones[t]` marks that the episode ended after step `t`, cutting both the
/// bootstrap and the advantage trace. `last_value` is the value of the state
/// following the final step, used only if that step is not terminal.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::invalid(format!(
            "GAE inputs differ in length: {} rewards, {} values, {} dones",
            n,
            values.len(),
            dones.len()
        )));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!(
            "gamma and lambda must lie in [0, 1], got {gamma} and {lambda}"
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, -0.5, 2.0, 0.0];
        let v = [0.3, 0.1, -0.2, 0.7];
        let d = [false, true, false, false];
        let (a, _) = gae_advantages(&r, &v, &d, 0.4, 0.9, 0.0).unwrap();
        let next = [v[1], 0.0, v[3], 0.4];
        for t in 0..4 {
            let live = if d[t] { 0.0 } else { 1.0 };
            assert_eq!(a[t], r[t] + 0.9 * next[t] * live - v[t]);
        }
    }

    #[test]
    fn undiscounted_full_trace_telescopes() {
        let r = [1.0, 2.0, 3.0];
        let v = [0.5, -1.0, 2.0];
        let (a, ret) = gae_advantages(&r, &v, &[false; 3], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![6.0 - 0.5, 5.0 + 1.0, 3.0 - 2.0]);
        assert_eq!(ret, vec![6.0, 5.0, 3.0]);
    }

    #[test]
    fn three_step_hand_case() {
        // δ2 = 1 − 0.5 = 0.5                      A2 = 0.5
        // δ1 = 0 + 0.9·0.5 − 0.5 = −0.05          A1 = −0.05 + 0.72·0.5 = 0.31
        // δ0 = 1 + 0.9·0.5 − 0.5 = 0.95           A0 = 0.95 + 0.72·0.31 = 1.1732
        let (a, ret) = gae_advantages(&[1.0, 0.0, 1.0], &[0.5; 3], &[false, false, true], 123.0, 0.9, 0.8).unwrap();
        let want = [1.1732, 0.31, 0.5];
        for t in 0..3 {
            assert!((a[t] - want[t]).abs() < 1e-12);
            assert!((ret[t] - (want[t] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(gae_advantages(&[1.0], &[1.0, 2.0], &[false], 0.0, 0.9, 0.9).is_err());
        assert!(gae_advantages(&[1.0], &[1.0], &[false], 0.0, 1.5, 0.9).is_err());
    }
}
