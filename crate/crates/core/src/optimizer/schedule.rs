//! Step-wise select-and-reject device scheduling on the marginal objective
//! `G(S) = sum_{k in S} |b_k|^2 / (log2(1 + sum C_k^0) - log2(1 + sum C_k^1))`.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// Per-device terms `C_k^0 = |h_k b_k|^2 / sigma^2` and
/// `C_k^1 = |h_k b_k - phi_k/rho|^2 / sigma^2`.
#[derive(Debug, Clone)]
pub struct ScheduleTerms {
    power: Vec<f64>,
    signal: Vec<f64>,
    misalignment: Vec<f64>,
}

impl ScheduleTerms {
    pub fn new(h: &[Complex64], b: &[Complex64], rho: f64, weights: &[f64], noise_power: f64) -> Result<Self> {
        let k = h.len();
        check_len("power_scalings", b.len(), k)?;
        check_len("weights", weights.len(), k)?;
        if !(rho > 0.0) {
            return Err(Error::ZeroReceiveScale);
        }
        let mut power = Vec::with_capacity(k);
        let mut signal = Vec::with_capacity(k);
        let mut misalignment = Vec::with_capacity(k);
        for i in 0..k {
            let v = h[i] * b[i];
            power.push(b[i].norm_sqr());
            signal.push(v.norm_sqr() / noise_power);
            misalignment.push((v - weights[i] / rho).norm_sqr() / noise_power);
        }
        Ok(ScheduleTerms {
            power,
            signal,
            misalignment,
        })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// `G(S)`, or `None` when the denominator is not positive.
    pub fn objective(&self, subset: &[bool]) -> Option<f64> {
        let (mut p, mut c0, mut c1) = (0.0, 0.0, 0.0);
        for (i, _) in subset.iter().enumerate().filter(|(_, &s)| s) {
            p += self.power[i];
            c0 += self.signal[i];
            c1 += self.misalignment[i];
        }
        let denom = (1.0 + c0).log2() - (1.0 + c1).log2();
        (denom > 0.0).then(|| p / denom)
    }
}

/// Marginal objective of a device subset; `Ok(None)` marks an infeasible subset.
pub fn marginal_objective(
    subset: &[bool],
    h: &[Complex64],
    b: &[Complex64],
    rho: f64,
    weights: &[f64],
    noise_power: f64,
) -> Result<Option<f64>> {
    check_len("subset", subset.len(), h.len())?;
    if !subset.iter().any(|&s| s) {
        return Err(Error::EmptySchedule);
    }
    Ok(ScheduleTerms::new(h, b, rho, weights, noise_power)?.objective(subset))
}

fn value(g: Option<f64>) -> f64 {
    g.unwrap_or(f64::INFINITY)
}

/// `G(from) - G(to)`, treating infeasible subsets as `+inf`; moving between
/// two infeasible subsets is never an improvement.
fn gain(from: f64, to: f64) -> f64 {
    if to.is_infinite() {
        f64::NEG_INFINITY
    } else {
        from - to
    }
}

/// Greedy drop/swap search starting from the full set.
///
/// Drops the device with the largest objective reduction while the set is
/// larger than `min_scheduled` and the drop strictly helps; otherwise tries
/// the best single swap. Ties go to the lowest device index.
pub fn schedule_devices(
    h: &[Complex64],
    b: &[Complex64],
    rho: f64,
    weights: &[f64],
    noise_power: f64,
    min_scheduled: usize,
) -> Result<Vec<bool>> {
    let terms = ScheduleTerms::new(h, b, rho, weights, noise_power)?;
    let k = terms.len();
    if min_scheduled == 0 || min_scheduled > k {
        return Err(Error::invalid(
            "min_scheduled",
            format!("need 1 <= K_min <= K, got K_min = {min_scheduled}, K = {k}"),
        ));
    }
    let mut set = vec![true; k];
    let mut size = k;
    let mut current = value(terms.objective(&set));

    loop {
        if size > min_scheduled {
            let mut best: Option<(usize, f64, f64)> = None;
            let members: Vec<usize> = (0..k).filter(|&i| set[i]).collect();
            for i in members {
                set[i] = false;
                let g = value(terms.objective(&set));
                set[i] = true;
                let d = gain(current, g);
                if best.is_none_or(|(_, bd, _)| d > bd) {
                    best = Some((i, d, g));
                }
            }
            if let Some((i, d, g)) = best {
                if d > 0.0 {
                    set[i] = false;
                    size -= 1;
                    current = g;
                    continue;
                }
            }
        }

        let mut best: Option<(usize, usize, f64, f64)> = None;
        let members: Vec<usize> = (0..k).filter(|&i| set[i]).collect();
        let outsiders: Vec<usize> = (0..k).filter(|&j| !set[j]).collect();
        for &i in &members {
            for &j in &outsiders {
                set[i] = false;
                set[j] = true;
                let g = value(terms.objective(&set));
                set[j] = false;
                set[i] = true;
                let d = gain(current, g);
                if best.is_none_or(|(_, _, bd, _)| d > bd) {
                    best = Some((i, j, d, g));
                }
            }
        }
        match best {
            Some((i, j, d, g)) if d > 0.0 => {
                set[i] = false;
                set[j] = true;
                current = g;
            }
            _ => break,
        }
    }

    if current.is_infinite() {
        return Err(Error::NoFeasibleSchedule);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn perfect_inversion_value() {
        let h = [c(0.5, 0.1), c(-0.2, 0.7)];
        let phi = [0.4, 0.6];
        let rho = 1.5;
        let b: Vec<_> = h.iter().zip(&phi).map(|(hk, p)| p / (rho * hk)).collect();
        let sigma2 = 0.01;
        let g = marginal_objective(&[true, true], &h, &b, rho, &phi, sigma2).unwrap().unwrap();
        let p: f64 = b.iter().map(|x| x.norm_sqr()).sum();
        let c0: f64 = h.iter().zip(&b).map(|(hk, bk)| (hk * bk).norm_sqr() / sigma2).sum();
        assert!((g / (p / (1.0 + c0).log2()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn silent_devices_are_infeasible() {
        let h = [c(0.5, 0.1), c(-0.2, 0.7)];
        let zero = [c(0.0, 0.0); 2];
        assert_eq!(marginal_objective(&[true, true], &h, &zero, 1.0, &[0.5, 0.5], 0.1).unwrap(), None);
    }

    #[test]
    fn errors() {
        let h = [c(0.5, 0.1)];
        assert!(matches!(
            marginal_objective(&[true], &h, &[c(1.0, 0.0)], 0.0, &[1.0], 0.1),
            Err(Error::ZeroReceiveScale)
        ));
        assert!(matches!(
            marginal_objective(&[false], &h, &[c(1.0, 0.0)], 1.0, &[1.0], 0.1),
            Err(Error::EmptySchedule)
        ));
    }

    #[test]
    fn full_set_when_k_equals_min() {
        let h = [c(0.5, 0.1), c(-0.2, 0.7), c(0.3, -0.3)];
        let phi = [0.3, 0.3, 0.4];
        let b: Vec<_> = h.iter().zip(&phi).map(|(hk, p)| p / (2.0 * hk)).collect();
        let s = schedule_devices(&h, &b, 2.0, &phi, 0.01, 3).unwrap();
        assert_eq!(s, vec![true; 3]);
    }
}
