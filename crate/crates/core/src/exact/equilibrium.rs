use super::space::{compositions, StateSpace};
use super::stationary::Distribution;
use crate::error::{Error, Result};
use crate::fock::{Layout, MixedState, Occupancy};
use crate::scalar::{factorial, Scalar};
use crate::update::UpdateOperator;

/// Outcome of applying single-node `H` to the multinomial state.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport<T> {
    pub bins: usize,
    pub samples: u32,
    /// Ratio of total weights `ΣHΨ / ΣΨ`.
    pub lambda: T,
    /// `‖HΨ − λΨ‖₁`.
    pub residual: T,
    /// Occupancy with the largest residual term, if any is nonzero.
    pub offending: Option<Occupancy>,
    pub state: MixedState<T>,
}

impl<T: Scalar> EquilibriumReport<T> {
    /// `λ = n` with zero residual; float instantiations allow rounding.
    pub fn passed(&self) -> bool {
        let n = T::from_count(self.samples as u64);
        if T::EXACT {
            self.lambda == n && self.residual.is_zero()
        } else {
            let tol = 1e-9 * (1.0 + self.samples as f64);
            (self.lambda.to_f64_lossy() - self.samples as f64).abs() <= tol && self.residual.to_f64_lossy() <= tol
        }
    }
}

fn normalise<T: Scalar>(p: &[T]) -> Result<Vec<T>> {
    if p.is_empty() {
        return Err(Error::Model("at least one bin weight is required".into()));
    }
    if p.iter().any(|w| w.is_negative() || !w.is_finite_value()) {
        return Err(Error::Model("bin weights must be finite and non-negative".into()));
    }
    let total = p.iter().fold(T::zero(), |a, w| a + w.clone());
    if total.is_zero() {
        return Err(Error::Model("bin weights sum to zero".into()));
    }
    Ok(p.iter().map(|w| w.clone() / total.clone()).collect())
}

/// `n!/∏n_k! ∏p_k^{n_k}` for normalised `p`.
pub fn multinomial_weight<T: Scalar>(p: &[T], counts: &[u32]) -> T {
    let n: u32 = counts.iter().sum();
    counts
        .iter()
        .zip(p)
        .fold(factorial::<T>(n), |acc, (&c, pk)| acc / factorial::<T>(c) * num_traits::pow(pk.clone(), c as usize))
}

/// `Ψ = (Σ_k p_k a_k†)^n |0⟩`, whose weight on each histogram is the
/// multinomial probability.
pub fn multinomial_state<T: Scalar>(p: &[T], n: u32) -> Result<MixedState<T>> {
    let p = normalise(p)?;
    let layout = Layout::single(p.len())?;
    let terms = compositions(n, p.len())
        .into_iter()
        .map(|c| {
            let w = multinomial_weight(&p, &c);
            (Occupancy::single(c), w)
        })
        .collect::<Vec<_>>();
    MixedState::from_terms(layout, terms)
}

/// Multinomial law over a single-node space.
pub fn multinomial_distribution<T: Scalar>(space: &StateSpace, p: &[T]) -> Result<Distribution<T>> {
    if space.layout().num_nodes() != 1 || space.layout().bins(0) != p.len() {
        return Err(Error::Config("multinomial law needs a single node with one weight per bin".into()));
    }
    let p = normalise(p)?;
    Distribution::from_weights(space.states().iter().map(|s| multinomial_weight(&p, s.node(0))).collect())
}

/// Applies single-node `H` to the multinomial state and measures how far
/// the result is from `nΨ`. With `perturb`, the weight of the last
/// histogram is doubled first, which breaks the eigen-relation whenever
/// more than one bin carries weight.
pub fn check_equilibrium_multinomial<T: Scalar>(p: &[T], n: u32, perturb: bool) -> Result<EquilibriumReport<T>> {
    if n == 0 {
        return Err(Error::Model("the equilibrium check needs at least one sample".into()));
    }
    let p = normalise(p)?;
    let mut psi = multinomial_state(&p, n)?;
    if perturb {
        let last = Occupancy::single(compositions(n, p.len()).pop().expect("nonempty"));
        let w = psi.weight(&last);
        let bumped = if w.is_zero() { T::one() } else { w.clone() + w };
        psi.insert(last.clone(), bumped - psi.weight(&last))?;
    }
    let h = UpdateOperator::single_node(p.clone())?;
    let h_psi = h.apply(&psi)?;
    let lambda = h_psi.total_weight() / psi.total_weight();
    let diff = h_psi.sub(&psi.scale(&lambda));
    let residual = diff.l1_norm();
    let offending = diff
        .iter()
        .fold(None::<(&Occupancy, T)>, |best, (occ, w)| {
            let a = w.abs();
            match best {
                Some((_, ref b)) if *b >= a => best,
                _ => Some((occ, a)),
            }
        })
        .filter(|(_, w)| !w.is_zero())
        .map(|(occ, _)| occ.clone());
    Ok(EquilibriumReport { bins: p.len(), samples: n, lambda, residual, offending, state: psi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn fair_coin_two_samples() {
        let r = check_equilibrium_multinomial(&[q(1, 2), q(1, 2)], 2, false).unwrap();
        assert_eq!(r.lambda, q(2, 1));
        assert_eq!(r.residual, q(0, 1));
        assert!(r.passed());
        assert_eq!(r.offending, None);
    }

    #[test]
    fn single_sample_state() {
        let p = [q(1, 5), q(3, 5), q(1, 5)];
        let r = check_equilibrium_multinomial(&p, 1, false).unwrap();
        assert_eq!(r.lambda, q(1, 1));
        for (k, pk) in p.iter().enumerate() {
            let mut c = vec![0; 3];
            c[k] = 1;
            assert_eq!(&r.state.weight(&Occupancy::single(c)), pk);
        }
    }

    #[test]
    fn unnormalised_weights_are_normalised() {
        let r = check_equilibrium_multinomial(&[q(2, 1), q(1, 1), q(3, 1), q(1, 1), q(5, 1)], 6, false).unwrap();
        assert!(r.passed());
        assert_eq!(r.state.total_weight(), q(1, 1));
    }

    #[test]
    fn perturbation_is_detected() {
        let r = check_equilibrium_multinomial(&[q(1, 2), q(1, 3), q(1, 6)], 4, true).unwrap();
        assert!(!r.passed());
        assert!(r.residual > q(0, 1));
        assert!(r.offending.is_some());
    }

    #[test]
    fn float_mode_within_rounding() {
        let r = check_equilibrium_multinomial(&[0.4, 0.3, 0.2, 0.1], 8, false).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn multinomial_law() {
        let space = StateSpace::new(Layout::single(2).unwrap(), vec![2], &[]).unwrap();
        let d = multinomial_distribution(&space, &[q(1, 1), q(1, 1)]).unwrap();
        assert_eq!(d.probs(), &[q(1, 4), q(1, 2), q(1, 4)]);
        assert!(check_equilibrium_multinomial::<Rational>(&[], 1, false).is_err());
        assert!(check_equilibrium_multinomial(&[q(1, 1)], 0, false).is_err());
    }
}
