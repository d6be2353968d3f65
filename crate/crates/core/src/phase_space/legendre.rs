//! Discrete Legendre transformations exchanging `(E_i, I^i)` pairs, and
//! Legendre submanifolds generated by a function of mixed coordinates.

use alloc::format;
use alloc::vec::Vec;

use super::{eta1, Embedding, PhasePoint};
use crate::autodiff::Jet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// The set of index pairs exchanged by a Legendre transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegendrePartition {
    n: usize,
    mask: u32,
}

impl LegendrePartition {
    pub fn from_mask(n: usize, mask: u32) -> Result<Self> {
        if n == 0 || n > 31 {
            return Err(Error::InvalidArgument(format!("partition size must be in 1..=31, got {n}")));
        }
        if mask >> n != 0 {
            return Err(Error::InvalidArgument(format!("mask {mask:#b} has bits beyond n = {n}")));
        }
        Ok(Self { n, mask })
    }

    pub fn new(n: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            mask |= 1 << i;
        }
        Self::from_mask(n, mask)
    }

    pub fn total(n: usize) -> Result<Self> {
        Self::from_mask(n, if n >= 32 { 0 } else { (1u32 << n) - 1 })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::from_mask(n, 0)
    }

    /// All `2ⁿ` partitions.
    pub fn all(n: usize) -> Result<Vec<Self>> {
        Self::from_mask(n, 0)?;
        (0..1u32 << n).map(|m| Self::from_mask(n, m)).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.mask & (1 << i) != 0
    }

    pub fn is_total(&self) -> bool {
        self.mask.count_ones() as usize == self.n
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.contains(i)).collect()
    }
}

/// `φ' = φ − Σ_{i∈set} I^i E_i`, `I'^i = −E_i`, `E'_i = I^i`; other pairs unchanged.
pub fn legendre_transform(p: &PhasePoint, part: &LegendrePartition) -> Result<PhasePoint> {
    let x: Vec<Jet> = p.coords().iter().map(|&v| Jet::constant(v)).collect();
    let y = legendre_transform_jets(&x, part)?;
    PhasePoint::from_coords(part.n(), &y.iter().map(Jet::value).collect::<Vec<_>>())
}

/// The same map on jets of the coordinates `(φ, E, I)`.
pub fn legendre_transform_jets(x: &[Jet], part: &LegendrePartition) -> Result<Vec<Jet>> {
    let n = part.n();
    if x.len() != 2 * n + 1 {
        return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: x.len() });
    }
    let mut y = x.to_vec();
    for i in part.indices() {
        let (e, ii) = (&x[1 + i], &x[1 + n + i]);
        y[0] = &y[0] - &(ii * e);
        y[1 + i] = ii.clone();
        y[1 + n + i] = -e;
    }
    Ok(y)
}

/// `∂(φ', E', I')/∂(φ, E, I)` at `p`, by forward differentiation.
pub fn legendre_jacobian(p: &PhasePoint, part: &LegendrePartition) -> Result<Matrix> {
    let d = p.dim();
    let x = Jet::seed(&p.coords(), 1)?;
    let y = legendre_transform_jets(&x, part)?;
    Ok(Matrix::from_fn(d, d, |r, c| if y[r].nvars() == 0 { 0.0 } else { y[r].grad()[c] }))
}

/// `max |f*(η₁) − η₁|` at `p`, with `f*(η₁)_μ = η₁(f(p))_ν ∂f^ν/∂x^μ`.
pub fn legendre_contact_residual(p: &PhasePoint, part: &LegendrePartition) -> Result<f64> {
    let image = legendre_transform(p, part)?;
    let pulled = eta1(&image).contract(&legendre_jacobian(p, part)?)?;
    Ok(pulled.iter().zip(eta1(p).coeffs()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// The Legendre submanifold generated by `Φ(u)`, where `u_i = E_i` for
/// exchanged indices and `u_j = I^j` otherwise:
///
/// `E_j = ∂Φ/∂I^j`, `I^i = −∂Φ/∂E_i`, `φ = Φ − Σ_i E_i ∂Φ/∂E_i`.
///
/// The tangent is taken with respect to `u`.
pub fn legendre_submanifold<F>(generator: F, part: &LegendrePartition, at: &[f64]) -> Result<Embedding>
where
    F: Fn(&[Jet]) -> Result<Jet>,
{
    let n = part.n();
    if at.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: at.len() });
    }
    let u = Jet::seed(at, 2)?;
    let big_phi = generator(&u)?;
    let partials: Vec<Jet> = (0..n).map(|k| big_phi.derivative(k)).collect::<Result<_>>()?;
    let u1: Vec<Jet> = u.iter().map(|x| x.truncate(1)).collect();
    let mut phi = big_phi.truncate(1);
    let mut extensive = Vec::with_capacity(n);
    let mut intensive = Vec::with_capacity(n);
    for k in 0..n {
        if part.contains(k) {
            phi = &phi - &(&u1[k] * &partials[k]);
            extensive.push(u1[k].clone());
            intensive.push(-&partials[k]);
        } else {
            extensive.push(partials[k].clone());
            intensive.push(u1[k].clone());
        }
    }
    let rows: Vec<&Jet> = core::iter::once(&phi).chain(&extensive).chain(&intensive).collect();
    let tangent = Matrix::from_fn(2 * n + 1, n, |r, c| if rows[r].nvars() == 0 { 0.0 } else { rows[r].grad()[c] });
    let coords: Vec<f64> = rows.iter().map(|j| j.value()).collect();
    Ok(Embedding { point: PhasePoint::from_coords(n, &coords)?, tangent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Ensemble;
    use crate::phase_space::embed;
    use alloc::vec;

    #[test]
    fn total_transform_example() {
        let p = PhasePoint::new(2.0, vec![3.0], vec![5.0]).unwrap();
        let q = legendre_transform(&p, &LegendrePartition::total(1).unwrap()).unwrap();
        assert_eq!(q.coords(), vec![-13.0, 5.0, -3.0]);
    }

    #[test]
    fn empty_partition_is_identity() {
        let p = PhasePoint::new(0.4, vec![1.0, -2.0], vec![0.5, 3.0]).unwrap();
        assert_eq!(legendre_transform(&p, &LegendrePartition::empty(2).unwrap()).unwrap(), p);
    }

    #[test]
    fn twice_negates_pairs() {
        let p = PhasePoint::new(0.375, vec![1.0, -2.0, 0.25], vec![0.5, 3.0, -1.5]).unwrap();
        let part = LegendrePartition::total(3).unwrap();
        let q = legendre_transform(&legendre_transform(&p, &part).unwrap(), &part).unwrap();
        assert_eq!(q.phi, p.phi);
        assert_eq!(q.extensive, vec![-1.0, 2.0, -0.25]);
        assert_eq!(q.intensive, vec![-0.5, -3.0, 1.5]);
    }

    #[test]
    fn contact_form_preserved() {
        let p = PhasePoint::new(-0.7, vec![1.3, -2.1], vec![0.5, 0.9]).unwrap();
        for part in LegendrePartition::all(2).unwrap() {
            assert!(legendre_contact_residual(&p, &part).unwrap() <= 1e-15);
        }
    }

    #[test]
    fn partition_validation() {
        assert!(LegendrePartition::from_mask(2, 0b100).is_err());
        assert!(LegendrePartition::new(2, &[2]).is_err());
        assert_eq!(LegendrePartition::new(3, &[0, 2]).unwrap().indices(), vec![0, 2]);
        assert!(LegendrePartition::total(3).unwrap().is_total());
    }

    #[test]
    fn submanifold_examples() {
        let total = LegendrePartition::total(1).unwrap();
        let sheet = legendre_submanifold(|u| Ok(&(&u[0] * &u[0]) * 0.5), &total, &[1.5]).unwrap();
        assert_eq!(sheet.point.coords(), vec![-1.125, 1.5, -1.5]);
        assert!(sheet.pullback_form(&eta1(&sheet.point)).unwrap()[0].abs() <= 1e-12);

        let flat = legendre_submanifold(|_| Ok(Jet::constant(2.5)), &LegendrePartition::new(2, &[1]).unwrap(), &[0.3, -0.2])
            .unwrap();
        assert_eq!(flat.point.phi, 2.5);
        assert_eq!(flat.point.extensive[0], 0.0);
        assert_eq!(flat.point.intensive[1], 0.0);
    }

    #[test]
    fn empty_partition_reproduces_embedding() {
        let ens = Ensemble::ising_ring(4, 1.0, 0.0).unwrap();
        let at = [-0.3, 0.1];
        let sheet =
            legendre_submanifold(|u| ens.log_partition(u), &LegendrePartition::empty(2).unwrap(), &at).unwrap();
        let e = embed(&ens, &at).unwrap();
        assert_eq!(sheet.point, e.point);
        assert!(sheet.tangent.to_rows().iter().flatten().zip(e.tangent.to_rows().iter().flatten()).all(|(a, b)| (a - b).abs() < 1e-14));
    }
}
