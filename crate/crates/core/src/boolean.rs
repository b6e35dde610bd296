//! Real-valued functions on the Boolean cube and their Fourier spectra.
//!
//! Point and subset indices share one convention: bit `i` set means
//! coordinate `i + 1` is `-1` (for points) or belongs to the set (for
//! subsets), so the character `z_S` is `(-1)^popcount(S & z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_DIM: usize = 24;

#[inline]
pub fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

/// `z_S` as ±1.
#[inline]
pub fn character(s: u64, z: u64) -> i64 {
    if parity(s & z) {
        -1
    } else {
        1
    }
}

/// Point index of a ±1 vector.
pub fn index_of(z: &[i8]) -> u64 {
    z.iter()
        .enumerate()
        .fold(0, |acc, (i, &v)| if v < 0 { acc | (1 << i) } else { acc })
}

pub fn signs_of(idx: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| if idx >> i & 1 == 1 { -1 } else { 1 }).collect()
}

fn check_dim(n: usize) -> Result<()> {
    if n > MAX_DIM {
        return Err(Error::DimensionTooLarge { n, cap: MAX_DIM });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BooleanFn<S> {
    n: usize,
    values: Vec<S>,
}

impl<S: Scalar> BooleanFn<S> {
    pub fn new(n: usize, values: Vec<S>) -> Result<Self> {
        check_dim(n)?;
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(Error::TableLength { n, got: values.len(), expected });
        }
        let one = S::one();
        for (index, v) in values.iter().enumerate() {
            if *v > one || *v < -one.clone() {
                return Err(Error::ValueOutOfRange { index, value: v.to_f64() });
            }
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(u64) -> S) -> Result<Self> {
        check_dim(n)?;
        Self::new(n, (0..1u64 << n).map(f).collect())
    }

    pub fn constant(n: usize, c: S) -> Result<Self> {
        Self::from_fn(n, |_| c.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, z: u64) -> &S {
        &self.values[z as usize]
    }

    pub fn spectrum(&self) -> FourierSpectrum<S> {
        walsh_hadamard(self)
    }

    pub fn to_f64(&self) -> BooleanFn<f64> {
        BooleanFn { n: self.n, values: self.values.iter().map(|v| v.to_f64()).collect() }
    }

    pub fn to_json(&self) -> String {
        let repr = BooleanFnRepr { n: self.n, values: self.values.iter().map(|v| v.to_f64()).collect() };
        serde_json::to_string(&repr).expect("plain numeric struct serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: BooleanFnRepr = serde_json::from_str(s)?;
        Self::new(repr.n, repr.values.into_iter().map(S::from_f64).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct BooleanFnRepr {
    n: usize,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum<S> {
    n: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> FourierSpectrum<S> {
    pub fn from_coeffs(n: usize, coeffs: Vec<S>) -> Result<Self> {
        check_dim(n)?;
        let expected = 1usize << n;
        if coeffs.len() != expected {
            return Err(Error::TableLength { n, got: coeffs.len(), expected });
        }
        Ok(Self { n, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, s: u64) -> &S {
        &self.coeffs[s as usize]
    }

    pub fn sum_of_squares(&self) -> S {
        self.coeffs.iter().fold(S::zero(), |acc, c| acc + c.clone() * c.clone())
    }

    /// Inverse transform; reproduces the value table.
    pub fn inverse(&self) -> Vec<S> {
        let mut t = self.coeffs.clone();
        butterfly(&mut t);
        t
    }

    /// `L_{1,k}` for every level `0..=n`.
    pub fn level_weights(&self) -> Vec<S> {
        let mut w = vec![S::zero(); self.n + 1];
        for (s, c) in self.coeffs.iter().enumerate() {
            let k = (s as u64).count_ones() as usize;
            w[k] = w[k].clone() + c.abs();
        }
        w
    }
}

/// Unnormalized in-place Hadamard butterfly; fixed pairing order.
fn butterfly<S: Scalar>(t: &mut [S]) {
    let len = t.len();
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for j in block..block + h {
                let a = t[j].clone();
                let b = t[j + h].clone();
                t[j] = a.clone() + b.clone();
                t[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `f̂(S) = 2^{-n} Σ_z f(z) z_S`, O(n 2^n).
pub fn walsh_hadamard<S: Scalar>(f: &BooleanFn<S>) -> FourierSpectrum<S> {
    let mut t = f.values.clone();
    butterfly(&mut t);
    let scale = S::dyadic(f.n as u32);
    for c in t.iter_mut() {
        *c = c.clone() * scale.clone();
    }
    FourierSpectrum { n: f.n, coeffs: t }
}

/// Normalized transform of a raw table whose length is a power of two.
pub fn walsh_hadamard_table<S: Scalar>(values: &[S]) -> Result<Vec<S>> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let n = len.trailing_zeros();
    let mut t = values.to_vec();
    butterfly(&mut t);
    let scale = S::dyadic(n);
    for c in t.iter_mut() {
        *c = c.clone() * scale.clone();
    }
    Ok(t)
}

/// `L_{1,k} = Σ_{|S|=k} |f̂(S)|`.
pub fn l1_level_weight<S: Scalar>(spec: &FourierSpectrum<S>, k: usize) -> Result<S> {
    if k > spec.n {
        return Err(Error::LevelOutOfRange { k, n: spec.n });
    }
    Ok(spec
        .coeffs
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as u64).count_ones() as usize == k)
        .fold(S::zero(), |acc, (_, c)| acc + c.abs()))
}

/// `Σ_S f̂(S) ρ^{|S|} = E_{z~μ_ρ}[f(z)]`, where each `z_i` has mean `ρ`.
pub fn biased_expectation<S: Scalar>(spec: &FourierSpectrum<S>, rho: &S) -> Result<S> {
    let one = S::one();
    if *rho >= one || *rho <= -one {
        return Err(Error::InvalidArgument(format!("bias {:?} outside (-1, 1)", rho)));
    }
    let mut powers = vec![S::one(); spec.n + 1];
    for k in 1..=spec.n {
        powers[k] = powers[k - 1].clone() * rho.clone();
    }
    Ok(spec.coeffs.iter().enumerate().fold(S::zero(), |acc, (s, c)| {
        acc + c.clone() * powers[(s as u64).count_ones() as usize].clone()
    }))
}

/// `sign(z_1 + … + z_d)` on `{±1}^n`.
pub fn majority_fn<S: Scalar>(d: usize, n: usize) -> Result<BooleanFn<S>> {
    if d.is_multiple_of(2) {
        return Err(Error::EvenMajority(d));
    }
    if d > n {
        return Err(Error::InvalidArgument(format!("majority size {d} exceeds dimension {n}")));
    }
    let mask = (1u64 << d) - 1;
    BooleanFn::from_fn(n, |z| {
        if 2 * (z & mask).count_ones() as usize > d {
            -S::one()
        } else {
            S::one()
        }
    })
}

/// `(2/n)·⟨H x_1, x_2⟩` with `H` the unitary Hadamard matrix of size `n/2`.
pub fn forrelation(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let half = n / 2;
    let mut hx = x[..half].to_vec();
    butterfly(&mut hx);
    let scale = 1.0 / (half as f64).sqrt();
    let ip: f64 = hx.iter().zip(&x[half..]).map(|(a, b)| a * scale * b).sum();
    Ok(2.0 / n as f64 * ip)
}

/// Function with some inputs undefined (a promise problem).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialFn {
    n: usize,
    values: Vec<Option<i8>>,
}

impl PartialFn {
    pub fn new(n: usize, values: Vec<Option<i8>>) -> Result<Self> {
        check_dim(n)?;
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(Error::TableLength { n, got: values.len(), expected });
        }
        if let Some(index) = values.iter().position(|v| matches!(v, Some(x) if x.abs() != 1)) {
            let value = values[index].unwrap_or(0) as f64;
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self { n, values })
    }

    pub fn from_total<S: Scalar>(f: &BooleanFn<S>) -> Result<Self> {
        let mut values = Vec::with_capacity(f.values.len());
        for (index, v) in f.values.iter().enumerate() {
            if *v == S::one() {
                values.push(Some(1));
            } else if *v == -S::one() {
                values.push(Some(-1));
            } else {
                return Err(Error::ValueOutOfRange { index, value: v.to_f64() });
            }
        }
        Ok(Self { n: f.n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, z: u64) -> Option<i8> {
        self.values[z as usize]
    }

    pub fn domain(&self) -> impl Iterator<Item = u64> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(z, _)| z as u64)
    }

    pub fn domain_size(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn to_total<S: Scalar>(&self) -> Result<BooleanFn<S>> {
        if let Some(z) = self.values.iter().position(Option::is_none) {
            return Err(Error::PartialInput(z));
        }
        BooleanFn::from_fn(self.n, |z| S::from_i64(self.values[z as usize].unwrap() as i64))
    }
}

/// Forrelation promise function on `{±1}^n`: `+1` when `Forr(z) ≥ 1/(200 ln(n/2))`,
/// `-1` when `Forr(z) ≤ 1/(400 ln(n/2))`, undefined in between.
pub fn forrelation_partial(n: usize) -> Result<PartialFn> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("forrelation promise needs n = 2^m >= 4, got {n}")));
    }
    check_dim(n)?;
    let ln = ((n / 2) as f64).ln();
    let (hi, lo) = (1.0 / (200.0 * ln), 1.0 / (400.0 * ln));
    let values = (0..1u64 << n)
        .map(|z| {
            let x: Vec<f64> = signs_of(z, n).into_iter().map(f64::from).collect();
            let f = forrelation(&x).expect("length checked");
            if f >= hi {
                Some(1)
            } else if f <= lo {
                Some(-1)
            } else {
                None
            }
        })
        .collect();
    PartialFn::new(n, values)
}

/// Largest `L_{1,1}` over all restrictions of `f` (each coordinate fixed to
/// `+1`, fixed to `-1`, or left free). Cost `O(3^n n)`.
///
/// Restriction codes are base-3 with digit 0 = `+1`, 1 = `-1`, 2 = free.
/// Replacing a free digit by 0 or 1 lowers the code, so one increasing pass
/// sees both children before the parent.
pub fn max_restricted_level1<S: Scalar>(f: &BooleanFn<S>) -> Result<S> {
    const CAP: usize = 12;
    let n = f.n;
    if n > CAP {
        return Err(Error::DimensionTooLarge { n, cap: CAP });
    }
    let pow3: Vec<usize> = (0..=n).map(|i| 3usize.pow(i as u32)).collect();
    let half = S::dyadic(1);
    let mut mean = vec![S::zero(); pow3[n]];
    let mut best = S::zero();
    for r in 0..pow3[n] {
        let mut free = Vec::new();
        let mut point = 0u64;
        let mut rest = r;
        for i in 0..n {
            match rest % 3 {
                1 => point |= 1 << i,
                2 => free.push(i),
                _ => {}
            }
            rest /= 3;
        }
        let Some(&first) = free.first() else {
            mean[r] = f.values[point as usize].clone();
            continue;
        };
        mean[r] = (mean[r - 2 * pow3[first]].clone() + mean[r - pow3[first]].clone()) * half.clone();
        let mut l11 = S::zero();
        for &i in &free {
            let diff = mean[r - 2 * pow3[i]].clone() - mean[r - pow3[i]].clone();
            l11 = l11 + diff.abs() * half.clone();
        }
        best = S::max_of(best, l11);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use num_rational::Ratio;

    #[test]
    fn constant_and_character_spectra() {
        let f = BooleanFn::<f64>::constant(2, 1.0).unwrap();
        assert_eq!(f.spectrum().coeffs(), &[1.0, 0.0, 0.0, 0.0]);
        let g = BooleanFn::<f64>::from_fn(2, |z| character(1, z) as f64).unwrap();
        assert_eq!(g.spectrum().coeffs(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn maj3_spectrum_exact() {
        let spec = majority_fn::<Exact>(3, 3).unwrap().spectrum();
        let h = Ratio::new(1, 2);
        assert_eq!(*spec.coeff(0b001), h);
        assert_eq!(*spec.coeff(0b010), h);
        assert_eq!(*spec.coeff(0b100), h);
        assert_eq!(*spec.coeff(0b111), -h);
        assert_eq!(*spec.coeff(0b011), Ratio::from_integer(0));
        assert_eq!(l1_level_weight(&spec, 1).unwrap(), Ratio::new(3, 2));
    }

    #[test]
    fn level_out_of_range() {
        let spec = majority_fn::<f64>(1, 1).unwrap().spectrum();
        assert!(matches!(l1_level_weight(&spec, 2), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn even_majority_rejected() {
        assert!(matches!(majority_fn::<f64>(4, 5), Err(Error::EvenMajority(4))));
    }

    #[test]
    fn majority_of_one_is_dictator() {
        let f = majority_fn::<f64>(1, 3).unwrap();
        for z in 0..8 {
            assert_eq!(*f.value(z), character(1, z) as f64);
        }
        let g = majority_fn::<f64>(3, 4).unwrap();
        assert_eq!(*g.value(index_of(&[1, 1, -1, -1])), 1.0);
    }

    #[test]
    fn biased_expectation_trivial_cases() {
        let f = BooleanFn::<f64>::from_fn(2, |z| character(1, z) as f64).unwrap();
        assert_eq!(biased_expectation(&f.spectrum(), &0.5).unwrap(), 0.5);
        let c = BooleanFn::<f64>::constant(3, 0.25).unwrap();
        assert_eq!(biased_expectation(&c.spectrum(), &-0.7).unwrap(), 0.25);
        assert!(biased_expectation(&c.spectrum(), &1.0).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(matches!(BooleanFn::new(2, vec![0.0; 3]), Err(Error::TableLength { .. })));
        assert!(matches!(BooleanFn::new(1, vec![0.0, 1.5]), Err(Error::ValueOutOfRange { index: 1, .. })));
        assert!(matches!(BooleanFn::<f64>::constant(25, 0.0), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let f = majority_fn::<f64>(3, 3).unwrap();
        let s = f.to_json();
        assert!(s.starts_with("{\"n\":3,\"values\":[1.0,1.0,1.0,-1.0"));
        assert_eq!(BooleanFn::<f64>::from_json(&s).unwrap(), f);
    }

    #[test]
    fn forrelation_small_cases() {
        assert_eq!(forrelation(&[0.5, -0.25]).unwrap(), -0.125);
        let v = forrelation(&[1.0; 4]).unwrap();
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(matches!(forrelation(&[1.0; 6]), Err(Error::NotPowerOfTwo(6))));
    }

    #[test]
    fn forrelation_partial_thresholds() {
        // Forr takes values in (1/4)Z/sqrt(2) at n = 4, so the gap interval is empty.
        let p = forrelation_partial(4).unwrap();
        assert_eq!(p.domain_size(), 16);
        assert_eq!(p.get(0), Some(1));
        for z in 0..16 {
            let x: Vec<f64> = signs_of(z, 4).into_iter().map(f64::from).collect();
            let expect = if forrelation(&x).unwrap() > 0.0 { 1 } else { -1 };
            assert_eq!(p.get(z), Some(expect));
        }
        assert!(forrelation_partial(2).is_err());
        let undefined = PartialFn::new(1, vec![Some(1), None]).unwrap();
        assert!(matches!(undefined.to_total::<f64>(), Err(Error::PartialInput(1))));
    }

    #[test]
    fn partial_from_total_roundtrip() {
        let f = majority_fn::<f64>(3, 3).unwrap();
        let p = PartialFn::from_total(&f).unwrap();
        assert_eq!(p.domain_size(), 8);
        assert_eq!(p.to_total::<f64>().unwrap(), f);
    }

    #[test]
    fn restriction_max_of_dictator_and_majority() {
        let f = BooleanFn::<Exact>::from_fn(3, |z| Exact::from_i64(character(0b001, z))).unwrap();
        assert_eq!(max_restricted_level1(&f).unwrap(), Exact::from_i64(1));
        // MAJ_3 with one coordinate fixed to each sign leaves z_i z_j-free
        // pieces of weight 0; fixing one to +1 gives (1+z_a+z_b-z_a z_b)/2.
        let m = majority_fn::<Exact>(3, 3).unwrap();
        assert_eq!(max_restricted_level1(&m).unwrap(), Exact::from_i64(3) / Exact::from_i64(2));
    }
}
