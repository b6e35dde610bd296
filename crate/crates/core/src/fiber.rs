//! XOR-fibers and g-fibers of protocols, and brute-force spectra of
//! lifted protocols.
//!
//! A lifted input places block `i` of Alice at bits `[i·m1, (i+1)·m1)` and
//! block `i` of Bob at bits `[i·m2, (i+1)·m2)`. The joint table and spectrum
//! of a lifted protocol are indexed by `x | y << (n·m1)`.

use crate::boolean::{walsh_hadamard, walsh_hadamard_table, BooleanFn, FourierSpectrum};
use crate::error::{Error, Result};
use crate::gadgets::{check_balanced, gadget_fourier, Gadget, GadgetSpectrum};
use crate::protocol::{ProtocolTree, RandomizedProtocol};
use crate::scalar::Scalar;

pub const MAX_XOR_FIBER_DIM: usize = 14;
pub const MAX_G_FIBER_BITS: usize = 24;
pub const MAX_LIFTED_FOURIER_BITS: usize = 16;

fn xor_dim<S: Scalar>(c: &ProtocolTree<S>) -> Result<usize> {
    let n = c.alice_bits();
    if c.bob_bits() != n {
        return Err(Error::InvalidArgument(format!(
            "XOR-fiber needs equal input widths, got {} and {}",
            n,
            c.bob_bits()
        )));
    }
    if n > MAX_XOR_FIBER_DIM {
        return Err(Error::DimensionTooLarge { n, cap: MAX_XOR_FIBER_DIM });
    }
    Ok(n)
}

fn weighted_leaf_sum<S: Scalar>(counts: &[u64], leaves: &[&S]) -> S {
    counts
        .iter()
        .zip(leaves)
        .filter(|(c, _)| **c > 0)
        .fold(S::zero(), |acc, (c, v)| acc + S::from_i64(*c as i64) * (*v).clone())
}

/// `h(z) = 2^{-n} Σ_x C(x, x ⊙ z)` by direct enumeration of all `4^n` pairs.
pub fn xor_fiber<S: Scalar>(c: &ProtocolTree<S>) -> Result<BooleanFn<S>> {
    let n = xor_dim(c)?;
    let compiled = c.compile();
    let leaves = compiled.leaves();
    let scale = S::dyadic(n as u32);
    let mut counts = vec![0u64; leaves.len()];
    let mut values = Vec::with_capacity(1 << n);
    for z in 0..1u64 << n {
        counts.iter_mut().for_each(|c| *c = 0);
        for x in 0..1u64 << n {
            counts[compiled.leaf_index(x, x ^ z)] += 1;
        }
        values.push(weighted_leaf_sum(&counts, leaves) * scale.clone());
    }
    BooleanFn::new(n, values)
}

/// Same function via leaf rectangles:
/// `h(z) = Σ_ℓ C(ℓ)·|{x ∈ X_ℓ : x ⊙ z ∈ Y_ℓ}| / 2^n`.
pub fn xor_fiber_rectangles<S: Scalar>(c: &ProtocolTree<S>) -> Result<BooleanFn<S>> {
    let n = xor_dim(c)?;
    let size = 1usize << n;
    let mut acc = vec![S::zero(); size];
    let mut counts = vec![0u64; size];
    for (rect, value) in c.leaf_rectangles()? {
        counts.iter_mut().for_each(|c| *c = 0);
        for x in rect.alice.iter_ones() {
            for y in rect.bob.iter_ones() {
                counts[x ^ y] += 1;
            }
        }
        for (a, &k) in acc.iter_mut().zip(&counts) {
            if k > 0 {
                *a = a.clone() + S::from_i64(k as i64) * value.clone();
            }
        }
    }
    let scale = S::dyadic(n as u32);
    BooleanFn::new(n, acc.into_iter().map(|v| v * scale.clone()).collect())
}

/// Probability-weighted average of the component fibers.
pub fn xor_fiber_mixture<S: Scalar>(c: &RandomizedProtocol<S>) -> Result<BooleanFn<S>> {
    let mut acc: Option<Vec<S>> = None;
    for (p, tree) in c.components() {
        let h = xor_fiber(tree)?;
        let vals = h.values().iter().map(|v| v.clone() * p.clone());
        acc = Some(match acc {
            None => vals.collect(),
            Some(a) => a.into_iter().zip(vals).map(|(u, v)| u + v).collect(),
        });
    }
    let values = acc.expect("mixtures have at least one component");
    let n = c.alice_bits();
    clamp_new(n, values)
}

/// Mixtures can drift past ±1 by rounding in floating types.
fn clamp_new<S: Scalar>(n: usize, values: Vec<S>) -> Result<BooleanFn<S>> {
    let one = S::one();
    let values = values
        .into_iter()
        .map(|v| {
            if v > one {
                one.clone()
            } else if v < -one.clone() {
                -one.clone()
            } else {
                v
            }
        })
        .collect();
    BooleanFn::new(n, values)
}

/// A protocol over `({±1}^{m1})^n × ({±1}^{m2})^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedProtocol<S> {
    tree: ProtocolTree<S>,
    n: usize,
    m1: usize,
    m2: usize,
}

impl<S: Scalar> LiftedProtocol<S> {
    pub fn new(tree: ProtocolTree<S>, n: usize, m1: usize, m2: usize) -> Result<Self> {
        if tree.alice_bits() != n * m1 || tree.bob_bits() != n * m2 {
            return Err(Error::InvalidArgument(format!(
                "tree widths ({}, {}) do not match n·m1 = {}, n·m2 = {}",
                tree.alice_bits(),
                tree.bob_bits(),
                n * m1,
                n * m2
            )));
        }
        Ok(Self { tree, n, m1, m2 })
    }

    pub fn tree(&self) -> &ProtocolTree<S> {
        &self.tree
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    fn total_bits(&self) -> usize {
        self.n * (self.m1 + self.m2)
    }
}

/// `h(z)` = average of `C(x, y)` over pairs with `g(x_i, y_i) = z_i` for every block.
pub fn g_fiber<S: Scalar>(c: &LiftedProtocol<S>, g: &Gadget) -> Result<BooleanFn<S>> {
    let (n, m1, m2) = (c.n, c.m1, c.m2);
    if g.m1() != m1 || g.m2() != m2 {
        return Err(Error::InvalidArgument("gadget widths differ from the lifted protocol".into()));
    }
    if c.total_bits() > MAX_G_FIBER_BITS {
        return Err(Error::DimensionTooLarge { n: c.total_bits(), cap: MAX_G_FIBER_BITS });
    }
    // preimages[0] lists block pairs with g = +1, preimages[1] those with g = -1
    let mut preimages: [Vec<(u64, u64)>; 2] = [Vec::new(), Vec::new()];
    for x in 0..1u64 << m1 {
        for y in 0..1u64 << m2 {
            preimages[(g.value(x, y) < 0) as usize].push((x, y));
        }
    }
    let compiled = c.tree.compile();
    let leaves = compiled.leaves();
    let mut counts = vec![0u64; leaves.len()];
    let mut values = Vec::with_capacity(1 << n);
    for z in 0..1u64 << n {
        let lists: Vec<&Vec<(u64, u64)>> = (0..n).map(|i| &preimages[(z >> i & 1) as usize]).collect();
        if lists.iter().any(|l| l.is_empty()) {
            return Err(Error::EmptyConditional { z });
        }
        let total: u64 = lists.iter().map(|l| l.len() as u64).product();
        counts.iter_mut().for_each(|c| *c = 0);
        let mut digits = vec![0usize; n];
        for _ in 0..total {
            let (mut x, mut y) = (0u64, 0u64);
            for i in 0..n {
                let (bx, by) = lists[i][digits[i]];
                x |= bx << (i * m1);
                y |= by << (i * m2);
            }
            counts[compiled.leaf_index(x, y)] += 1;
            for i in 0..n {
                digits[i] += 1;
                if digits[i] < lists[i].len() {
                    break;
                }
                digits[i] = 0;
            }
        }
        values.push(weighted_leaf_sum(&counts, leaves) / S::from_i64(total as i64));
    }
    clamp_new(n, values)
}

/// All Fourier coefficients of a lifted protocol, viewed as a function of
/// `n·(m1+m2)` bits.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedSpectrum<S> {
    n: usize,
    m1: usize,
    m2: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> LiftedSpectrum<S> {
    /// `Ĉ(S^{[n]}, T^{[n]})` from per-block subsets.
    pub fn coeff(&self, s_blocks: &[u64], t_blocks: &[u64]) -> &S {
        let s = s_blocks.iter().enumerate().fold(0, |acc, (i, s)| acc | s << (i * self.m1));
        let t = t_blocks.iter().enumerate().fold(0, |acc, (i, t)| acc | t << (i * self.m2));
        self.coeff_masks(s, t)
    }

    /// Coefficient for packed Alice mask `s` and Bob mask `t`.
    pub fn coeff_masks(&self, s: u64, t: u64) -> &S {
        &self.coeffs[(s | t << (self.n * self.m1)) as usize]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn sum_of_squares(&self) -> S {
        self.coeffs.iter().fold(S::zero(), |acc, c| acc + c.clone() * c.clone())
    }
}

pub fn lifted_value_table<S: Scalar>(c: &LiftedProtocol<S>) -> Result<Vec<S>> {
    if c.total_bits() > MAX_LIFTED_FOURIER_BITS {
        return Err(Error::DimensionTooLarge { n: c.total_bits(), cap: MAX_LIFTED_FOURIER_BITS });
    }
    let a = c.n * c.m1;
    let compiled = c.tree.compile();
    Ok((0..1u64 << c.total_bits())
        .map(|i| compiled.value(i & ((1 << a) - 1), i >> a).clone())
        .collect())
}

pub fn lifted_fourier<S: Scalar>(c: &LiftedProtocol<S>) -> Result<LiftedSpectrum<S>> {
    let table = lifted_value_table(c)?;
    Ok(LiftedSpectrum { n: c.n, m1: c.m1, m2: c.m2, coeffs: walsh_hadamard_table(&table)? })
}

/// Largest `|ĥ(I) − Σ Ĉ(S^I, T^I) Π_{i∈I} ĝ(S_i, T_i)|` over `I ⊆ [n]`, where
/// the sum runs over nonempty `S_i, T_i` on `I` and empty blocks elsewhere.
pub fn verify_fact_g_fiber_fourier<S: Scalar>(c: &LiftedProtocol<S>, g: &Gadget) -> Result<S> {
    if !check_balanced(g) {
        return Err(Error::UnbalancedGadget);
    }
    let lhs = walsh_hadamard(&g_fiber(c, g)?);
    let cspec = lifted_fourier(c)?;
    let gspec = gadget_fourier::<S>(g);
    let mut worst = S::zero();
    for i_set in 0..1u64 << c.n {
        let rhs = g_expansion(&cspec, &gspec, i_set, c.n);
        worst = S::max_of(worst, (lhs.coeff(i_set).clone() - rhs).abs());
    }
    Ok(worst)
}

/// `Σ_{S^I, T^I nonempty} Ĉ(S^I, T^I) Π_{i∈I} ĝ(S_i, T_i)`.
pub fn g_expansion<S: Scalar>(
    cspec: &LiftedSpectrum<S>,
    gspec: &GadgetSpectrum<S>,
    i_set: u64,
    n: usize,
) -> S {
    struct Ctx<'a, S> {
        n: usize,
        i_set: u64,
        cspec: &'a LiftedSpectrum<S>,
        gspec: &'a GadgetSpectrum<S>,
    }
    fn rec<S: Scalar>(ctx: &Ctx<'_, S>, i: usize, s: u64, t: u64, prod: S) -> S {
        if i == ctx.n {
            return ctx.cspec.coeff_masks(s, t).clone() * prod;
        }
        if ctx.i_set >> i & 1 == 0 {
            return rec(ctx, i + 1, s, t, prod);
        }
        let mut acc = S::zero();
        for (si, ti, gc) in ctx.gspec.nonempty_pairs() {
            if gc.is_zero() {
                continue;
            }
            let s2 = s | si << (i * ctx.cspec.m1);
            let t2 = t | ti << (i * ctx.cspec.m2);
            acc = acc + rec(ctx, i + 1, s2, t2, prod.clone() * gc.clone());
        }
        acc
    }
    rec(&Ctx { n, i_set, cspec, gspec }, 0, 0, 0, S::one())
}

/// Spectrum of the XOR-fiber, as a convenience for growth reports.
pub fn xor_fiber_spectrum<S: Scalar>(c: &ProtocolTree<S>) -> Result<FourierSpectrum<S>> {
    Ok(walsh_hadamard(&xor_fiber(c)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::{character, majority_fn};
    use crate::gadgets::balance_embed;
    use crate::protocol::{maj_xor_protocol, random_protocol, x1y1_protocol, Node, Party};
    use crate::scalar::Exact;
    use bitvec::prelude::*;

    #[test]
    fn constant_fiber() {
        let t = ProtocolTree::<f64>::constant(3, 3, 1.0).unwrap();
        let h = xor_fiber(&t).unwrap();
        assert!(h.values().iter().all(|&v| v == 1.0));
        let w = h.spectrum().level_weights();
        assert!(w[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn x1y1_fiber_is_dictator() {
        let h = xor_fiber(&x1y1_protocol::<Exact>(3).unwrap()).unwrap();
        for z in 0..8 {
            assert_eq!(*h.value(z), Exact::from_i64(character(1, z)));
        }
    }

    #[test]
    fn maj5_fiber_is_majority() {
        let h = xor_fiber(&maj_xor_protocol::<Exact>(5, 5).unwrap()).unwrap();
        assert_eq!(h, majority_fn::<Exact>(5, 5).unwrap());
    }

    #[test]
    fn rectangle_formula_agrees_exactly() {
        for seed in 0..5 {
            let t = random_protocol::<Exact>(4, 5, seed, true).unwrap();
            assert_eq!(xor_fiber(&t).unwrap(), xor_fiber_rectangles(&t).unwrap());
        }
    }

    #[test]
    fn fiber_dimension_cap() {
        let t = ProtocolTree::<f64>::constant(15, 15, 0.0).unwrap();
        assert!(matches!(xor_fiber(&t), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn xor_gadget_fiber_matches_xor_fiber() {
        let g = Gadget::named("xor").unwrap();
        for seed in 0..4 {
            let t = random_protocol::<Exact>(3, 4, seed, true).unwrap();
            let lifted = LiftedProtocol::new(t.clone(), 3, 1, 1).unwrap();
            assert_eq!(g_fiber(&lifted, &g).unwrap(), xor_fiber(&t).unwrap());
        }
    }

    #[test]
    fn g_fiber_of_alice_bit_under_embedded_and() {
        // C(x, y) = x_{1,1}; gadget x_2 y_2 · AND±(x_1, y_1)
        let g = balance_embed(&Gadget::named("and±").unwrap()).unwrap();
        let msg: BitVec<u8, Lsb0> = (0..4u64).map(|x| x & 1 == 1).collect();
        let root = Node::inner(Party::Alice, msg, Node::Leaf(Exact::from_i64(1)), Node::Leaf(Exact::from_i64(-1)));
        let c = LiftedProtocol::new(ProtocolTree::new(2, 2, root).unwrap(), 1, 2, 2).unwrap();
        let h = g_fiber(&c, &g).unwrap();
        for z in 0..2u64 {
            let (mut sum, mut cnt) = (0i64, 0i64);
            for x in 0..4u64 {
                for y in 0..4u64 {
                    if (g.value(x, y) < 0) == (z == 1) {
                        sum += character(1, x);
                        cnt += 1;
                    }
                }
            }
            assert_eq!(*h.value(z), Exact::from_i64(sum) / Exact::from_i64(cnt));
        }
    }

    #[test]
    fn g_fiber_reports_empty_conditional() {
        let g = Gadget::from_fn(1, 1, |_, _| 1).unwrap();
        let c = LiftedProtocol::new(ProtocolTree::<f64>::constant(1, 1, 0.0).unwrap(), 1, 1, 1).unwrap();
        assert!(matches!(g_fiber(&c, &g), Err(Error::EmptyConditional { z: 1 })));
    }

    #[test]
    fn lifted_fourier_of_first_alice_bit() {
        let msg: BitVec<u8, Lsb0> = (0..4u64).map(|x| x & 1 == 1).collect();
        let root = Node::inner(Party::Alice, msg, Node::Leaf(1.0), Node::Leaf(-1.0));
        let c = LiftedProtocol::new(ProtocolTree::new(2, 2, root).unwrap(), 2, 1, 1).unwrap();
        let spec = lifted_fourier(&c).unwrap();
        assert_eq!(*spec.coeff(&[1, 0], &[0, 0]), 1.0);
        assert_eq!(spec.sum_of_squares(), 1.0);
    }

    #[test]
    fn xor_case_of_expansion() {
        let g = Gadget::named("xor").unwrap();
        let t = random_protocol::<Exact>(2, 3, 9, true).unwrap();
        let c = LiftedProtocol::new(t.clone(), 2, 1, 1).unwrap();
        assert_eq!(verify_fact_g_fiber_fourier(&c, &g).unwrap(), Exact::from_i64(0));
        let h = xor_fiber_spectrum(&t).unwrap();
        let cspec = lifted_fourier(&c).unwrap();
        for i in 0..4 {
            assert_eq!(h.coeff(i), cspec.coeff_masks(i, i));
        }
        assert!(matches!(
            verify_fact_g_fiber_fourier(&c, &Gadget::named("and").unwrap()),
            Err(Error::UnbalancedGadget)
        ));
    }
}
