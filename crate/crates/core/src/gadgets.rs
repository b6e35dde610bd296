//! Two-party gadgets, their Fourier tables, and the protocol transforms
//! between XOR-lifted and gadget-lifted inputs.
//!
//! A gadget table is indexed by `x | y << m1`; a coefficient `ĝ(S, T)` is
//! stored at `S | T << m1`.

use serde_json::{json, Value};

use crate::boolean::{parity, walsh_hadamard_table};
use crate::error::{Error, Result};
use crate::boolean::{l1_level_weight, walsh_hadamard, FourierSpectrum};
use crate::fiber::{g_fiber, lifted_fourier, xor_fiber, xor_fiber_mixture, LiftedProtocol};
use crate::protocol::{decode_table, encode_table, ProtocolTree, RandomizedProtocol, Table};
use crate::scalar::Scalar;

pub const MAX_GADGET_BITS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gadget {
    m1: usize,
    m2: usize,
    values: Vec<i8>,
}

impl Gadget {
    pub fn new(m1: usize, m2: usize, values: Vec<i8>) -> Result<Self> {
        if m1 + m2 > MAX_GADGET_BITS {
            return Err(Error::DimensionTooLarge { n: m1 + m2, cap: MAX_GADGET_BITS });
        }
        let expected = 1usize << (m1 + m2);
        if values.len() != expected {
            return Err(Error::TableLength { n: m1 + m2, got: values.len(), expected });
        }
        if let Some(index) = values.iter().position(|v| v.abs() != 1) {
            return Err(Error::ValueOutOfRange { index, value: values[index] as f64 });
        }
        Ok(Self { m1, m2, values })
    }

    pub fn from_fn(m1: usize, m2: usize, f: impl Fn(u64, u64) -> i8) -> Result<Self> {
        if m1 + m2 > MAX_GADGET_BITS {
            return Err(Error::DimensionTooLarge { n: m1 + m2, cap: MAX_GADGET_BITS });
        }
        let values = (0..1u64 << (m1 + m2)).map(|i| f(i & ((1 << m1) - 1), i >> m1)).collect();
        Self::new(m1, m2, values)
    }

    /// Built-ins: `xor` (`x_1 y_1`), `and±` or `and` (`+1` iff `x_1 = y_1 = +1`),
    /// `ip2` (`(-1)^{<x, y>}` on two bits per side).
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "xor" => Self::from_fn(1, 1, |x, y| if (x ^ y) & 1 == 1 { -1 } else { 1 }),
            "and±" | "and" => Self::from_fn(1, 1, |x, y| if x | y == 0 { 1 } else { -1 }),
            "ip2" => Self::from_fn(2, 2, |x, y| if parity(x & y) { -1 } else { 1 }),
            _ => Err(Error::InvalidArgument(format!("unknown gadget {name:?}"))),
        }
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn value(&self, x: u64, y: u64) -> i8 {
        self.values[(x | y << self.m1) as usize]
    }

    pub fn to_json(&self) -> String {
        let table: Table = self.values.iter().map(|&v| v < 0).collect();
        json!({ "m1": self.m1, "m2": self.m2, "values": encode_table(&table) }).to_string()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        let width = |k: &str| {
            v.get(k)
                .and_then(Value::as_u64)
                .map(|w| w as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("gadget JSON missing {k:?}")))
        };
        let (m1, m2) = (width("m1")?, width("m2")?);
        if m1 + m2 > MAX_GADGET_BITS {
            return Err(Error::DimensionTooLarge { n: m1 + m2, cap: MAX_GADGET_BITS });
        }
        let packed = v
            .get("values")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidArgument("gadget JSON missing \"values\"".into()))?;
        let table = decode_table(packed, 1 << (m1 + m2))?;
        Self::new(m1, m2, table.iter().map(|b| if *b { -1 } else { 1 }).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GadgetSpectrum<S> {
    m1: usize,
    m2: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> GadgetSpectrum<S> {
    pub fn coeff(&self, s: u64, t: u64) -> &S {
        &self.coeffs[(s | t << self.m1) as usize]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    /// `(S, T, ĝ(S, T))` for all `S ≠ ∅`, `T ≠ ∅`, ordered by `(S, T)`.
    pub fn nonempty_pairs(&self) -> impl Iterator<Item = (u64, u64, &S)> + '_ {
        (1..1u64 << self.m1).flat_map(move |s| (1..1u64 << self.m2).map(move |t| (s, t, self.coeff(s, t))))
    }

    /// Largest `|ĝ(S, T)|` over nonempty `S, T`, ties going to the smallest `(S, T)`.
    pub fn argmax(&self) -> Result<(u64, u64, S)> {
        let mut best: Option<(u64, u64, S)> = None;
        for (s, t, c) in self.nonempty_pairs() {
            let a = c.abs();
            if best.as_ref().is_none_or(|b| a > b.2) {
                best = Some((s, t, a));
            }
        }
        best.ok_or_else(|| Error::InvalidArgument("gadget side of width 0 has no nonempty subset".into()))
    }

    /// `M = Σ_{S,T ≠ ∅} |ĝ(S, T)|`.
    pub fn nonempty_l1(&self) -> S {
        self.nonempty_pairs().fold(S::zero(), |acc, (_, _, c)| acc + c.abs())
    }

    pub fn sum_of_squares(&self) -> S {
        self.coeffs.iter().fold(S::zero(), |acc, c| acc + c.clone() * c.clone())
    }

    pub fn l1(&self) -> S {
        self.coeffs.iter().fold(S::zero(), |acc, c| acc + c.abs())
    }
}

pub fn gadget_fourier<S: Scalar>(g: &Gadget) -> GadgetSpectrum<S> {
    let table: Vec<S> = g.values.iter().map(|&v| S::from_i64(v as i64)).collect();
    let coeffs = walsh_hadamard_table(&table).expect("gadget table length is a power of two");
    GadgetSpectrum { m1: g.m1, m2: g.m2, coeffs }
}

/// `ĝ(S, ∅) = ĝ(∅, T) = 0` for all `S`, `T`.
pub fn check_balanced(g: &Gadget) -> bool {
    let spec = gadget_fourier::<f64>(g);
    let s_side = (0..1u64 << g.m1).all(|s| spec.coeff(s, 0).abs() <= 1e-12);
    let t_side = (0..1u64 << g.m2).all(|t| spec.coeff(0, t).abs() <= 1e-12);
    s_side && t_side
}

/// `g'(x, y) = x_{m1+1} y_{m2+1} g(x_{≤m1}, y_{≤m2})`.
pub fn balance_embed(g: &Gadget) -> Result<Gadget> {
    let (m1, m2) = (g.m1, g.m2);
    Gadget::from_fn(m1 + 1, m2 + 1, |x, y| {
        let fresh = if (x >> m1 ^ y >> m2) & 1 == 1 { -1 } else { 1 };
        fresh * g.value(x & ((1 << m1) - 1), y & ((1 << m2) - 1))
    })
}

fn block_parities(v: u64, n: usize, m: usize, mask: u64) -> u64 {
    let block = (1u64 << m) - 1;
    (0..n).fold(0, |acc, i| if parity(v >> (i * m) & block & mask) { acc | 1 << i } else { acc })
}

/// Runs `C` on `x'_i = x_{i,S}`, `y'_i = y_{i,T}`; same cost as `C`.
pub fn xor_to_g_protocol<S: Scalar>(c: &ProtocolTree<S>, g: &Gadget, s: u64, t: u64) -> Result<LiftedProtocol<S>> {
    if s == 0 || t == 0 {
        return Err(Error::InvalidArgument("xor_to_g needs nonempty S and T".into()));
    }
    if s >> g.m1 != 0 || t >> g.m2 != 0 {
        return Err(Error::InvalidArgument("S or T exceeds the gadget widths".into()));
    }
    let n = c.alice_bits();
    if c.bob_bits() != n {
        return Err(Error::InvalidArgument("XOR protocol needs equal input widths".into()));
    }
    let (m1, m2) = (g.m1, g.m2);
    let tree = c.relabel(n * m1, n * m2, &|x| block_parities(x, n, m1, s), &|y| block_parities(y, n, m2, t))?;
    LiftedProtocol::new(tree, n, m1, m2)
}

/// Inputs `v` (n bits) and free bits `f` complete to a lifted input whose
/// block `i` has parity `v_i` on `mask_i`: the lowest bit of `mask_i` is the
/// pivot, the remaining `m - 1` bits come from `f` in order.
fn complete(v: u64, f: u64, m: usize, masks: &[u64]) -> u64 {
    let mut out = 0;
    let mut f = f;
    for (i, &mask) in masks.iter().enumerate() {
        let pivot = mask.trailing_zeros() as usize;
        let mut block = 0u64;
        for j in (0..m).filter(|&j| j != pivot) {
            block |= (f & 1) << j;
            f >>= 1;
        }
        if parity(block & mask) != (v >> i & 1 == 1) {
            block |= 1 << pivot;
        }
        out |= block << (i * m);
    }
    out
}

/// Exact uniform mixture over the completions `x'` with `x'_{i,S_i} = x_i`
/// and `y'` with `y'_{i,T_i} = y_i`. Has `2^{n(m1-1) + n(m2-1)}` components.
pub fn g_to_xor_protocol<S: Scalar>(c: &LiftedProtocol<S>, assignment: &[(u64, u64)]) -> Result<RandomizedProtocol<S>> {
    let (n, m1, m2) = (c.n(), c.m1(), c.m2());
    if assignment.len() != n {
        return Err(Error::InvalidArgument(format!("{} block assignments for n = {n}", assignment.len())));
    }
    if n * (m1 + m2) > 16 {
        return Err(Error::DimensionTooLarge { n: n * (m1 + m2), cap: 16 });
    }
    for &(s, t) in assignment {
        if s == 0 || t == 0 || s >> m1 != 0 || t >> m2 != 0 {
            return Err(Error::InvalidArgument("block subsets must be nonempty and within the gadget widths".into()));
        }
    }
    let smasks: Vec<u64> = assignment.iter().map(|a| a.0).collect();
    let tmasks: Vec<u64> = assignment.iter().map(|a| a.1).collect();
    let (fa, fb) = (n * (m1 - 1), n * (m2 - 1));
    let weight = S::dyadic((fa + fb) as u32);
    let mut components = Vec::with_capacity(1 << (fa + fb));
    for af in 0..1u64 << fa {
        for bf in 0..1u64 << fb {
            let tree = c.tree().relabel(
                n,
                n,
                &|x| complete(x, af, m1, &smasks),
                &|y| complete(y, bf, m2, &tmasks),
            )?;
            components.push((weight.clone(), tree));
        }
    }
    RandomizedProtocol::new(components)
}

fn pow<S: Scalar>(base: &S, k: usize) -> S {
    (0..k).fold(S::one(), |acc, _| acc * base.clone())
}

/// Largest `|ĥ_{C'↓g}(I) − ĥ_{C↓XOR}(I)·ĝ(S, T)^{|I|}|` with `C' = xor_to_g_protocol(C, g, S, T)`.
pub fn verify_xor_to_g_identity<S: Scalar>(c: &ProtocolTree<S>, g: &Gadget, s: u64, t: u64) -> Result<S> {
    if !check_balanced(g) {
        return Err(Error::UnbalancedGadget);
    }
    let lifted = xor_to_g_protocol(c, g, s, t)?;
    let lhs = walsh_hadamard(&g_fiber(&lifted, g)?);
    let base = walsh_hadamard(&xor_fiber(c)?);
    let gst = gadget_fourier::<S>(g).coeff(s, t).clone();
    let mut worst = S::zero();
    for i in 0..1u64 << c.alice_bits() {
        let rhs = base.coeff(i).clone() * pow(&gst, i.count_ones() as usize);
        worst = S::max_of(worst, (lhs.coeff(i).clone() - rhs).abs());
    }
    Ok(worst)
}

/// Largest `|Ĉ'_{↓XOR}(I) − Ĉ(S^I, T^I)|` with `C' = g_to_xor_protocol(C, assignment)`.
pub fn verify_g_to_xor_identity<S: Scalar>(c: &LiftedProtocol<S>, assignment: &[(u64, u64)]) -> Result<S> {
    let mixture = g_to_xor_protocol(c, assignment)?;
    let lhs = walsh_hadamard(&xor_fiber_mixture(&mixture)?);
    let cspec = lifted_fourier(c)?;
    let mut worst = S::zero();
    for i in 0..1u64 << c.n() {
        let (mut sm, mut tm) = (0u64, 0u64);
        for (b, &(sb, tb)) in assignment.iter().enumerate() {
            if i >> b & 1 == 1 {
                sm |= sb << (b * c.m1());
                tm |= tb << (b * c.m2());
            }
        }
        worst = S::max_of(worst, (lhs.coeff(i).clone() - cspec.coeff_masks(sm, tm).clone()).abs());
    }
    Ok(worst)
}

/// Both sides of one growth inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthBound<S> {
    pub k: usize,
    pub lhs: S,
    pub rhs: S,
}

impl<S: Scalar> GrowthBound<S> {
    /// Exact comparison for exact scalars; `1e-12` relative slack otherwise.
    pub fn holds(&self) -> bool {
        if S::is_exact() {
            self.lhs <= self.rhs
        } else {
            let (l, r) = (self.lhs.to_f64(), self.rhs.to_f64());
            l <= r + 1e-12 * r.abs().max(1.0)
        }
    }
}

/// `L_{1,k}(C↓XOR) ≤ |ĝ(S, T)|^{-k} L_{1,k}(C'↓g)` with `(S, T)` the argmax pair.
pub fn xor_growth_via_gadget<S: Scalar>(c: &ProtocolTree<S>, g: &Gadget, k: usize) -> Result<GrowthBound<S>> {
    let spec = gadget_fourier::<S>(g);
    let (s, t, gmax) = spec.argmax()?;
    if gmax.is_zero() {
        return Err(Error::InvalidArgument("gadget has no nonzero coefficient with S, T nonempty".into()));
    }
    let lhs = l1_level_weight(&walsh_hadamard(&xor_fiber(c)?), k)?;
    let lifted = xor_to_g_protocol(c, g, s, t)?;
    let lifted_growth = l1_level_weight(&walsh_hadamard(&g_fiber(&lifted, g)?), k)?;
    Ok(GrowthBound { k, lhs, rhs: lifted_growth / pow(&gmax, k) })
}

/// Block assignments `(S_i, T_i)` weighted by `Π_i |ĝ(S_i, T_i)| / M^n`,
/// over the support of `|ĝ|` on nonempty pairs.
pub fn assignment_distribution<S: Scalar>(g: &Gadget, n: usize) -> Vec<(S, Vec<(u64, u64)>)> {
    let spec = gadget_fourier::<S>(g);
    let m = spec.nonempty_l1();
    let support: Vec<(u64, u64, S)> =
        spec.nonempty_pairs().filter(|(_, _, c)| !c.is_zero()).map(|(s, t, c)| (s, t, c.abs() / m.clone())).collect();
    let mut out = vec![(S::one(), Vec::new())];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|(w, a)| {
                support.iter().map(move |(s, t, p)| {
                    let mut a2 = a.clone();
                    a2.push((*s, *t));
                    (w.clone() * p.clone(), a2)
                })
            })
            .collect();
    }
    out
}

/// `L_{1,k}(C↓g) ≤ M^k · E_{assignment}[L_{1,k}(C'_{assignment}↓XOR)]`.
pub fn gadget_growth_via_xor<S: Scalar>(c: &LiftedProtocol<S>, g: &Gadget, k: usize) -> Result<GrowthBound<S>> {
    if !check_balanced(g) {
        return Err(Error::UnbalancedGadget);
    }
    let lhs = l1_level_weight(&walsh_hadamard(&g_fiber(c, g)?), k)?;
    let m = gadget_fourier::<S>(g).nonempty_l1();
    let mut avg = S::zero();
    for (w, assignment) in assignment_distribution::<S>(g, c.n()) {
        let mixture = g_to_xor_protocol(c, &assignment)?;
        avg = avg + w * l1_level_weight(&walsh_hadamard(&xor_fiber_mixture(&mixture)?), k)?;
    }
    Ok(GrowthBound { k, lhs, rhs: pow(&m, k) * avg })
}

/// Round trip through XOR from gadget `g` to gadget `h`:
/// `L_{1,k}(C↓g) ≤ M_g^k |ĥ_max|^{-k} E_{assignment}[L_{1,k}(C''↓h)]`, where
/// `C''` converts each mixture component to `h` inputs. The second bound
/// replaces both constants by `2^{(m1+m2+m1'+m2')k/2}`.
pub fn gadget_round_trip<S: Scalar>(
    c: &LiftedProtocol<S>,
    g: &Gadget,
    h: &Gadget,
    k: usize,
) -> Result<(GrowthBound<S>, GrowthBound<f64>)> {
    if !check_balanced(g) || !check_balanced(h) {
        return Err(Error::UnbalancedGadget);
    }
    let lhs = l1_level_weight(&walsh_hadamard(&g_fiber(c, g)?), k)?;
    let m = gadget_fourier::<S>(g).nonempty_l1();
    let (hs, ht, hmax) = gadget_fourier::<S>(h).argmax()?;
    let mut avg = S::zero();
    for (w, assignment) in assignment_distribution::<S>(g, c.n()) {
        let mixture = g_to_xor_protocol(c, &assignment)?;
        let mut fiber: Option<Vec<S>> = None;
        for (p, tree) in mixture.components() {
            let lifted = xor_to_g_protocol(tree, h, hs, ht)?;
            let f = g_fiber(&lifted, h)?;
            let vals = f.values().iter().map(|v| v.clone() * p.clone());
            fiber = Some(match fiber {
                None => vals.collect(),
                Some(acc) => acc.into_iter().zip(vals).map(|(a, b)| a + b).collect(),
            });
        }
        let table = fiber.expect("mixtures are nonempty");
        let spec = FourierSpectrum::from_coeffs(c.n(), walsh_hadamard_table(&table)?)?;
        avg = avg + w * l1_level_weight(&spec, k)?;
    }
    let tight = GrowthBound { k, lhs: lhs.clone(), rhs: pow(&m, k) * avg.clone() / pow(&hmax, k) };
    let widths = (g.m1() + g.m2() + h.m1() + h.m2()) as f64;
    let loose = GrowthBound { k, lhs: lhs.to_f64(), rhs: (widths * k as f64 / 2.0).exp2() * avg.to_f64() };
    Ok((tight, loose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use num_rational::Ratio;

    #[test]
    fn xor_gadget_is_a_character() {
        let spec = gadget_fourier::<f64>(&Gadget::named("xor").unwrap());
        assert_eq!(spec.coeffs(), &[0.0, 0.0, 0.0, 1.0]);
        assert!(check_balanced(&Gadget::named("xor").unwrap()));
    }

    #[test]
    fn dictator_gadget_is_unbalanced() {
        let g = Gadget::from_fn(1, 1, |x, _| if x & 1 == 1 { -1 } else { 1 }).unwrap();
        assert_eq!(*gadget_fourier::<f64>(&g).coeff(1, 0), 1.0);
        assert!(!check_balanced(&g));
    }

    #[test]
    fn and_gadget_coefficients() {
        let spec = gadget_fourier::<Exact>(&Gadget::named("and±").unwrap());
        let h = Ratio::new(1, 2);
        assert_eq!(*spec.coeff(0, 0), -h);
        assert_eq!(*spec.coeff(1, 0), h);
        assert_eq!(*spec.coeff(0, 1), h);
        assert_eq!(*spec.coeff(1, 1), h);
    }

    #[test]
    fn balance_embed_of_constant_and_xor() {
        let one = Gadget::from_fn(1, 1, |_, _| 1).unwrap();
        let e = balance_embed(&one).unwrap();
        assert!(check_balanced(&e));
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(e.value(x, y), if (x >> 1 ^ y >> 1) & 1 == 1 { -1 } else { 1 });
            }
        }
        let ex = balance_embed(&Gadget::named("xor").unwrap()).unwrap();
        let spec = gadget_fourier::<f64>(&ex);
        assert_eq!(*spec.coeff(0b11, 0b11), 1.0);
        assert_eq!(spec.l1(), 1.0);
    }

    #[test]
    fn ip2_is_unbalanced_but_embeds() {
        let ip = Gadget::named("ip2").unwrap();
        assert!(!check_balanced(&ip));
        assert!(check_balanced(&balance_embed(&ip).unwrap()));
    }

    #[test]
    fn argmax_tie_break_is_smallest_pair() {
        let spec = gadget_fourier::<Exact>(&balance_embed(&Gadget::named("and±").unwrap()).unwrap());
        let (s, t, v) = spec.argmax().unwrap();
        assert_eq!((s, t), (0b10, 0b10));
        assert_eq!(v, Ratio::new(1, 2));
        assert_eq!(spec.nonempty_l1(), Exact::from_i64(2));
    }

    #[test]
    fn gadget_json_roundtrip() {
        let g = Gadget::named("ip2").unwrap();
        let s = g.to_json();
        assert!(s.contains("\"m1\":2"));
        assert_eq!(Gadget::from_json(&s).unwrap(), g);
        assert!(Gadget::named("index").is_err());
    }

    #[test]
    fn assignment_weights_sum_to_one() {
        let g = balance_embed(&Gadget::named("and±").unwrap()).unwrap();
        let dist = assignment_distribution::<Exact>(&g, 2);
        assert_eq!(dist.len(), 16);
        let total = dist.iter().fold(Exact::from_i64(0), |acc, (w, _)| acc + *w);
        assert_eq!(total, Exact::from_i64(1));
    }

    #[test]
    fn xor_gadget_transforms_are_identities() {
        use crate::protocol::random_protocol;
        let g = Gadget::named("xor").unwrap();
        let t = random_protocol::<Exact>(2, 3, 4, true).unwrap();
        let lifted = xor_to_g_protocol(&t, &g, 1, 1).unwrap();
        assert_eq!(lifted.tree(), &t);
        let back = g_to_xor_protocol(&lifted, &[(1, 1), (1, 1)]).unwrap();
        assert_eq!(back.components().len(), 1);
        assert_eq!(&back.components()[0].1, &t);
    }

    #[test]
    fn transform_identities_hold_exactly() {
        use crate::protocol::random_protocol;
        let g = balance_embed(&Gadget::named("and±").unwrap()).unwrap();
        let t = random_protocol::<Exact>(2, 3, 21, true).unwrap();
        assert_eq!(verify_xor_to_g_identity(&t, &g, 0b10, 0b11).unwrap(), Exact::from_i64(0));
        let lifted = xor_to_g_protocol(&t, &g, 0b11, 0b10).unwrap();
        let c = LiftedProtocol::new(random_protocol::<Exact>(4, 3, 5, true).unwrap(), 2, 2, 2).unwrap();
        for l in [&lifted, &c] {
            assert_eq!(verify_g_to_xor_identity(l, &[(0b10, 0b01), (0b11, 0b10)]).unwrap(), Exact::from_i64(0));
        }
    }

    #[test]
    fn growth_chains_hold() {
        use crate::protocol::random_protocol;
        let g = balance_embed(&Gadget::named("and±").unwrap()).unwrap();
        let xor = Gadget::named("xor").unwrap();
        let t = random_protocol::<Exact>(2, 3, 2, false).unwrap();
        for k in 1..=2 {
            assert!(xor_growth_via_gadget(&t, &g, k).unwrap().holds());
        }
        let c = LiftedProtocol::new(random_protocol::<Exact>(4, 3, 3, false).unwrap(), 2, 2, 2).unwrap();
        for k in 1..=2 {
            assert!(gadget_growth_via_xor(&c, &g, k).unwrap().holds());
            let (tight, loose) = gadget_round_trip(&c, &g, &xor, k).unwrap();
            assert!(tight.holds() && loose.holds());
        }
    }

    #[test]
    fn completion_fixes_block_parity() {
        let masks = [0b101u64, 0b110];
        for v in 0..4u64 {
            for f in 0..16u64 {
                let x = complete(v, f, 3, &masks);
                assert_eq!(block_parities(x, 2, 3, 0b101) & 1, v & 1);
                assert_eq!(block_parities(x, 2, 3, 0b110) >> 1, v >> 1);
            }
        }
    }
}
