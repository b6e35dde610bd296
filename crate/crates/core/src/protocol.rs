//! Deterministic and randomized two-party protocol trees.
//!
//! Inputs are bit strings: Alice holds `x < 2^alice_bits`, Bob holds
//! `y < 2^bob_bits`, and bit `i` set means coordinate `i + 1` is `-1`.
//! Every inner node stores its owner's full message table, so a node's
//! message depends only on the owner's input and the node's position.

use bitvec::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::boolean::{parity, PartialFn};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-side cap for explicit message tables and rectangle bitsets.
pub const MAX_SIDE_BITS: usize = 24;

pub type Table = BitVec<u8, Lsb0>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    fn tag(self) -> &'static str {
        match self {
            Party::Alice => "A",
            Party::Bob => "B",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node<S> {
    Leaf(S),
    Inner { owner: Party, msg: Table, zero: Box<Node<S>>, one: Box<Node<S>> },
}

impl<S: Scalar> Node<S> {
    pub fn inner(owner: Party, msg: Table, zero: Node<S>, one: Node<S>) -> Self {
        Node::Inner { owner, msg, zero: Box::new(zero), one: Box::new(one) }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Inner { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Inner { zero, one, .. } => zero.leaf_count() + one.leaf_count(),
        }
    }
}

/// Leaf `±1` from a message bit: bit 0 is `+1`.
pub fn bit_to_sign<S: Scalar>(bit: bool) -> S {
    if bit {
        -S::one()
    } else {
        S::one()
    }
}

fn table_from_fn(bits: usize, f: impl Fn(u64) -> bool) -> Table {
    (0..1u64 << bits).map(f).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTree<S> {
    alice_bits: usize,
    bob_bits: usize,
    root: Node<S>,
}

impl<S: Scalar> ProtocolTree<S> {
    pub fn new(alice_bits: usize, bob_bits: usize, root: Node<S>) -> Result<Self> {
        for bits in [alice_bits, bob_bits] {
            if bits > MAX_SIDE_BITS {
                return Err(Error::DimensionTooLarge { n: bits, cap: MAX_SIDE_BITS });
            }
        }
        fn check<S: Scalar>(node: &Node<S>, a: usize, b: usize) -> Result<()> {
            match node {
                Node::Leaf(v) => {
                    if *v > S::one() || *v < -S::one() {
                        return Err(Error::MalformedTree(format!("leaf value {} outside [-1, 1]", v.to_f64())));
                    }
                    Ok(())
                }
                Node::Inner { owner, msg, zero, one } => {
                    let bits = if *owner == Party::Alice { a } else { b };
                    if msg.len() != 1 << bits {
                        return Err(Error::MalformedTree(format!(
                            "message table has {} entries, owner domain has {}",
                            msg.len(),
                            1u64 << bits
                        )));
                    }
                    check(zero, a, b)?;
                    check(one, a, b)
                }
            }
        }
        check(&root, alice_bits, bob_bits)?;
        Ok(Self { alice_bits, bob_bits, root })
    }

    pub fn constant(alice_bits: usize, bob_bits: usize, c: S) -> Result<Self> {
        Self::new(alice_bits, bob_bits, Node::Leaf(c))
    }

    pub fn alice_bits(&self) -> usize {
        self.alice_bits
    }

    pub fn bob_bits(&self) -> usize {
        self.bob_bits
    }

    pub fn root(&self) -> &Node<S> {
        &self.root
    }

    /// Longest root-to-leaf path.
    pub fn cost(&self) -> usize {
        self.root.depth()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    /// Same tree with every leaf passed through `f`.
    pub fn map_leaves<T: Scalar>(&self, f: &dyn Fn(&S) -> T) -> Result<ProtocolTree<T>> {
        fn go<S, T: Scalar>(node: &Node<S>, f: &dyn Fn(&S) -> T) -> Node<T> {
            match node {
                Node::Leaf(v) => Node::Leaf(f(v)),
                Node::Inner { owner, msg, zero, one } => Node::inner(*owner, msg.clone(), go(zero, f), go(one, f)),
            }
        }
        ProtocolTree::new(self.alice_bits, self.bob_bits, go(&self.root, f))
    }

    fn check_input(&self, x: u64, y: u64) -> Result<()> {
        if x >> self.alice_bits != 0 {
            return Err(Error::InputOutOfDomain { value: x, bits: self.alice_bits });
        }
        if y >> self.bob_bits != 0 {
            return Err(Error::InputOutOfDomain { value: y, bits: self.bob_bits });
        }
        Ok(())
    }

    /// Leaf value and the bits sent on the way there.
    pub fn evaluate(&self, x: u64, y: u64) -> Result<(S, Vec<bool>)> {
        self.check_input(x, y)?;
        let mut transcript = Vec::new();
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(v) => return Ok((v.clone(), transcript)),
                Node::Inner { owner, msg, zero, one } => {
                    let input = if *owner == Party::Alice { x } else { y };
                    let bit = msg[input as usize];
                    transcript.push(bit);
                    node = if bit { one } else { zero };
                }
            }
        }
    }

    /// Flattened form for tight evaluation loops. Leaves are numbered in
    /// depth-first order with the `zero` child first.
    pub fn compile(&self) -> Compiled<'_, S> {
        let mut c = Compiled { nodes: Vec::new(), tables: Vec::new(), leaves: Vec::new() };
        c.push(&self.root);
        c
    }

    /// One rectangle per leaf, in the same order as [`Compiled::leaves`].
    pub fn leaf_rectangles(&self) -> Result<Vec<(Rectangle, S)>> {
        fn walk<S: Scalar>(node: &Node<S>, rect: Rectangle, out: &mut Vec<(Rectangle, S)>) {
            match node {
                Node::Leaf(v) => out.push((rect, v.clone())),
                Node::Inner { owner, msg, zero, one } => {
                    let (mut r0, mut r1) = (rect.clone(), rect);
                    match owner {
                        Party::Alice => {
                            r0.alice &= !msg.clone();
                            r1.alice &= msg.clone();
                        }
                        Party::Bob => {
                            r0.bob &= !msg.clone();
                            r1.bob &= msg.clone();
                        }
                    }
                    walk(zero, r0, out);
                    walk(one, r1, out);
                }
            }
        }
        let full = Rectangle {
            alice: bitvec![u8, Lsb0; 1; 1 << self.alice_bits],
            bob: bitvec![u8, Lsb0; 1; 1 << self.bob_bits],
        };
        let mut out = Vec::new();
        walk(&self.root, full, &mut out);
        Ok(out)
    }

    /// Same tree shape and leaves, with message tables pulled back along
    /// input maps: the new Alice table at `x` is the old one at `alice_map(x)`.
    pub fn relabel(
        &self,
        alice_bits: usize,
        bob_bits: usize,
        alice_map: &dyn Fn(u64) -> u64,
        bob_map: &dyn Fn(u64) -> u64,
    ) -> Result<Self> {
        fn walk<S: Scalar>(
            node: &Node<S>,
            a: usize,
            b: usize,
            am: &dyn Fn(u64) -> u64,
            bm: &dyn Fn(u64) -> u64,
        ) -> Node<S> {
            match node {
                Node::Leaf(v) => Node::Leaf(v.clone()),
                Node::Inner { owner, msg, zero, one } => {
                    let table = match owner {
                        Party::Alice => table_from_fn(a, |x| msg[am(x) as usize]),
                        Party::Bob => table_from_fn(b, |y| msg[bm(y) as usize]),
                    };
                    Node::inner(*owner, table, walk(zero, a, b, am, bm), walk(one, a, b, am, bm))
                }
            }
        }
        Self::new(alice_bits, bob_bits, walk(&self.root, alice_bits, bob_bits, alice_map, bob_map))
    }

    pub fn to_json_value(&self) -> Value {
        fn node<S: Scalar>(n: &Node<S>) -> Value {
            match n {
                Node::Leaf(v) => json!({ "leaf": v.to_f64() }),
                Node::Inner { owner, msg, zero, one } => json!({
                    "owner": owner.tag(),
                    "msg": encode_table(msg),
                    "zero": node(zero),
                    "one": node(one),
                }),
            }
        }
        json!({ "alice_bits": self.alice_bits, "bob_bits": self.bob_bits, "root": node(&self.root) })
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(s)?)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let bits = |key: &str| -> Result<usize> {
            v.get(key)
                .and_then(Value::as_u64)
                .map(|b| b as usize)
                .ok_or_else(|| Error::MalformedTree(format!("missing integer field {key:?}")))
        };
        let (a, b) = (bits("alice_bits")?, bits("bob_bits")?);
        if a > MAX_SIDE_BITS || b > MAX_SIDE_BITS {
            return Err(Error::DimensionTooLarge { n: a.max(b), cap: MAX_SIDE_BITS });
        }
        fn node<S: Scalar>(v: &Value, a: usize, b: usize) -> Result<Node<S>> {
            if let Some(leaf) = v.get("leaf") {
                let x = leaf.as_f64().ok_or_else(|| Error::MalformedTree("leaf is not a number".into()))?;
                return Ok(Node::Leaf(S::from_f64(x)));
            }
            let owner = match v.get("owner").and_then(Value::as_str) {
                Some("A") => Party::Alice,
                Some("B") => Party::Bob,
                _ => return Err(Error::MalformedTree("inner node needs owner \"A\" or \"B\"".into())),
            };
            let len = 1usize << if owner == Party::Alice { a } else { b };
            let hexmsg = v
                .get("msg")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::MalformedTree("inner node missing msg".into()))?;
            let msg = decode_table(hexmsg, len)?;
            let child = |key: &str| -> Result<Node<S>> {
                let c = v.get(key).ok_or_else(|| Error::MalformedTree(format!("inner node missing child {key:?}")))?;
                node(c, a, b)
            };
            Ok(Node::inner(owner, msg, child("zero")?, child("one")?))
        }
        let root = v.get("root").ok_or_else(|| Error::MalformedTree("missing root".into()))?;
        Self::new(a, b, node(root, a, b)?)
    }
}

/// Packs bit `i` into byte `i / 8` at position `i % 8`, hex encoded.
pub fn encode_table(t: &Table) -> String {
    let mut bytes = vec![0u8; t.len().div_ceil(8)];
    for i in t.iter_ones() {
        bytes[i / 8] |= 1 << (i % 8);
    }
    hex::encode(bytes)
}

pub fn decode_table(s: &str, len: usize) -> Result<Table> {
    let bytes = hex::decode(s).map_err(|e| Error::MalformedTree(format!("bad hex in msg: {e}")))?;
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::MalformedTree(format!("msg has {} bytes, expected {}", bytes.len(), len.div_ceil(8))));
    }
    let mut t = Table::from_vec(bytes);
    if t[len..].any() {
        return Err(Error::MalformedTree("msg has bits set past the domain".into()));
    }
    t.truncate(len);
    Ok(t)
}

#[derive(Clone, Copy, Debug)]
enum Flat {
    Leaf(usize),
    Inner { alice: bool, table: usize, zero: usize, one: usize },
}

pub struct Compiled<'a, S> {
    nodes: Vec<Flat>,
    tables: Vec<&'a Table>,
    leaves: Vec<&'a S>,
}

impl<'a, S: Scalar> Compiled<'a, S> {
    fn push(&mut self, node: &'a Node<S>) -> usize {
        let id = self.nodes.len();
        match node {
            Node::Leaf(v) => {
                self.nodes.push(Flat::Leaf(self.leaves.len()));
                self.leaves.push(v);
            }
            Node::Inner { owner, msg, zero, one } => {
                self.nodes.push(Flat::Leaf(usize::MAX));
                let table = self.tables.len();
                self.tables.push(msg);
                let z = self.push(zero);
                let o = self.push(one);
                self.nodes[id] = Flat::Inner { alice: *owner == Party::Alice, table, zero: z, one: o };
            }
        }
        id
    }

    pub fn leaves(&self) -> &[&'a S] {
        &self.leaves
    }

    /// Index of the leaf reached on `(x, y)`; inputs must be in range.
    #[inline]
    pub fn leaf_index(&self, x: u64, y: u64) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Flat::Leaf(l) => return l,
                Flat::Inner { alice, table, zero, one } => {
                    let input = if alice { x } else { y };
                    id = if self.tables[table][input as usize] { one } else { zero };
                }
            }
        }
    }

    #[inline]
    pub fn value(&self, x: u64, y: u64) -> &'a S {
        self.leaves[self.leaf_index(x, y)]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rectangle {
    pub alice: BitVec<u8, Lsb0>,
    pub bob: BitVec<u8, Lsb0>,
}

impl Rectangle {
    pub fn contains(&self, x: u64, y: u64) -> bool {
        self.alice[x as usize] && self.bob[y as usize]
    }

    pub fn size(&self) -> u64 {
        (self.alice.count_ones() * self.bob.count_ones()) as u64
    }
}

/// Finite mixture of deterministic protocols over a common domain.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedProtocol<S> {
    components: Vec<(S, ProtocolTree<S>)>,
}

impl<S: Scalar> RandomizedProtocol<S> {
    pub fn new(components: Vec<(S, ProtocolTree<S>)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidMixture("no components".into()));
        };
        let dims = (first.alice_bits, first.bob_bits);
        let mut total = S::zero();
        for (p, t) in &components {
            if *p < S::zero() {
                return Err(Error::InvalidMixture(format!("negative weight {}", p.to_f64())));
            }
            if (t.alice_bits, t.bob_bits) != dims {
                return Err(Error::InvalidMixture("components disagree on input widths".into()));
            }
            total = total + p.clone();
        }
        if (total.to_f64() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!("weights sum to {}", total.to_f64())));
        }
        Ok(Self { components })
    }

    pub fn deterministic(tree: ProtocolTree<S>) -> Self {
        Self { components: vec![(S::one(), tree)] }
    }

    pub fn components(&self) -> &[(S, ProtocolTree<S>)] {
        &self.components
    }

    pub fn alice_bits(&self) -> usize {
        self.components[0].1.alice_bits
    }

    pub fn bob_bits(&self) -> usize {
        self.components[0].1.bob_bits
    }

    pub fn cost(&self) -> usize {
        self.components.iter().map(|(_, t)| t.cost()).max().unwrap_or(0)
    }

    /// `E[C(x, y)]` over the internal randomness.
    pub fn expected_value(&self, x: u64, y: u64) -> Result<S> {
        let mut acc = S::zero();
        for (p, t) in &self.components {
            acc = acc + p.clone() * t.evaluate(x, y)?.0;
        }
        Ok(acc)
    }
}

/// Parity decision tree on `{±1}^n`. A query on mask `S` branches to `plus`
/// when `z_S = +1`.
#[derive(Clone, Debug, PartialEq)]
pub enum ParityTree<S> {
    Leaf(S),
    Query { mask: u64, plus: Box<ParityTree<S>>, minus: Box<ParityTree<S>> },
}

impl<S: Scalar> ParityTree<S> {
    pub fn query(mask: u64, plus: Self, minus: Self) -> Self {
        ParityTree::Query { mask, plus: Box::new(plus), minus: Box::new(minus) }
    }

    pub fn evaluate(&self, z: u64) -> S {
        match self {
            ParityTree::Leaf(v) => v.clone(),
            ParityTree::Query { mask, plus, minus } => {
                if parity(mask & z) {
                    minus.evaluate(z)
                } else {
                    plus.evaluate(z)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ParityTree::Leaf(_) => 0,
            ParityTree::Query { plus, minus, .. } => 1 + plus.depth().max(minus.depth()),
        }
    }

    /// Complete tree of the given depth with random nonempty masks and `±1` leaves.
    pub fn random(n: usize, depth: usize, seed: u64) -> Result<Self> {
        if n == 0 && depth > 0 {
            return Err(Error::InvalidArgument("parity queries need n >= 1".into()));
        }
        fn build<S: Scalar>(n: usize, depth: usize, rng: &mut ChaCha8Rng) -> ParityTree<S> {
            if depth == 0 {
                return ParityTree::Leaf(bit_to_sign(rng.random::<bool>()));
            }
            let mask = rng.random_range(1..1u64 << n);
            let plus = build(n, depth - 1, rng);
            let minus = build(n, depth - 1, rng);
            ParityTree::query(mask, plus, minus)
        }
        Ok(build(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)))
    }
}

/// Simulates each parity query with two bits: Alice sends `[x_S = -1]`,
/// then Bob sends `[x_S y_S = -1]`, which he can compute from the transcript.
pub fn from_parity_dt<S: Scalar>(t: &ParityTree<S>, n: usize) -> Result<ProtocolTree<S>> {
    fn build<S: Scalar>(t: &ParityTree<S>, n: usize) -> Result<Node<S>> {
        match t {
            ParityTree::Leaf(v) => Ok(Node::Leaf(v.clone())),
            ParityTree::Query { mask, plus, minus } => {
                if *mask == 0 || mask >> n != 0 {
                    return Err(Error::MalformedTree(format!("query mask {mask:#b} invalid for n = {n}")));
                }
                let m = *mask;
                let plus = build(plus, n)?;
                let minus = build(minus, n)?;
                let bob = |a: bool| {
                    let table = table_from_fn(n, |y| a ^ parity(m & y));
                    Node::inner(Party::Bob, table, plus.clone(), minus.clone())
                };
                Ok(Node::inner(Party::Alice, table_from_fn(n, |x| parity(m & x)), bob(false), bob(true)))
            }
        }
    }
    ProtocolTree::new(n, n, build(t, n)?)
}

/// Cost-2 protocol whose output is `x_1 y_1`.
pub fn x1y1_protocol<S: Scalar>(n: usize) -> Result<ProtocolTree<S>> {
    let t = ParityTree::query(1, ParityTree::Leaf(S::one()), ParityTree::Leaf(-S::one()));
    from_parity_dt(&t, n)
}

/// Bob sends `y_1..y_d`, then Alice announces `MAJ(x_1 y_1, …, x_d y_d)`.
/// Cost `d + 1`.
pub fn maj_xor_protocol<S: Scalar>(d: usize, n: usize) -> Result<ProtocolTree<S>> {
    if d.is_multiple_of(2) {
        return Err(Error::EvenMajority(d));
    }
    if d > n {
        return Err(Error::InvalidArgument(format!("majority size {d} exceeds dimension {n}")));
    }
    fn bob_level<S: Scalar>(j: usize, d: usize, n: usize, known: u64) -> Node<S> {
        if j == d {
            let mask = (1u64 << d) - 1;
            let table = table_from_fn(n, |x| 2 * ((x ^ known) & mask).count_ones() as usize > d);
            return Node::inner(Party::Alice, table, Node::Leaf(S::one()), Node::Leaf(-S::one()));
        }
        let table = table_from_fn(n, |y| y >> j & 1 == 1);
        Node::inner(
            Party::Bob,
            table,
            bob_level(j + 1, d, n, known),
            bob_level(j + 1, d, n, known | 1 << j),
        )
    }
    ProtocolTree::new(n, n, bob_level(0, d, n, 0))
}

/// Bob sends all of `y`, then Alice announces `f(x ⊙ y)`; undefined inputs
/// of a partial `f` answer `+1`. Cost `n + 1`.
pub fn xor_function_protocol<S: Scalar>(f: &PartialFn) -> Result<ProtocolTree<S>> {
    let n = f.n();
    fn level<S: Scalar>(j: usize, f: &PartialFn, known: u64) -> Node<S> {
        let n = f.n();
        if j == n {
            let table = table_from_fn(n, |x| f.get(x ^ known) == Some(-1));
            return Node::inner(Party::Alice, table, Node::Leaf(S::one()), Node::Leaf(-S::one()));
        }
        let table = table_from_fn(n, |y| y >> j & 1 == 1);
        Node::inner(Party::Bob, table, level(j + 1, f, known), level(j + 1, f, known | 1 << j))
    }
    if n > 12 {
        return Err(Error::DimensionTooLarge { n, cap: 12 });
    }
    ProtocolTree::new(n, n, level(0, f, 0))
}

/// Complete cost-`d` tree over `{±1}^n × {±1}^n`: one random owner per level,
/// balanced random message tables, `±1` leaves, or leaves on the `2^-8` grid
/// of `[-1, 1]` when `non_boolean` is set.
pub fn random_protocol<S: Scalar>(n: usize, d: usize, seed: u64, non_boolean: bool) -> Result<ProtocolTree<S>> {
    if d > 2 * n {
        return Err(Error::InvalidArgument(format!("cost {d} exceeds 2n = {}", 2 * n)));
    }
    if n > 16 {
        return Err(Error::DimensionTooLarge { n, cap: 16 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owners: Vec<Party> =
        (0..d).map(|_| if rng.random::<bool>() { Party::Bob } else { Party::Alice }).collect();
    fn build<S: Scalar>(level: usize, owners: &[Party], n: usize, nb: bool, rng: &mut ChaCha8Rng) -> Node<S> {
        if level == owners.len() {
            return if nb {
                Node::Leaf(S::from_i64(rng.random_range(-256..=256)) * S::dyadic(8))
            } else {
                Node::Leaf(bit_to_sign(rng.random::<bool>()))
            };
        }
        let mut order: Vec<usize> = (0..1usize << n).collect();
        order.shuffle(rng);
        let mut table = bitvec![u8, Lsb0; 0; 1 << n];
        for &i in &order[..order.len() / 2] {
            table.set(i, true);
        }
        let zero = build(level + 1, owners, n, nb, rng);
        let one = build(level + 1, owners, n, nb, rng);
        Node::inner(owners[level], table, zero, one)
    }
    ProtocolTree::new(n, n, build(0, &owners, n, non_boolean, &mut rng))
}
