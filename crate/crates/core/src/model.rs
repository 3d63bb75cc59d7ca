//! Alphabets, suffix keys, context trees and the priors used to sample them.
//!
//! Suffixes are always stored most-recent-first: index 0 of a context slice is
//! the latest symbol `x_n`, index 1 is `x_{n-1}`, and so on. Walking a tree from
//! the root therefore reads a context left to right. Padding passed in from the
//! outside (initial contexts, sequence files) is oldest-first, like the body of a
//! sequence, and is reversed on the way in.

use std::collections::VecDeque;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VomcError};

pub type Symbol = u8;

/// Seedable, counter-based generator used for every random draw.
pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`; distinct streams are independent.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(u8);

impl Alphabet {
    pub const TERNARY: Alphabet = Alphabet(3);

    pub fn new(size: usize) -> Result<Self> {
        if (2..=255).contains(&size) {
            Ok(Self(size as u8))
        } else {
            Err(VomcError::InvalidAlphabet(size))
        }
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0 as usize
    }

    pub fn check(self, symbol: usize) -> Result<Symbol> {
        if symbol < self.size() {
            Ok(symbol as Symbol)
        } else {
            Err(VomcError::SymbolOutOfRange { symbol, alphabet: self.size() })
        }
    }

    /// Largest depth whose level-order node keys fit in a `u64`.
    pub fn max_depth(self) -> usize {
        let a = self.size() as u128;
        let mut depth = 0;
        let mut width = a;
        while width.saturating_mul(a) < (1u128 << 62) {
            width *= a;
            depth += 1;
        }
        depth
    }

    pub fn check_depth(self, depth: usize) -> Result<()> {
        if depth <= self.max_depth() {
            Ok(())
        } else {
            Err(VomcError::DepthTooLarge { depth, alphabet: self.size() })
        }
    }

    pub fn uniform(self) -> Vec<f64> {
        vec![1.0 / self.size() as f64; self.size()]
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = VomcError;
    fn try_from(v: usize) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.size()
    }
}

/// A suffix string packed as its index in the level-order numbering of the
/// complete A-ary tree: the root (empty suffix) is 0 and the child reached by
/// prepending the older symbol `q` to node `k` is `A*k + 1 + q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SuffixKey(pub u64);

impl SuffixKey {
    pub const ROOT: SuffixKey = SuffixKey(0);

    #[inline]
    pub fn child(self, alphabet: Alphabet, older: Symbol) -> SuffixKey {
        SuffixKey(self.0 * alphabet.size() as u64 + 1 + older as u64)
    }

    /// Key of a suffix given most-recent-first.
    pub fn from_recent_first(alphabet: Alphabet, symbols: &[Symbol]) -> SuffixKey {
        symbols.iter().fold(SuffixKey::ROOT, |k, &q| k.child(alphabet, q))
    }

    /// Parent (drop the oldest symbol); `None` at the root.
    pub fn parent(self, alphabet: Alphabet) -> Option<SuffixKey> {
        (self.0 > 0).then(|| SuffixKey((self.0 - 1) / alphabet.size() as u64))
    }

    /// Symbols most-recent-first.
    pub fn symbols(self, alphabet: Alphabet) -> Vec<Symbol> {
        let a = alphabet.size() as u64;
        let mut out = Vec::new();
        let mut k = self.0;
        while k > 0 {
            out.push(((k - 1) % a) as Symbol);
            k = (k - 1) / a;
        }
        out.reverse();
        out
    }

    pub fn len(self, alphabet: Alphabet) -> usize {
        let a = alphabet.size() as u64;
        let mut k = self.0;
        let mut n = 0;
        while k > 0 {
            k = (k - 1) / a;
            n += 1;
        }
        n
    }

    pub fn is_root(self) -> bool {
        self.0 == 0
    }
}

/// Rolling window of the most recent symbols, most-recent-first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    recent: VecDeque<Symbol>,
    capacity: usize,
}

impl Context {
    /// Build from oldest-first padding, keeping at most `capacity` symbols.
    pub fn new(padding: &[Symbol], capacity: usize) -> Self {
        let mut ctx = Self { recent: VecDeque::with_capacity(capacity + 1), capacity };
        for &s in padding {
            ctx.push(s);
        }
        ctx
    }

    pub fn push(&mut self, symbol: Symbol) {
        if self.capacity == 0 {
            return;
        }
        if self.recent.len() == self.capacity {
            self.recent.pop_back();
        }
        self.recent.push_front(symbol);
    }

    pub fn len(&self) -> usize {
        self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Symbol `back` steps ago (0 = latest).
    pub fn get(&self, back: usize) -> Option<Symbol> {
        self.recent.get(back).copied()
    }

    pub fn recent_first(&self) -> Vec<Symbol> {
        self.recent.iter().copied().collect()
    }

    /// Keys of the suffixes of length 0..=depth (fewer when the context is short).
    pub fn path(&self, alphabet: Alphabet, depth: usize) -> Vec<SuffixKey> {
        let depth = depth.min(self.recent.len());
        let mut out = Vec::with_capacity(depth + 1);
        let mut k = SuffixKey::ROOT;
        out.push(k);
        for &q in self.recent.iter().take(depth) {
            k = k.child(alphabet, q);
            out.push(k);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtwPrior {
    pub depth: usize,
    pub lambda: f64,
    pub alpha: Vec<f64>,
}

impl CtwPrior {
    pub fn new(alphabet: Alphabet, depth: usize, lambda: f64, alpha: Vec<f64>) -> Result<Self> {
        alphabet.check_depth(depth)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(VomcError::InvalidPrior(format!("lambda {lambda} not in (0,1)")));
        }
        if alpha.len() != alphabet.size() {
            return Err(VomcError::InvalidPrior(format!(
                "alpha has {} entries for alphabet {}",
                alpha.len(),
                alphabet.size()
            )));
        }
        if alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(VomcError::InvalidPrior("alpha entries must be positive".into()));
        }
        Ok(Self { depth, lambda, alpha })
    }

    /// Jeffreys prior: every Dirichlet parameter 0.5.
    pub fn jeffreys(alphabet: Alphabet, depth: usize, lambda: f64) -> Result<Self> {
        Self::new(alphabet, depth, lambda, vec![0.5; alphabet.size()])
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet(self.alpha.len() as u8)
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn sample_tree(&self, rng: &mut Rng) -> TreeShape {
        TreeShape::sample(self.alphabet(), self.depth, self.lambda, rng)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeNode {
    pub depth: usize,
    pub key: SuffixKey,
    /// Indices of the A children, oldest-symbol order; `None` for a leaf.
    pub children: Option<Vec<usize>>,
}

/// Full A-ary tree of bounded depth, stored in preorder. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeShape {
    alphabet: Alphabet,
    max_depth: usize,
    nodes: Vec<ShapeNode>,
}

impl TreeShape {
    pub fn root_only(alphabet: Alphabet, max_depth: usize) -> Self {
        Self {
            alphabet,
            max_depth,
            nodes: vec![ShapeNode { depth: 0, key: SuffixKey::ROOT, children: None }],
        }
    }

    /// Complete tree with every leaf at `max_depth`.
    pub fn complete(alphabet: Alphabet, max_depth: usize) -> Self {
        Self::from_leaf_rule(alphabet, max_depth, &mut |_| false)
    }

    /// Preorder construction; `stop(depth)` decides whether a node above the
    /// depth bound becomes a leaf.
    pub fn from_leaf_rule(
        alphabet: Alphabet,
        max_depth: usize,
        stop: &mut dyn FnMut(usize) -> bool,
    ) -> Self {
        let mut nodes = Vec::new();
        grow(&mut nodes, alphabet, max_depth, 0, SuffixKey::ROOT, stop);
        Self { alphabet, max_depth, nodes }
    }

    /// Bounded branching process: below depth `max_depth` a node stops with
    /// probability `lambda`, otherwise it branches into A children. `lambda`
    /// may be 0 or 1 here.
    pub fn sample(alphabet: Alphabet, max_depth: usize, lambda: f64, rng: &mut Rng) -> Self {
        let lambda = lambda.clamp(0.0, 1.0);
        Self::from_leaf_rule(alphabet, max_depth, &mut |_| rng.random_bool(lambda))
    }

    /// Rebuild from a preorder leaf mask (`true` = leaf).
    pub fn from_preorder(alphabet: Alphabet, max_depth: usize, leaves: &[bool]) -> Result<Self> {
        fn parse(
            nodes: &mut Vec<ShapeNode>,
            mask: &[bool],
            alphabet: Alphabet,
            max_depth: usize,
            depth: usize,
            key: SuffixKey,
        ) -> Result<usize> {
            let idx = nodes.len();
            let leaf = *mask
                .get(idx)
                .ok_or_else(|| VomcError::ModelInvariant("preorder node list ends early".into()))?;
            nodes.push(ShapeNode { depth, key, children: None });
            if !leaf {
                if depth >= max_depth {
                    return Err(VomcError::ModelInvariant(format!("internal node at depth bound {max_depth}")));
                }
                let mut children = Vec::with_capacity(alphabet.size());
                for q in 0..alphabet.size() {
                    children.push(parse(nodes, mask, alphabet, max_depth, depth + 1, key.child(alphabet, q as Symbol))?);
                }
                nodes[idx].children = Some(children);
            }
            Ok(idx)
        }
        let mut nodes = Vec::with_capacity(leaves.len());
        parse(&mut nodes, leaves, alphabet, max_depth, 0, SuffixKey::ROOT)?;
        if nodes.len() != leaves.len() {
            return Err(VomcError::ModelInvariant("trailing nodes after a complete preorder tree".into()));
        }
        Ok(Self { alphabet, max_depth, nodes })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn nodes(&self) -> &[ShapeNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.children.is_none()).map(|(i, _)| i)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Every node has 0 or A children, child depths increase by one, and no
    /// leaf is deeper than the bound.
    pub fn validate(&self) -> Result<()> {
        let a = self.alphabet.size();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.depth > self.max_depth {
                return Err(VomcError::ModelInvariant(format!("node {i} deeper than {}", self.max_depth)));
            }
            if let Some(ch) = &n.children {
                if ch.len() != a {
                    return Err(VomcError::ModelInvariant(format!(
                        "node {i} has {} children, expected {a}",
                        ch.len()
                    )));
                }
                for (q, &c) in ch.iter().enumerate() {
                    let child = self.nodes.get(c).ok_or_else(|| {
                        VomcError::ModelInvariant(format!("node {i} child {q} out of range"))
                    })?;
                    if child.depth != n.depth + 1 || child.key != n.key.child(self.alphabet, q as Symbol) {
                        return Err(VomcError::ModelInvariant(format!("node {i} child {q} misplaced")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Unique leaf whose suffix matches the context (most-recent-first).
    pub fn classify(&self, recent_first: &[Symbol]) -> Result<usize> {
        let mut node = 0usize;
        loop {
            let n = &self.nodes[node];
            match &n.children {
                None => return Ok(node),
                Some(ch) => {
                    let q = *recent_first
                        .get(n.depth)
                        .ok_or(VomcError::InsufficientContext { have: recent_first.len(), need: n.depth + 1 })?;
                    node = *ch.get(q as usize).ok_or_else(|| {
                        VomcError::ModelInvariant(format!("node {node} is not full"))
                    })?;
                }
            }
        }
    }

    /// ln π_D(T) = ((L-1)/(A-1)) ln(1-λ) + (L - L_D) ln λ.
    pub fn prior_log_mass(&self, lambda: f64) -> f64 {
        let leaves = self.leaf_count() as f64;
        let at_bound = self.leaves().filter(|&i| self.nodes[i].depth == self.max_depth).count() as f64;
        let branches = (leaves - 1.0) / (self.alphabet.size() as f64 - 1.0);
        xlny(branches, 1.0 - lambda) + xlny(leaves - at_bound, lambda)
    }
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn grow(
    nodes: &mut Vec<ShapeNode>,
    alphabet: Alphabet,
    max_depth: usize,
    depth: usize,
    key: SuffixKey,
    stop: &mut dyn FnMut(usize) -> bool,
) -> usize {
    let idx = nodes.len();
    nodes.push(ShapeNode { depth, key, children: None });
    if depth < max_depth && !stop(depth) {
        let mut children = Vec::with_capacity(alphabet.size());
        for q in 0..alphabet.size() {
            children.push(grow(nodes, alphabet, max_depth, depth + 1, key.child(alphabet, q as Symbol), stop));
        }
        nodes[idx].children = Some(children);
    }
    idx
}

/// A context tree source: shape plus one next-symbol distribution per leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextTree {
    shape: TreeShape,
    /// Indexed by node; empty for internal nodes.
    probs: Vec<Vec<f64>>,
    lambda_used: Option<f64>,
}

impl ContextTree {
    pub fn new(shape: TreeShape, leaf_probs: impl Fn(&ShapeNode) -> Vec<f64>) -> Result<Self> {
        let probs = shape
            .nodes
            .iter()
            .map(|n| if n.children.is_none() { leaf_probs(n) } else { Vec::new() })
            .collect();
        let tree = Self { shape, probs, lambda_used: None };
        tree.validate()?;
        Ok(tree)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_used = Some(lambda);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        let a = self.shape.alphabet.size();
        for i in self.shape.leaves() {
            let p = &self.probs[i];
            if p.len() != a || p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(VomcError::ModelInvariant(format!("leaf {i} distribution malformed")));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(VomcError::ModelInvariant(format!("leaf {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn alphabet(&self) -> Alphabet {
        self.shape.alphabet
    }

    pub fn lambda_used(&self) -> Option<f64> {
        self.lambda_used
    }

    pub fn leaf_distribution(&self, node: usize) -> &[f64] {
        &self.probs[node]
    }

    /// Next-symbol distribution for a context (most-recent-first).
    pub fn next_distribution(&self, recent_first: &[Symbol]) -> Result<&[f64]> {
        Ok(&self.probs[self.shape.classify(recent_first)?])
    }

    pub fn to_json(&self) -> Result<String> {
        let nodes = self
            .shape
            .nodes
            .iter()
            .zip(&self.probs)
            .map(|(n, p)| NodeJson {
                depth: n.depth,
                leaf: n.children.is_none(),
                p: n.children.is_none().then(|| p.iter().map(|v| format!("{v:.16e}")).collect()),
            })
            .collect();
        let doc = TreeJson {
            depth: self.shape.max_depth,
            lambda_used: self.lambda_used,
            alphabet: self.shape.alphabet.size(),
            nodes,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeJson = serde_json::from_str(text)?;
        let alphabet = Alphabet::new(doc.alphabet)?;
        alphabet.check_depth(doc.depth)?;
        let mask: Vec<bool> = doc.nodes.iter().map(|n| n.leaf).collect();
        let shape = TreeShape::from_preorder(alphabet, doc.depth, &mask)?;
        let mut probs = Vec::with_capacity(doc.nodes.len());
        for (n, sn) in doc.nodes.iter().zip(&shape.nodes) {
            if n.depth != sn.depth {
                return Err(VomcError::ModelInvariant("node depth disagrees with preorder shape".into()));
            }
            let p = match (&n.p, n.leaf) {
                (Some(p), true) => p
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|e| VomcError::Parse(format!("probability `{s}`: {e}"))))
                    .collect::<Result<Vec<_>>>()?,
                (None, false) => Vec::new(),
                _ => return Err(VomcError::ModelInvariant("leaf without probabilities".into())),
            };
            probs.push(p);
        }
        let tree = Self { shape, probs, lambda_used: doc.lambda_used };
        tree.validate()?;
        Ok(tree)
    }
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    #[serde(rename = "D")]
    depth: usize,
    lambda_used: Option<f64>,
    alphabet: usize,
    nodes: Vec<NodeJson>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    depth: usize,
    leaf: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Vec<String>>,
}

/// Independent Dirichlet(α) draw per leaf, via normalized Gamma variates.
pub fn sample_leaf_distributions(shape: TreeShape, alpha: &[f64], rng: &mut Rng) -> Result<ContextTree> {
    if alpha.len() != shape.alphabet.size() {
        return Err(VomcError::InvalidPrior("alpha length does not match alphabet".into()));
    }
    let gammas = alpha
        .iter()
        .map(|&a| {
            if a > 0.0 && a.is_finite() {
                Gamma::new(a, 1.0).map_err(|e| VomcError::InvalidPrior(e.to_string()))
            } else {
                Err(VomcError::InvalidPrior(format!("Dirichlet parameter {a} must be positive")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut probs = vec![Vec::new(); shape.nodes.len()];
    for i in shape.leaves().collect::<Vec<_>>() {
        probs[i] = dirichlet(&gammas, rng);
    }
    let tree = ContextTree { shape, probs, lambda_used: None };
    tree.validate()?;
    Ok(tree)
}

fn dirichlet(gammas: &[Gamma<f64>], rng: &mut Rng) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return normalize(draws, sum);
        }
    }
}

fn normalize(mut v: Vec<f64>, sum: f64) -> Vec<f64> {
    for x in v.iter_mut() {
        *x /= sum;
    }
    v
}

/// Per leaf, one uniformly chosen symbol gets probability exactly zero and the
/// rest are i.i.d. uniform weights, normalized.
pub fn sample_nonctw_leaf_distributions(shape: TreeShape, rng: &mut Rng) -> Result<ContextTree> {
    let a = shape.alphabet.size();
    let mut probs = vec![Vec::new(); shape.nodes.len()];
    for i in shape.leaves().collect::<Vec<_>>() {
        let zero = rng.random_range(0..a);
        // 1 - U lies in (0, 1], so only the chosen entry is zero.
        let w: Vec<f64> = (0..a).map(|q| if q == zero { 0.0 } else { 1.0 - rng.random::<f64>() }).collect();
        let sum = w.iter().sum();
        probs[i] = normalize(w, sum);
    }
    let tree = ContextTree { shape, probs, lambda_used: None };
    tree.validate()?;
    Ok(tree)
}

/// Uniform i.i.d. initial context, oldest-first.
pub fn sample_padding(alphabet: Alphabet, len: usize, rng: &mut Rng) -> Vec<Symbol> {
    (0..len).map(|_| rng.random_range(0..alphabet.size()) as Symbol).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSequence {
    pub alphabet: Alphabet,
    /// Initial context x_{1-D}..x_0, oldest-first.
    pub padding: Vec<Symbol>,
    /// x_1..x_N.
    pub body: Vec<Symbol>,
    pub tree_id: u64,
    pub seed: u64,
}

impl SourceSequence {
    pub fn new(alphabet: Alphabet, padding: Vec<Symbol>, body: Vec<Symbol>) -> Result<Self> {
        for &s in padding.iter().chain(&body) {
            alphabet.check(s as usize)?;
        }
        Ok(Self { alphabet, padding, body, tree_id: 0, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    /// Context before body position `i` (0-based), most-recent-first, `depth` symbols
    /// drawn from padding as needed.
    pub fn context_before(&self, i: usize, depth: usize) -> Vec<Symbol> {
        let mut out = Vec::with_capacity(depth);
        for back in 1..=depth {
            let sym = if back <= i {
                Some(self.body[i - back])
            } else {
                let k = back - i;
                self.padding.len().checked_sub(k).map(|j| self.padding[j])
            };
            match sym {
                Some(s) => out.push(s),
                None => break,
            }
        }
        out
    }
}

/// Sample x_1..x_N sequentially from the tree, starting from `padding`.
pub fn generate_sequence(tree: &ContextTree, len: usize, padding: Vec<Symbol>, rng: &mut Rng) -> Result<SourceSequence> {
    let alphabet = tree.alphabet();
    let depth = tree.shape.max_depth;
    if padding.len() < depth {
        return Err(VomcError::InsufficientContext { have: padding.len(), need: depth });
    }
    let mut ctx = Context::new(&padding, depth);
    let mut body = Vec::with_capacity(len);
    let mut recent = Vec::with_capacity(depth);
    for _ in 0..len {
        recent.clear();
        recent.extend((0..ctx.len()).filter_map(|b| ctx.get(b)));
        let p = tree.next_distribution(&recent)?;
        let s = draw(p, rng);
        body.push(s);
        ctx.push(s);
    }
    SourceSequence::new(alphabet, padding, body)
}

fn draw(p: &[f64], rng: &mut Rng) -> Symbol {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (a, &pa) in p.iter().enumerate() {
        if pa > 0.0 {
            last_positive = a;
            cum += pa;
            if u < cum {
                return a as Symbol;
            }
        }
    }
    last_positive as Symbol
}

/// Per-position loss ln(1/p(x_i)) under the generating tree; `+inf` marks a
/// symbol the tree assigns zero probability.
pub fn true_model_losses(tree: &ContextTree, seq: &SourceSequence) -> Result<Vec<f64>> {
    let depth = tree.shape.max_depth;
    (0..seq.len())
        .map(|i| {
            let ctx = seq.context_before(i, depth);
            let p = tree.next_distribution(&ctx)?[seq.body[i] as usize];
            Ok(if p > 0.0 { -p.ln() } else { f64::INFINITY })
        })
        .collect()
}

/// Mean nats per symbol of the generating tree on `seq` (the genie rate).
pub fn true_model_logloss(tree: &ContextTree, seq: &SourceSequence) -> Result<f64> {
    let losses = true_model_losses(tree, seq)?;
    if losses.is_empty() {
        return Ok(0.0);
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
