//! Sequential predictors behind one trait, and a registry that builds them
//! from names such as `ctw`, `ppm:5` or `syntf:no-counts`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::ctw::CtwState;
use crate::error::{Result, VomcError};
use crate::model::{Alphabet, Context, ContextTree, CtwPrior, Symbol};
use crate::pathblend::BlendPredictor;
use crate::ppm::PpmPredictor;
use crate::syntf::{ConstructionConfig, FeatureVariant, SyntfSimulator};

/// Online next-symbol predictor.
pub trait SequencePredictor: Send {
    /// Distribution of the next symbol given everything observed so far.
    fn predict(&mut self) -> Vec<f64>;
    fn update(&mut self, symbol: Symbol) -> Result<()>;
    /// Tree nodes or table entries read so far.
    fn node_touches(&self) -> u64 {
        0
    }
}

impl SequencePredictor for CtwState {
    fn predict(&mut self) -> Vec<f64> {
        CtwState::predict(self)
    }
    fn update(&mut self, symbol: Symbol) -> Result<()> {
        CtwState::update(self, symbol)
    }
    fn node_touches(&self) -> u64 {
        self.touches()
    }
}

impl SequencePredictor for BlendPredictor {
    fn predict(&mut self) -> Vec<f64> {
        BlendPredictor::predict(self)
    }
    fn update(&mut self, symbol: Symbol) -> Result<()> {
        BlendPredictor::update(self, symbol)
    }
    fn node_touches(&self) -> u64 {
        self.touches()
    }
}

impl SequencePredictor for SyntfSimulator {
    fn predict(&mut self) -> Vec<f64> {
        SyntfSimulator::predict(self)
    }
    fn update(&mut self, symbol: Symbol) -> Result<()> {
        SyntfSimulator::update(self, symbol)
    }
    fn node_touches(&self) -> u64 {
        self.touches()
    }
}

struct Ppm {
    inner: PpmPredictor,
    touches: u64,
}

impl SequencePredictor for Ppm {
    fn predict(&mut self) -> Vec<f64> {
        self.touches += self.inner.model().max_order() as u64 + 1;
        self.inner.predict()
    }
    fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.inner.update(symbol)
    }
    fn node_touches(&self) -> u64 {
        self.touches
    }
}

pub struct Uniform(Alphabet);

impl SequencePredictor for Uniform {
    fn predict(&mut self) -> Vec<f64> {
        self.0.uniform()
    }
    fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.0.check(symbol as usize).map(|_| ())
    }
}

/// Predicts with the generating tree itself.
pub struct Genie {
    tree: ContextTree,
    context: Context,
    touches: u64,
}

impl Genie {
    pub fn new(tree: ContextTree, padding: &[Symbol]) -> Result<Self> {
        let depth = tree.shape().max_depth();
        if padding.len() < depth {
            return Err(VomcError::InsufficientContext { have: padding.len(), need: depth });
        }
        Ok(Self { context: Context::new(padding, depth), tree, touches: 0 })
    }
}

impl SequencePredictor for Genie {
    fn predict(&mut self) -> Vec<f64> {
        self.touches += 1;
        let recent = self.context.recent_first();
        self.tree.next_distribution(&recent).expect("context covers the tree depth").to_vec()
    }
    fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.tree.alphabet().check(symbol as usize)?;
        self.context.push(symbol);
        Ok(())
    }
    fn node_touches(&self) -> u64 {
        self.touches
    }
}

/// A predictor name with an optional argument, written `name[:arg]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredictorSpec {
    pub name: String,
    pub arg: Option<String>,
}

impl PredictorSpec {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), arg: None }
    }

    pub fn with_arg(name: &str, arg: impl ToString) -> Self {
        Self { name: name.to_string(), arg: Some(arg.to_string()) }
    }

    fn order_arg(&self) -> Result<Option<usize>> {
        self.arg
            .as_deref()
            .map(|a| a.parse().map_err(|_| VomcError::Parse(format!("`{self}`: order must be an integer"))))
            .transpose()
    }

    fn variant_arg(&self) -> Result<FeatureVariant> {
        self.arg.as_deref().map_or(Ok(FeatureVariant::Full), str::parse)
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.arg {
            Some(a) => write!(f, "{}:{a}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

impl FromStr for PredictorSpec {
    type Err = VomcError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.to_string())),
            None => (s, None),
        };
        if name.is_empty() || arg.as_deref() == Some("") {
            return Err(VomcError::Parse(format!("bad predictor spec `{s}`")));
        }
        Ok(Self { name: name.to_string(), arg })
    }
}

/// What a predictor may look at when it starts on one sequence.
#[derive(Clone, Copy)]
pub struct Episode<'a> {
    pub prior: &'a CtwPrior,
    /// Initial context, oldest first.
    pub padding: &'a [Symbol],
    /// Generating tree, when known.
    pub source: Option<&'a ContextTree>,
    /// Sequence length, for positional encodings.
    pub window: usize,
}

/// Factory for one family of predictors.
pub trait PredictorStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Identifier in compressed containers; `None` when not storable.
    fn container_id(&self, spec: &PredictorSpec) -> Option<u8>;
    /// Context symbols needed before the first prediction.
    fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize>;
    fn start(&self, spec: &PredictorSpec, episode: Episode<'_>) -> Result<Box<dyn SequencePredictor>>;
}

fn no_arg(spec: &PredictorSpec) -> Result<()> {
    match &spec.arg {
        None => Ok(()),
        Some(_) => Err(VomcError::Parse(format!("`{}` takes no argument", spec.name))),
    }
}

fn tail(padding: &[Symbol], len: usize) -> &[Symbol] {
    &padding[padding.len().saturating_sub(len)..]
}

struct UniformStrategy;
struct CtwStrategy;
struct BlendStrategy;
struct PpmStrategy;
struct SyntfStrategy;
struct GenieStrategy;

impl PredictorStrategy for UniformStrategy {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn container_id(&self, _: &PredictorSpec) -> Option<u8> {
        Some(0)
    }
    fn context_len(&self, spec: &PredictorSpec, _: &CtwPrior) -> Result<usize> {
        no_arg(spec).map(|_| 0)
    }
    fn start(&self, spec: &PredictorSpec, ep: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        no_arg(spec)?;
        Ok(Box::new(Uniform(ep.prior.alphabet())))
    }
}

impl PredictorStrategy for CtwStrategy {
    fn name(&self) -> &'static str {
        "ctw"
    }
    fn container_id(&self, _: &PredictorSpec) -> Option<u8> {
        Some(1)
    }
    fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize> {
        no_arg(spec).map(|_| prior.depth)
    }
    fn start(&self, spec: &PredictorSpec, ep: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        no_arg(spec)?;
        Ok(Box::new(CtwState::new(ep.prior.clone(), tail(ep.padding, ep.prior.depth))?))
    }
}

impl PredictorStrategy for BlendStrategy {
    fn name(&self) -> &'static str {
        "blend"
    }
    fn container_id(&self, _: &PredictorSpec) -> Option<u8> {
        Some(2)
    }
    fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize> {
        no_arg(spec).map(|_| prior.depth)
    }
    fn start(&self, spec: &PredictorSpec, ep: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        no_arg(spec)?;
        Ok(Box::new(BlendPredictor::new(ep.prior.clone(), tail(ep.padding, ep.prior.depth))?))
    }
}

impl PredictorStrategy for PpmStrategy {
    fn name(&self) -> &'static str {
        "ppm"
    }
    /// The container's depth field carries the order.
    fn container_id(&self, _: &PredictorSpec) -> Option<u8> {
        Some(3)
    }
    fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize> {
        Ok(spec.order_arg()?.unwrap_or(prior.depth))
    }
    fn start(&self, spec: &PredictorSpec, ep: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        let order = spec.order_arg()?.unwrap_or(ep.prior.depth);
        let inner = PpmPredictor::new(ep.prior.alphabet(), order, tail(ep.padding, order))?;
        Ok(Box::new(Ppm { inner, touches: 0 }))
    }
}

impl PredictorStrategy for SyntfStrategy {
    fn name(&self) -> &'static str {
        "syntf"
    }
    fn container_id(&self, spec: &PredictorSpec) -> Option<u8> {
        (spec.variant_arg().ok()? == FeatureVariant::Full).then_some(4)
    }
    fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize> {
        spec.variant_arg().map(|_| prior.depth)
    }
    fn start(&self, spec: &PredictorSpec, ep: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        let config = ConstructionConfig::new(ep.prior.clone(), ep.window).with_variant(spec.variant_arg()?);
        Ok(Box::new(SyntfSimulator::new(config, tail(ep.padding, ep.prior.depth))?))
    }
}

impl PredictorStrategy for GenieStrategy {
    fn name(&self) -> &'static str {
        "genie"
    }
    fn container_id(&self, _: &PredictorSpec) -> Option<u8> {
        None
    }
    /// The source depth is not known here; the generator pads to at least D.
    fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize> {
        no_arg(spec).map(|_| prior.depth)
    }
    fn start(&self, spec: &PredictorSpec, ep: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        no_arg(spec)?;
        let tree = ep
            .source
            .ok_or_else(|| VomcError::InvalidConfig("genie needs the generating tree".into()))?;
        Ok(Box::new(Genie::new(tree.clone(), ep.padding)?))
    }
}

/// Strategies by name.
#[derive(Clone)]
pub struct PredictorRegistry {
    strategies: BTreeMap<&'static str, Arc<dyn PredictorStrategy>>,
}

impl Default for PredictorRegistry {
    fn default() -> Self {
        let mut r = Self { strategies: BTreeMap::new() };
        r.register(Arc::new(UniformStrategy));
        r.register(Arc::new(CtwStrategy));
        r.register(Arc::new(BlendStrategy));
        r.register(Arc::new(PpmStrategy));
        r.register(Arc::new(SyntfStrategy));
        r.register(Arc::new(GenieStrategy));
        r
    }
}

impl PredictorRegistry {
    pub fn empty() -> Self {
        Self { strategies: BTreeMap::new() }
    }

    pub fn register(&mut self, strategy: Arc<dyn PredictorStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.strategies.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn PredictorStrategy>> {
        self.strategies.get(name).ok_or_else(|| VomcError::UnknownPredictor(name.to_string()))
    }

    pub fn context_len(&self, spec: &PredictorSpec, prior: &CtwPrior) -> Result<usize> {
        self.get(&spec.name)?.context_len(spec, prior)
    }

    pub fn container_id(&self, spec: &PredictorSpec) -> Result<u8> {
        self.get(&spec.name)?
            .container_id(spec)
            .ok_or_else(|| VomcError::InvalidConfig(format!("`{spec}` cannot be stored in a container")))
    }

    /// Plain spec stored under a container id.
    pub fn spec_for_id(&self, id: u8) -> Result<PredictorSpec> {
        self.strategies
            .values()
            .find(|s| s.container_id(&PredictorSpec::new(s.name())) == Some(id))
            .map(|s| PredictorSpec::new(s.name()))
            .ok_or(VomcError::UnknownPredictorId(id))
    }

    pub fn start(&self, spec: &PredictorSpec, episode: Episode<'_>) -> Result<Box<dyn SequencePredictor>> {
        let need = self.context_len(spec, episode.prior)?;
        if episode.padding.len() < need {
            return Err(VomcError::InsufficientContext { have: episode.padding.len(), need });
        }
        self.get(&spec.name)?.start(spec, episode)
    }
}
