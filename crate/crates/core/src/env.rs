//! Contexts, game instances and the superlative ground truth.
//!
//! A context over `n` scales holds `2n` objects, each of which must be the
//! unique minimum or unique maximum on at least one scale. Degrees live on a
//! 19-point grid centred on zero.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of grid steps on each side of zero.
const GRID_HALF_STEPS: i32 = 9;

/// Default cap on column redraws before [`generate_context`] gives up.
pub const DEFAULT_REJECTION_BUDGET: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("malformed context: {0}")]
    MalformedContext(String),
    #[error("object index {index} out of range for context of {len} objects")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension {dim} out of range for {n_dims} dimensions")]
    DimOutOfRange { dim: usize, n_dims: usize },
    #[error("no unique {pol} referent on dimension {dim}")]
    NoUniqueReferent { dim: usize, pol: Polarity },
    #[error("no valid context after {attempts} attempts with {n_dims} dimensions")]
    RejectionBudgetExceeded { attempts: usize, n_dims: usize },
    #[error("degree {0} is not on the generation grid")]
    OffGrid(f64),
    #[error("n_dims must be at least 1")]
    ZeroDims,
}

/// A degree on one scale. Always one of -0.9, -0.8, ..., 0.9.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Degree(f64);

impl Degree {
    /// Grid point `steps / 10` for `steps` in -9..=9.
    pub fn from_steps(steps: i32) -> Result<Self, EnvError> {
        if steps.abs() > GRID_HALF_STEPS {
            return Err(EnvError::OffGrid(steps as f64 / 10.0));
        }
        Ok(Degree(steps as f64 / 10.0))
    }

    pub fn new(value: f64) -> Result<Self, EnvError> {
        let steps = (value * 10.0).round();
        if !value.is_finite() || (value * 10.0 - steps).abs() > 1e-9 {
            return Err(EnvError::OffGrid(value));
        }
        Self::from_steps(steps as i32)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// The 19 grid values in ascending order.
///
/// Degrees are drawn from the open interval (0, 2) at steps of 0.1 and then
/// shifted down by one, so neither -1.0 nor +1.0 is ever produced.
pub fn degree_grid() -> Vec<Degree> {
    (-GRID_HALF_STEPS..=GRID_HALF_STEPS)
        .map(|s| Degree(s as f64 / 10.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Min,
    Max,
}

impl Polarity {
    pub const ALL: [Polarity; 2] = [Polarity::Min, Polarity::Max];

    pub fn index(self) -> usize {
        match self {
            Polarity::Min => 0,
            Polarity::Max => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Polarity::Min),
            1 => Some(Polarity::Max),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Min => "MIN",
            Polarity::Max => "MAX",
        })
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MIN" => Ok(Polarity::Min),
            "MAX" => Ok(Polarity::Max),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

/// A (dimension, polarity) pair on which an object is the unique extremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Extremum {
    pub dim: usize,
    pub pol: Polarity,
}

impl Extremum {
    pub fn new(dim: usize, pol: Polarity) -> Self {
        Extremum { dim, pol }
    }
}

impl fmt::Display for Extremum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.dim, self.pol)
    }
}

impl FromStr for Extremum {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (dim, pol) = s
            .split_once('-')
            .ok_or_else(|| format!("expected DIM-POL, got {s:?}"))?;
        let dim = dim.parse().map_err(|e| format!("bad dimension in {s:?}: {e}"))?;
        Ok(Extremum::new(dim, pol.parse()?))
    }
}

pub type Signature = BTreeSet<Extremum>;

pub type ObjectVec = Vec<Degree>;

/// An ordered list of objects, each with one degree per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub objects: Vec<ObjectVec>,
}

impl Context {
    pub fn new(objects: Vec<ObjectVec>) -> Self {
        Context { objects }
    }

    /// Builds a context from raw values, rejecting off-grid degrees.
    pub fn from_values(rows: &[Vec<f64>]) -> Result<Self, EnvError> {
        let objects = rows
            .iter()
            .map(|row| row.iter().map(|&v| Degree::new(v)).collect())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Context { objects })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn n_dims(&self) -> usize {
        self.objects.first().map_or(0, Vec::len)
    }

    pub fn degree(&self, object: usize, dim: usize) -> f64 {
        self.objects[object][dim].value()
    }

    /// Row-major flattening: object 0's degrees, then object 1's, ...
    pub fn flatten(&self) -> Vec<f64> {
        self.objects
            .iter()
            .flat_map(|o| o.iter().map(|d| d.value()))
            .collect()
    }

    fn check_shape(&self) -> Result<usize, EnvError> {
        let n = self.n_dims();
        if self.objects.is_empty() {
            return Err(EnvError::MalformedContext("no objects".into()));
        }
        if n == 0 {
            return Err(EnvError::MalformedContext("objects have no degrees".into()));
        }
        if let Some(i) = self.objects.iter().position(|o| o.len() != n) {
            return Err(EnvError::MalformedContext(format!(
                "object {i} has {} degrees, expected {n}",
                self.objects[i].len()
            )));
        }
        Ok(n)
    }
}

/// Index of the unique extremum of `pol` on `dim`, or `None` on a tie.
fn unique_extremum(ctx: &Context, dim: usize, pol: Polarity) -> Option<usize> {
    let better = |a: f64, b: f64| match pol {
        Polarity::Min => a < b,
        Polarity::Max => a > b,
    };
    let mut best = 0;
    let mut tied = false;
    for i in 1..ctx.len() {
        let (v, b) = (ctx.degree(i, dim), ctx.degree(best, dim));
        if better(v, b) {
            best = i;
            tied = false;
        } else if v == b {
            tied = true;
        }
    }
    (!tied).then_some(best)
}

/// True iff every object is the strict minimum or strict maximum on some dimension.
pub fn is_valid_context(ctx: &Context) -> Result<bool, EnvError> {
    let n = ctx.check_shape()?;
    let mut covered = vec![false; ctx.len()];
    for dim in 0..n {
        for pol in Polarity::ALL {
            if let Some(i) = unique_extremum(ctx, dim, pol) {
                covered[i] = true;
            }
        }
    }
    Ok(covered.into_iter().all(|c| c))
}

/// All (dimension, polarity) pairs on which object `idx` is the unique extremum.
pub fn extremal_signature(ctx: &Context, idx: usize) -> Result<Signature, EnvError> {
    let n = ctx.check_shape()?;
    if idx >= ctx.len() {
        return Err(EnvError::IndexOutOfRange { index: idx, len: ctx.len() });
    }
    let mut sig = Signature::new();
    for dim in 0..n {
        for pol in Polarity::ALL {
            if unique_extremum(ctx, dim, pol) == Some(idx) {
                sig.insert(Extremum::new(dim, pol));
            }
        }
    }
    Ok(sig)
}

/// Denotation of "the `pol`-est on `dim`": the object holding the strict
/// extremum of that polarity on that scale.
pub fn superlative_oracle(ctx: &Context, dim: usize, pol: Polarity) -> Result<usize, EnvError> {
    let n = ctx.check_shape()?;
    if dim >= n {
        return Err(EnvError::DimOutOfRange { dim, n_dims: n });
    }
    unique_extremum(ctx, dim, pol).ok_or(EnvError::NoUniqueReferent { dim, pol })
}

pub fn generate_context<R: Rng + ?Sized>(n_dims: usize, rng: &mut R) -> Result<Context, EnvError> {
    generate_context_with_budget(n_dims, DEFAULT_REJECTION_BUDGET, rng)
}

/// Rejection sampler over i.i.d. uniform grid degrees, conditioned on validity.
///
/// `budget` caps the total number of column draws.
pub fn generate_context_with_budget<R: Rng + ?Sized>(
    n_dims: usize,
    budget: usize,
    rng: &mut R,
) -> Result<Context, EnvError> {
    if n_dims == 0 {
        return Err(EnvError::ZeroDims);
    }
    let n_objects = 2 * n_dims;
    let mut steps = vec![0i32; n_objects * n_dims];
    let mut covered = vec![false; n_objects];
    let mut attempts = 0;
    // With 2n objects and 2n (dimension, polarity) slots, a context is valid
    // iff every slot has a unique extremum and no object fills two slots.
    // Whether column k can be accepted depends only on how many objects the
    // earlier columns covered (objects are exchangeable), so redrawing just
    // the failing column accepts contexts with the same distribution as
    // redrawing the whole context.
    for dim in 0..n_dims {
        loop {
            if attempts == budget {
                return Err(EnvError::RejectionBudgetExceeded { attempts: budget, n_dims });
            }
            attempts += 1;
            for obj in 0..n_objects {
                steps[obj * n_dims + dim] = rng.gen_range(-GRID_HALF_STEPS..=GRID_HALF_STEPS);
            }
            let lo = column_extremum(&steps, n_dims, dim, true);
            let hi = column_extremum(&steps, n_dims, dim, false);
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if !covered[lo] && !covered[hi] {
                    covered[lo] = true;
                    covered[hi] = true;
                    break;
                }
            }
        }
    }
    let objects = steps
        .chunks(n_dims)
        .map(|row| row.iter().map(|&s| Degree(s as f64 / 10.0)).collect())
        .collect();
    let ctx = Context { objects };
    debug_assert!(is_valid_context(&ctx)?);
    Ok(ctx)
}

/// Unique argmin (`min = true`) or argmax of a column of grid steps.
fn column_extremum(steps: &[i32], n_dims: usize, dim: usize, min: bool) -> Option<usize> {
    let mut best = 0;
    let mut tied = false;
    for obj in 1..steps.len() / n_dims {
        let (v, b) = (steps[obj * n_dims + dim], steps[best * n_dims + dim]);
        if (min && v < b) || (!min && v > b) {
            best = obj;
            tied = false;
        } else if v == b {
            tied = true;
        }
    }
    (!tied).then_some(best)
}

/// One round of the game: a context, a target and the target's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    pub context: Context,
    pub target_index: usize,
    pub signature: Signature,
    pub canonical: Extremum,
}

impl GameInstance {
    /// Wraps a context and target, computing the signature.
    pub fn new(context: Context, target_index: usize) -> Result<Self, EnvError> {
        let signature = extremal_signature(&context, target_index)?;
        let canonical = *signature.iter().next().ok_or_else(|| {
            EnvError::MalformedContext(format!("object {target_index} is extreme on no dimension"))
        })?;
        Ok(GameInstance { context, target_index, signature, canonical })
    }

    pub fn n_dims(&self) -> usize {
        self.context.n_dims()
    }
}

pub fn sample_game<R: Rng + ?Sized>(n_dims: usize, rng: &mut R) -> Result<GameInstance, EnvError> {
    let context = generate_context(n_dims, rng)?;
    let target = rng.gen_range(0..context.len());
    GameInstance::new(context, target)
}

/// A message from `M_S x M_P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub ms: usize,
    pub mp: usize,
}

/// Sender view: target first, remaining objects in context order.
pub fn encode_sender_input(game: &GameInstance) -> Vec<f64> {
    let ctx = &game.context;
    let mut out = Vec::with_capacity(ctx.len() * ctx.n_dims());
    out.extend(ctx.objects[game.target_index].iter().map(|d| d.value()));
    for (i, obj) in ctx.objects.iter().enumerate() {
        if i != game.target_index {
            out.extend(obj.iter().map(|d| d.value()));
        }
    }
    out
}

/// Receiver view of a context.
///
/// `order[k]` is the context index of the object shown at position `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverView {
    pub input: Vec<f64>,
    pub target_position: usize,
    pub order: Vec<usize>,
}

impl ReceiverView {
    /// Applies an explicit ordering; used directly by tests and by evaluation replays.
    pub fn with_order(game: &GameInstance, order: Vec<usize>) -> Self {
        let ctx = &game.context;
        let input = order
            .iter()
            .flat_map(|&i| ctx.objects[i].iter().map(|d| d.value()))
            .collect();
        let target_position = order
            .iter()
            .position(|&i| i == game.target_index)
            .expect("order must be a permutation of the context");
        ReceiverView { input, target_position, order }
    }

    /// Degree of the object at receiver position `pos` on `dim`.
    pub fn degree(&self, pos: usize, dim: usize, n_dims: usize) -> f64 {
        self.input[pos * n_dims + dim]
    }
}

/// Shuffles the objects uniformly for the receiver.
pub fn permute_for_receiver<R: Rng + ?Sized>(game: &GameInstance, rng: &mut R) -> ReceiverView {
    let mut order: Vec<usize> = (0..game.context.len()).collect();
    order.shuffle(rng);
    ReceiverView::with_order(game, order)
}

/// The context as the receiver sees it.
pub fn permuted_context(game: &GameInstance, order: &[usize]) -> Context {
    Context::new(order.iter().map(|&i| game.context.objects[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(rows: &[&[f64]]) -> Context {
        Context::from_values(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn grid_is_open_interval_shifted() {
        let g: Vec<f64> = degree_grid().into_iter().map(Degree::value).collect();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], -0.9);
        assert_eq!(g[9], 0.0);
        assert_eq!(g[18], 0.9);
        assert!(!g.contains(&1.0) && !g.contains(&-1.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn off_grid_degree_rejected() {
        assert!(Degree::new(0.35).is_err());
        assert!(Degree::new(1.0).is_err());
        assert_eq!(Degree::new(-0.5).unwrap().value(), -0.5);
    }

    #[test]
    fn validity_examples() {
        assert!(is_valid_context(&ctx(&[&[-0.5], &[0.3]])).unwrap());
        assert!(!is_valid_context(&ctx(&[&[0.3], &[0.3]])).unwrap());
        let four = ctx(&[&[-0.9, -0.9], &[0.9, 0.9], &[0.0, 0.1], &[0.1, 0.0]]);
        assert!(!is_valid_context(&four).unwrap());
    }

    #[test]
    fn ragged_context_is_malformed() {
        let ragged = Context::new(vec![
            vec![Degree::new(0.1).unwrap()],
            vec![Degree::new(0.2).unwrap(), Degree::new(0.3).unwrap()],
        ]);
        assert!(matches!(is_valid_context(&ragged), Err(EnvError::MalformedContext(_))));
        assert!(matches!(is_valid_context(&Context::new(vec![])), Err(EnvError::MalformedContext(_))));
    }

    #[test]
    fn signature_examples() {
        let two = ctx(&[&[-0.5], &[0.3]]);
        let min0: Signature = [Extremum::new(0, Polarity::Min)].into();
        let max0: Signature = [Extremum::new(0, Polarity::Max)].into();
        assert_eq!(extremal_signature(&two, 0).unwrap(), min0);
        assert_eq!(extremal_signature(&two, 1).unwrap(), max0);

        let four = ctx(&[&[-0.9, -0.9], &[0.9, 0.9], &[0.0, 0.1], &[0.1, 0.0]]);
        let both_min: Signature =
            [Extremum::new(0, Polarity::Min), Extremum::new(1, Polarity::Min)].into();
        assert_eq!(extremal_signature(&four, 0).unwrap(), both_min);
        assert!(extremal_signature(&four, 2).unwrap().is_empty());
        assert!(matches!(
            extremal_signature(&four, 4),
            Err(EnvError::IndexOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn oracle_examples() {
        let two = ctx(&[&[-0.5], &[0.3]]);
        assert_eq!(superlative_oracle(&two, 0, Polarity::Max).unwrap(), 1);
        assert_eq!(superlative_oracle(&two, 0, Polarity::Min).unwrap(), 0);
        let tie = ctx(&[&[0.3], &[0.3]]);
        assert!(matches!(
            superlative_oracle(&tie, 0, Polarity::Max),
            Err(EnvError::NoUniqueReferent { dim: 0, pol: Polarity::Max })
        ));
        assert!(matches!(superlative_oracle(&two, 1, Polarity::Max), Err(EnvError::DimOutOfRange { .. })));
    }

    #[test]
    fn one_dim_context_needs_distinct_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let c = generate_context(1, &mut rng).unwrap();
            assert_eq!(c.len(), 2);
            assert_ne!(c.degree(0, 0), c.degree(1, 0));
        }
    }

    #[test]
    fn zero_dims_and_tiny_budget_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(generate_context(0, &mut rng), Err(EnvError::ZeroDims));
        // With n = 3 most raw draws are invalid, so a budget of zero always fails.
        assert!(matches!(
            generate_context_with_budget(3, 0, &mut rng),
            Err(EnvError::RejectionBudgetExceeded { attempts: 0, n_dims: 3 })
        ));
    }

    #[test]
    fn generated_degrees_are_on_grid() {
        let grid = degree_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let c = generate_context(3, &mut rng).unwrap();
            assert_eq!(c.len(), 6);
            assert!(c.objects.iter().flatten().all(|d| grid.contains(d)));
        }
    }

    /// Reference sampler: redraw the whole context until it is valid.
    fn wholesale_rejection(n_dims: usize, rng: &mut ChaCha8Rng) -> Context {
        loop {
            let objects = (0..2 * n_dims)
                .map(|_| (0..n_dims).map(|_| Degree::from_steps(rng.gen_range(-9..=9)).unwrap()).collect())
                .collect();
            let c = Context::new(objects);
            if is_valid_context(&c).unwrap() {
                return c;
            }
        }
    }

    /// Pearson chi-square statistic of two count vectors against their pooled proportions.
    fn two_sample_chi2(a: &[f64], b: &[f64]) -> f64 {
        let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        a.iter()
            .zip(b)
            .filter(|(x, y)| **x + **y > 0.0)
            .map(|(x, y)| {
                let pooled = (x + y) / (na + nb);
                let (ea, eb) = (pooled * na, pooled * nb);
                (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
            })
            .sum()
    }

    #[test]
    fn column_redraws_match_wholesale_rejection() {
        let samples = 20_000;
        let mut fast_rng = ChaCha8Rng::seed_from_u64(21);
        let mut ref_rng = ChaCha8Rng::seed_from_u64(22);
        // histogram of object 0's degree on dimension 1, and of which object is the max on dimension 0
        let (mut fast_deg, mut ref_deg) = (vec![0.0; 19], vec![0.0; 19]);
        let (mut fast_arg, mut ref_arg) = (vec![0.0; 4], vec![0.0; 4]);
        for _ in 0..samples {
            let f = generate_context(2, &mut fast_rng).unwrap();
            let r = wholesale_rejection(2, &mut ref_rng);
            fast_deg[(f.degree(0, 1) * 10.0).round() as usize + 9] += 1.0;
            ref_deg[(r.degree(0, 1) * 10.0).round() as usize + 9] += 1.0;
            fast_arg[superlative_oracle(&f, 0, Polarity::Max).unwrap()] += 1.0;
            ref_arg[superlative_oracle(&r, 0, Polarity::Max).unwrap()] += 1.0;
        }
        // 99.9% quantiles: chi2(18) = 42.3, chi2(3) = 16.3
        assert!(two_sample_chi2(&fast_deg, &ref_deg) < 42.3);
        assert!(two_sample_chi2(&fast_arg, &ref_arg) < 16.3);
    }

    #[test]
    fn sample_game_one_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let g = sample_game(1, &mut rng).unwrap();
            assert!(g.target_index < 2);
            assert_eq!(g.signature.len(), 1);
            assert!(g.signature.contains(&g.canonical));
        }
    }

    #[test]
    fn canonical_is_least_with_min_first() {
        let four = ctx(&[&[-0.9, -0.9], &[0.9, 0.9], &[0.0, -0.1], &[0.1, 0.0]]);
        // object 1 is max on both dimensions
        let g = GameInstance::new(four, 1).unwrap();
        assert_eq!(g.canonical, Extremum::new(0, Polarity::Max));
        assert_eq!(g.signature.len(), 2);
    }

    #[test]
    fn sender_encoding_puts_target_first() {
        let two = ctx(&[&[-0.5], &[0.3]]);
        let g1 = GameInstance::new(two.clone(), 1).unwrap();
        assert_eq!(encode_sender_input(&g1), vec![0.3, -0.5]);
        let g0 = GameInstance::new(two, 0).unwrap();
        assert_eq!(encode_sender_input(&g0), vec![-0.5, 0.3]);

        let four = ctx(&[&[-0.9, 0.1], &[0.9, 0.2], &[0.3, 0.9], &[0.1, -0.9]]);
        let g = GameInstance::new(four, 2).unwrap();
        assert_eq!(
            encode_sender_input(&g),
            vec![0.3, 0.9, -0.9, 0.1, 0.9, 0.2, 0.1, -0.9]
        );
    }

    #[test]
    fn receiver_order_bookkeeping() {
        let two = ctx(&[&[-0.5], &[0.3]]);
        let g = GameInstance::new(two, 0).unwrap();
        let id = ReceiverView::with_order(&g, vec![0, 1]);
        assert_eq!(id.target_position, g.target_index);
        let swap = ReceiverView::with_order(&g, vec![1, 0]);
        assert_eq!(swap.target_position, 1);
        assert_eq!(swap.input, vec![0.3, -0.5]);
    }

    #[test]
    fn extremum_text_round_trip() {
        let e = Extremum::new(2, Polarity::Max);
        assert_eq!(e.to_string(), "2-MAX");
        assert_eq!("2-MAX".parse::<Extremum>().unwrap(), e);
        assert!("2:MAX".parse::<Extremum>().is_err());
    }
}
